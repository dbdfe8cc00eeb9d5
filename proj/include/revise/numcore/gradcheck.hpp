#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "revise/error.hpp"
#include "revise/numcore/graph.hpp"
#include "revise/numcore/params.hpp"

namespace revise::num {

// A scalar function of the store, built fresh on the given graph.
using ScalarFn = std::function<Var(Graph&, const ParamStore&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

inline double evaluate(const ScalarFn& f, const ParamStore& store) {
  Graph g;
  return f(g, store).value().item();
}

// Central differences over every parameter entry, compared with reverse mode as
// |a - n| / max(1e-8, |a| + |n|).
inline GradCheckReport grad_check_report(const ScalarFn& f, ParamStore& store, double step) {
  if (!(step > 0)) throw ValidationError("grad_check: step must be > 0");
  Gradients analytic;
  {
    Graph g;
    Var loss = f(g, store);
    analytic = g.backward(loss);
  }
  GradCheckReport report;
  for (Param& p : store.params()) {
    auto it = analytic.find(p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = evaluate(f, store);
      p.value[i] = saved - step;
      const double down = evaluate(f, store);
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > report.max_relative_error) {
        report = {err, p.name, i, a, numeric};
      }
    }
  }
  return report;
}

inline double grad_check(const ScalarFn& f, ParamStore& store, double step) {
  return grad_check_report(f, store, step).max_relative_error;
}

}  // namespace revise::num
