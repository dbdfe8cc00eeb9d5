#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "revise/error.hpp"
#include "revise/numcore/params.hpp"

namespace revise::num {

enum class OptimizerKind { sgd, adamw };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adamw;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Linear ramp of the learning rate over the first warmup_steps updates.
  std::size_t warmup_steps = 0;

  void validate() const {
    if (!(learning_rate > 0)) throw ValidationError("optimizer: learning rate must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
      throw ValidationError("optimizer: betas must lie in [0, 1)");
    }
    if (weight_decay < 0) throw ValidationError("optimizer: weight decay must be >= 0");
  }
};

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adamw"; }

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adamw") return OptimizerKind::adamw;
  throw ValidationError("optimizer: unknown kind '" + s + "'");
}

// One update of every parameter in the store. Parameters absent from `grads`
// are treated as having zero gradient.
inline void optimizer_step(ParamStore& store, const Gradients& grads, const OptimizerConfig& config) {
  config.validate();
  for (const auto& [name, g] : grads) {
    if (!store.contains(name)) throw ValidationError("optimizer: gradient for unknown parameter '" + name + "'");
    if (store.value(name).shape() != g.shape()) {
      throw ShapeError("optimizer: '" + name + "' has shape " + shape_string(store.value(name).shape()) +
                       ", gradient " + shape_string(g.shape()));
    }
  }
  for (Param& p : store.params()) {
    auto it = grads.find(p.name);
    const Tensor* g = it == grads.end() ? nullptr : &it->second;
    ++p.step;
    double lr = config.learning_rate;
    if (p.step < config.warmup_steps)
      lr *= static_cast<double>(p.step) / static_cast<double>(config.warmup_steps);
    const std::size_t n = p.value.size();
    if (config.kind == OptimizerKind::sgd) {
      if (!g) continue;
      for (std::size_t i = 0; i < n; ++i) p.value[i] -= lr * (*g)[i];
      continue;
    }
    const double b1 = config.beta1, b2 = config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(p.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(p.step));
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      double& m = p.first_moment[i];
      double& v = p.second_moment[i];
      m = b1 * m + (1.0 - b1) * gi;
      v = b2 * v + (1.0 - b2) * gi * gi;
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      p.value[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.epsilon) + config.weight_decay * p.value[i]);
    }
  }
}

}  // namespace revise::num
