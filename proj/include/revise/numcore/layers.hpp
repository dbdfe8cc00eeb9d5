#pragma once

#include <string>

#include "revise/numcore/graph.hpp"
#include "revise/numcore/params.hpp"
#include "revise/numcore/rng.hpp"

namespace revise::num {

// Registers `<prefix>.weight` [in x out] and `<prefix>.bias` [out].
inline void add_dense(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                      bool zero = false) {
  if (zero) {
    store.add(prefix + ".weight", Tensor(Shape{in, out}));
    store.add(prefix + ".bias", Tensor(Shape{out}));
    return;
  }
  store.add_uniform(prefix + ".weight", Shape{in, out}, in, rng);
  store.add_uniform(prefix + ".bias", Shape{out}, in, rng);
}

// x [m x in] -> x W + b. Frozen layers enter the graph as constants.
inline Var dense(Graph& g, const ParamStore& store, const std::string& prefix, Var x, bool frozen = false) {
  Var w = frozen ? g.frozen(store, prefix + ".weight") : g.param(store, prefix + ".weight");
  Var b = frozen ? g.frozen(store, prefix + ".bias") : g.param(store, prefix + ".bias");
  return add_bias(matmul(x, w), b);
}

}  // namespace revise::num
