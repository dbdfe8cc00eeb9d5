#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "revise/error.hpp"
#include "revise/numcore/rng.hpp"
#include "revise/numcore/tensor.hpp"

namespace revise::num {

struct Param {
  std::string name;
  Tensor value;
  // AdamW moment accumulators, lazily shaped like value.
  Tensor first_moment;
  Tensor second_moment;
  std::uint64_t step = 0;
};

using Gradients = std::map<std::string, Tensor>;

// Named parameters with optimizer state. Iteration order is insertion order.
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  Tensor& add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw ValidationError("param store: duplicate parameter '" + name + "'");
    index_[name] = params_.size();
    Param p;
    p.name = name;
    p.first_moment = Tensor(init.shape());
    p.second_moment = Tensor(init.shape());
    p.value = std::move(init);
    params_.push_back(std::move(p));
    return params_.back().value;
  }

  // Uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)].
  Tensor& add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return add(name, std::move(t));
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const Param& param(const std::string& name) const { return params_.at(lookup(name)); }
  Param& param(const std::string& name) { return params_.at(lookup(name)); }

  const Tensor& value(const std::string& name) const { return param(name).value; }

  // Replaces values in place; the shape is immutable.
  void set_value(const std::string& name, const Tensor& value) {
    Param& p = param(name);
    if (p.value.shape() != value.shape()) {
      throw ShapeError("param store: '" + name + "' has shape " + shape_string(p.value.shape()) +
                       ", got " + shape_string(value.shape()));
    }
    p.value = value;
  }

  const std::vector<Param>& params() const { return params_; }
  std::vector<Param>& params() { return params_; }
  std::size_t size() const { return params_.size(); }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  // Zeroes moments and step counts so a loaded model starts a fresh run.
  void reset_optimizer_state() {
    for (auto& p : params_) {
      p.first_moment = Tensor(p.value.shape());
      p.second_moment = Tensor(p.value.shape());
      p.step = 0;
    }
  }

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  // Free-form metadata persisted with checkpoints (network dimensions etc.).
  std::map<std::string, std::string>& attributes() { return attributes_; }
  const std::map<std::string, std::string>& attributes() const { return attributes_; }

  bool operator==(const ParamStore& other) const {
    if (seed_ != other.seed_ || params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Param& a = params_[i];
      const Param& b = other.params_[i];
      if (a.name != b.name || a.value != b.value || a.first_moment != b.first_moment ||
          a.second_moment != b.second_moment || a.step != b.step) {
        return false;
      }
    }
    return attributes_ == other.attributes_;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("param store: unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<Param> params_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t seed_ = 0;
  std::map<std::string, std::string> attributes_;
};

}  // namespace revise::num
