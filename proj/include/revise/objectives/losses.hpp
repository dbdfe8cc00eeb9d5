#pragma once

#include <string>
#include <vector>

#include "revise/error.hpp"
#include "revise/numcore/tensor.hpp"

namespace revise::obj {

enum class Objective { sft, uso, rwo };

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::sft: return "sft";
    case Objective::uso: return "uso";
    case Objective::rwo: return "rwo";
  }
  return "?";
}

inline Objective parse_objective(const std::string& s) {
  if (s == "sft") return Objective::sft;
  if (s == "uso") return Objective::uso;
  if (s == "rwo") return Objective::rwo;
  throw ValidationError("unknown objective '" + s + "' (expected sft, uso or rwo)");
}

struct FmLoss {
  double mean = 0.0;
  std::vector<double> per_sample;
};

// Batch rows are samples: per-sample mean squared error, then the batch mean.
inline FmLoss fm_loss(const num::Tensor& v, const num::Tensor& target) {
  if (v.shape() != target.shape()) {
    throw ShapeError("fm_loss: " + num::shape_string(v.shape()) + " vs " + num::shape_string(target.shape()));
  }
  const std::size_t b = v.rows(), n = v.cols();
  FmLoss out;
  out.per_sample.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = v[i * n + j] - target[i * n + j];
      s += e * e;
    }
    out.per_sample[i] = s / static_cast<double>(n);
    out.mean += out.per_sample[i];
  }
  out.mean /= static_cast<double>(b);
  return out;
}

inline double uso_loss(double l_fm, double l_reason, double lambda) {
  if (!(lambda >= 0)) throw ValidationError("uso_loss: lambda must be >= 0");
  return l_fm + lambda * l_reason;
}

inline double rwo_loss(const std::vector<double>& sqerr, const std::vector<double>& p_yes, double lambda_c) {
  if (sqerr.size() != p_yes.size()) throw ShapeError("rwo_loss: per-sample errors and p_yes differ in length");
  if (sqerr.empty()) throw ValidationError("rwo_loss: empty batch");
  double weighted = 0.0, plain = 0.0;
  for (std::size_t i = 0; i < sqerr.size(); ++i) {
    if (!(p_yes[i] >= 0.0 && p_yes[i] <= 1.0)) throw ValidationError("rwo_loss: p_yes outside [0,1]");
    weighted += (1.0 - p_yes[i]) * sqerr[i];
    plain += sqerr[i];
  }
  const double n = static_cast<double>(sqerr.size());
  return weighted / n + lambda_c * (plain / n);
}

inline std::string stop_gradient_policy(Objective o) {
  switch (o) {
    case Objective::sft: return "none: flow-matching loss only, no critic";
    case Objective::uso:
      return "reason loss back-propagates through the clean estimate, decoder and frozen critic into the generator";
    case Objective::rwo:
      return "w = 1 - p_yes is a per-sample constant; no gradient flows through the critic";
  }
  return "?";
}

}  // namespace revise::obj
