#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "revise/error.hpp"
#include "revise/numcore/tensor.hpp"

namespace revise::flow {

using num::Tensor;

inline void require_time(const char* op, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError(std::string(op) + ": t = " + std::to_string(t) + " outside [0,1]");
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + num::shape_string(a.shape()) + " vs " + num::shape_string(b.shape()));
  }
}

// z_t = (1 - t) x0 + t eps. Noise sits at t = 1, data at t = 0.
inline Tensor noise_path(const Tensor& x0, const Tensor& eps, double t) {
  require_same_shape("noise_path", x0, eps);
  require_time("noise_path", t);
  Tensor z(x0.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1.0 - t) * x0[i] + t * eps[i];
  return z;
}

inline Tensor target_velocity(const Tensor& x0, const Tensor& eps) {
  require_same_shape("target_velocity", x0, eps);
  Tensor v(x0.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = eps[i] - x0[i];
  return v;
}

// One-shot clean estimate z_t - t v.
inline Tensor estimate_clean(const Tensor& z, double t, const Tensor& v) {
  require_same_shape("estimate_clean", z, v);
  Tensor x(z.shape());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = z[i] - t * v[i];
  return x;
}

inline constexpr std::size_t kTimeFeatures = 8;

// sin/cos pairs at four octave-spaced frequencies.
inline std::array<double, kTimeFeatures> time_features(double t) {
  std::array<double, kTimeFeatures> f{};
  double w = std::numbers::pi / 2.0;
  for (std::size_t k = 0; k < kTimeFeatures / 2; ++k, w *= 2.0) {
    f[2 * k] = std::sin(w * t);
    f[2 * k + 1] = std::cos(w * t);
  }
  return f;
}

}  // namespace revise::flow
