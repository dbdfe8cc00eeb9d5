#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "revise/error.hpp"
#include "revise/numcore/tensor.hpp"

namespace revise::world {

struct VideoDims {
  std::size_t frames = 8;
  std::size_t height = 8;
  std::size_t width = 8;

  std::size_t frame_size() const { return height * width; }
  std::size_t size() const { return frames * height * width; }
  bool operator==(const VideoDims&) const = default;
};

inline std::string to_string(const VideoDims& d) {
  return std::to_string(d.frames) + "x" + std::to_string(d.height) + "x" + std::to_string(d.width);
}

// F x H x W grayscale frames, row-major (frame, row, column).
class Video {
 public:
  Video() = default;

  explicit Video(VideoDims dims, double fill = 0.0) : dims_(dims), values_(dims.size(), fill) {
    if (dims.size() == 0) throw ValidationError("video: dimensions must be positive");
  }

  Video(VideoDims dims, std::vector<double> values) : dims_(dims), values_(std::move(values)) {
    if (dims.size() == 0) throw ValidationError("video: dimensions must be positive");
    if (values_.size() != dims.size()) {
      throw ShapeError("video: " + to_string(dims) + " needs " + std::to_string(dims.size()) + " values, got " +
                       std::to_string(values_.size()));
    }
  }

  const VideoDims& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }

  double& at(std::size_t f, std::size_t r, std::size_t c) {
    return values_[(f * dims_.height + r) * dims_.width + c];
  }
  double at(std::size_t f, std::size_t r, std::size_t c) const {
    return values_[(f * dims_.height + r) * dims_.width + c];
  }

  std::span<double> frame(std::size_t f) { return {values_.data() + f * dims_.frame_size(), dims_.frame_size()}; }
  std::span<const double> frame(std::size_t f) const {
    return {values_.data() + f * dims_.frame_size(), dims_.frame_size()};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }

  bool in_unit_range() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
  }

  // Flattened latent as a 1 x (F*H*W) row.
  num::Tensor flatten() const { return num::Tensor(num::Shape{1, values_.size()}, values_); }

  bool operator==(const Video&) const = default;

 private:
  VideoDims dims_;
  std::vector<double> values_;
};

inline void require_same_dims(const char* op, const Video& a, const Video& b) {
  if (!(a.dims() == b.dims())) {
    throw ShapeError(std::string(op) + ": video " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
}

// Nested [F][H][W] arrays.
inline nlohmann::json video_to_json(const Video& v) {
  nlohmann::json frames = nlohmann::json::array();
  const auto& d = v.dims();
  for (std::size_t f = 0; f < d.frames; ++f) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < d.height; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t c = 0; c < d.width; ++c) row.push_back(v.at(f, r, c));
      rows.push_back(std::move(row));
    }
    frames.push_back(std::move(rows));
  }
  return frames;
}

inline Video video_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty() || !j[0][0].is_array() || j[0][0].empty()) {
    throw ValidationError("video: expected a non-empty nested [F][H][W] array");
  }
  VideoDims d{j.size(), j[0].size(), j[0][0].size()};
  std::vector<double> values;
  values.reserve(d.size());
  for (const auto& frame : j) {
    if (!frame.is_array() || frame.size() != d.height) throw ValidationError("video: ragged frame array");
    for (const auto& row : frame) {
      if (!row.is_array() || row.size() != d.width) throw ValidationError("video: ragged row array");
      for (const auto& v : row) {
        if (!v.is_number()) throw ValidationError("video: non-numeric pixel");
        values.push_back(v.get<double>());
      }
    }
  }
  return Video(d, std::move(values));
}

}  // namespace revise::world
