#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "revise/error.hpp"
#include "revise/microworld/video.hpp"
#include "revise/numcore/rng.hpp"

namespace revise::world {

// Axis-aligned rectangle moving with constant velocity (pixels per frame);
// its top-left corner at frame t is (row + round(v_row * t), col + round(v_col * t)).
struct SceneObject {
  int row = 0;
  int col = 0;
  int height = 1;
  int width = 1;
  double intensity = 0.9;
  double v_row = 0.0;
  double v_col = 0.0;

  int row_at(std::size_t t) const { return row + static_cast<int>(std::lround(v_row * static_cast<double>(t))); }
  int col_at(std::size_t t) const { return col + static_cast<int>(std::lround(v_col * static_cast<double>(t))); }
};

struct SceneParams {
  VideoDims dims;
  double background = 0.1;
  std::vector<SceneObject> objects;
};

// Objects are painted in order over a uniform background; later objects win.
inline Video render_scene(const SceneParams& scene) {
  if (scene.background < 0 || scene.background > 1) throw ValidationError("render_scene: background outside [0,1]");
  Video v(scene.dims, scene.background);
  const auto& d = scene.dims;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& o = scene.objects[i];
    if (o.height <= 0 || o.width <= 0) throw ValidationError("render_scene: object " + std::to_string(i) + " has empty extent");
    if (o.intensity < 0 || o.intensity > 1) throw ValidationError("render_scene: object intensity outside [0,1]");
    for (std::size_t t = 0; t < d.frames; ++t) {
      const int r0 = o.row_at(t), c0 = o.col_at(t);
      if (r0 < 0 || c0 < 0 || r0 + o.height > static_cast<int>(d.height) || c0 + o.width > static_cast<int>(d.width)) {
        throw ValidationError("render_scene: object " + std::to_string(i) + " out of bounds at frame " +
                              std::to_string(t));
      }
      for (int r = r0; r < r0 + o.height; ++r)
        for (int c = c0; c < c0 + o.width; ++c) v.at(t, r, c) = o.intensity;
    }
  }
  return v;
}

// One or two small objects, some drifting, over a dim background. Every draw
// is in bounds for all frames by construction.
inline SceneParams random_scene(const VideoDims& dims, std::uint64_t seed) {
  num::Rng rng(seed);
  SceneParams s;
  s.dims = dims;
  s.background = 0.05 + 0.4 * rng.uniform();
  const std::size_t count = 1 + rng.below(2);
  const double span = static_cast<double>(dims.frames - 1);
  for (std::size_t i = 0; i < count; ++i) {
    SceneObject o;
    o.height = 1 + static_cast<int>(rng.below(std::min<std::size_t>(3, dims.height)));
    o.width = 1 + static_cast<int>(rng.below(std::min<std::size_t>(3, dims.width)));
    o.intensity = 0.55 + 0.4 * rng.uniform();
    static constexpr double kSpeeds[] = {0.0, 0.0, 0.0, -0.5, 0.5};
    o.v_row = kSpeeds[rng.below(5)];
    o.v_col = kSpeeds[rng.below(5)];
    auto place = [&](int extent, double v, std::size_t limit, int& pos) {
      const int travel = static_cast<int>(std::lround(std::abs(v) * span));
      const int room = static_cast<int>(limit) - extent - travel;
      if (room < 0) return false;
      const int lo = v < 0 ? travel : 0;
      pos = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(room) + 1));
      return true;
    };
    if (!place(o.height, o.v_row, dims.height, o.row)) {
      o.v_row = 0;
      place(o.height, 0.0, dims.height, o.row);
    }
    if (!place(o.width, o.v_col, dims.width, o.col)) {
      o.v_col = 0;
      place(o.width, 0.0, dims.width, o.col);
    }
    s.objects.push_back(o);
  }
  return s;
}

}  // namespace revise::world
