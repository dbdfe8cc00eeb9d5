#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "revise/microworld/instruction.hpp"
#include "revise/microworld/video.hpp"

namespace revise::world {

// Background level: the most frequent pixel value over the whole video
// (ties go to the smaller value). Objects are every other pixel.
inline double background_level(const Video& v) {
  std::map<double, std::size_t> counts;
  for (double x : v.values()) ++counts[x];
  double best = 0.0;
  std::size_t best_count = 0;
  for (const auto& [value, count] : counts) {
    if (count > best_count) {
      best = value;
      best_count = count;
    }
  }
  return best;
}

namespace detail {

struct Pixel {
  int row;
  int col;
  double value;
};

inline std::vector<Pixel> object_pixels(const Video& v, std::size_t f, double bg) {
  std::vector<Pixel> out;
  const auto& d = v.dims();
  for (std::size_t r = 0; r < d.height; ++r)
    for (std::size_t c = 0; c < d.width; ++c)
      if (v.at(f, r, c) != bg) out.push_back({static_cast<int>(r), static_cast<int>(c), v.at(f, r, c)});
  return out;
}

inline void paint(Video& out, std::size_t f, const std::vector<Pixel>& pixels, double bg) {
  const auto& d = out.dims();
  for (double& x : out.frame(f)) x = bg;
  for (const Pixel& p : pixels) {
    if (p.row < 0 || p.col < 0 || p.row >= static_cast<int>(d.height) || p.col >= static_cast<int>(d.width)) continue;
    out.at(f, p.row, p.col) = p.value;
  }
}

}  // namespace detail

// Deterministic ground-truth edit. Operators act frame by frame on the object
// layer (every non-background pixel); pixels pushed off-frame are dropped.
inline Video apply_oracle_edit(const Video& source, const EditInstruction& ins) {
  validate_parameters(ins.op, ins.parameters);
  const auto& d = source.dims();
  const double bg = background_level(source);
  Video out = source;
  auto param = [&](const char* k) { return ins.parameters.at(k); };

  switch (ins.op) {
    case Operator::identity: break;

    case Operator::narrative:
      throw ValidationError("apply_oracle_edit: narrative instructions have no oracle edit");

    case Operator::translate: {
      const int dx = static_cast<int>(param("dx")), dy = static_cast<int>(param("dy"));
      for (std::size_t f = 0; f < d.frames; ++f) {
        auto px = detail::object_pixels(source, f, bg);
        for (auto& p : px) {
          p.row += dy;
          p.col += dx;
        }
        detail::paint(out, f, px, bg);
      }
      break;
    }

    case Operator::reflect: {
      const bool mirror_cols = param("axis") == 0;
      for (std::size_t f = 0; f < d.frames; ++f)
        for (std::size_t r = 0; r < d.height; ++r)
          for (std::size_t c = 0; c < d.width; ++c)
            out.at(f, r, c) = mirror_cols ? source.at(f, r, d.width - 1 - c) : source.at(f, d.height - 1 - r, c);
      break;
    }

    case Operator::decay: {
      const double rate = param("rate");
      for (std::size_t f = 0; f < d.frames; ++f) {
        const double k = std::pow(rate, static_cast<double>(f));
        for (double& x : out.frame(f))
          if (x != bg) x *= k;
      }
      break;
    }

    case Operator::grow: {
      // Chebyshev dilation with radius floor(rate * t); grown pixels take the
      // brightest object value in their neighbourhood.
      const double rate = param("rate");
      for (std::size_t f = 0; f < d.frames; ++f) {
        const int radius = static_cast<int>(std::floor(rate * static_cast<double>(f) + 1e-9));
        if (radius == 0) continue;
        for (int r = 0; r < static_cast<int>(d.height); ++r)
          for (int c = 0; c < static_cast<int>(d.width); ++c) {
            if (source.at(f, r, c) != bg) continue;
            double best = -1.0;
            for (int rr = std::max(0, r - radius); rr <= std::min<int>(d.height - 1, r + radius); ++rr)
              for (int cc = std::max(0, c - radius); cc <= std::min<int>(d.width - 1, c + radius); ++cc) {
                const double v = source.at(f, rr, cc);
                if (v != bg) best = std::max(best, v);
              }
            if (best >= 0) out.at(f, r, c) = best;
          }
      }
      break;
    }

    case Operator::impact: {
      // From the onset frame the object layer breaks at its middle column:
      // the left half moves one pixel left, the right half one pixel right.
      const std::size_t onset = static_cast<std::size_t>(param("onset"));
      for (std::size_t f = onset; f < d.frames; ++f) {
        auto px = detail::object_pixels(source, f, bg);
        if (px.empty()) continue;
        int lo = px.front().col, hi = px.front().col;
        for (const auto& p : px) {
          lo = std::min(lo, p.col);
          hi = std::max(hi, p.col);
        }
        const int mid = (lo + hi) / 2;
        for (auto& p : px) p.col += p.col <= mid ? -1 : 1;
        detail::paint(out, f, px, bg);
      }
      break;
    }

    case Operator::threshold_brighten: {
      if (bg < param("threshold")) {
        const double lifted = std::min(1.0, bg + param("delta"));
        for (double& x : out.values())
          if (x == bg) x = lifted;
      }
      break;
    }
  }
  return out;
}

// F x H x W flags, true where the oracle edit changes the source.
struct EditMask {
  VideoDims dims;
  std::vector<bool> flags;

  std::size_t count() const { return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true)); }
  bool operator==(const EditMask&) const = default;
};

inline EditMask mask_between(const Video& source, const Video& target) {
  require_same_dims("edit_mask", source, target);
  EditMask m{source.dims(), std::vector<bool>(source.size())};
  for (std::size_t i = 0; i < source.size(); ++i) m.flags[i] = std::abs(target.values()[i] - source.values()[i]) > 0;
  return m;
}

inline EditMask edit_mask(const Video& source, const EditInstruction& ins) {
  return mask_between(source, apply_oracle_edit(source, ins));
}

}  // namespace revise::world
