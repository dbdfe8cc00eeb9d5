#pragma once

#include <algorithm>
#include <cmath>

#include "revise/microworld/edit.hpp"
#include "revise/microworld/video.hpp"

namespace revise::world {

// Calibration constants of the oracle rubric.
inline constexpr double kRmseScale = 0.5;
inline constexpr double kJitterScale = 0.25;
inline constexpr double kClipBand = 0.005;

struct OracleScores {
  double ea = 0.0;
  double pc = 0.0;
  double gn = 0.0;
  double gr = 0.0;

  bool operator==(const OracleScores&) const = default;
};

namespace detail {

inline double to_score(double badness) { return 10.0 * (1.0 - std::clamp(badness, 0.0, 1.0)); }

// RMSE over positions where mask == want; 0 for an empty selection.
inline double masked_rmse(const Video& a, const Video& b, const EditMask& mask, bool want) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (mask.flags[i] != want) continue;
    const double e = a.values()[i] - b.values()[i];
    s += e * e;
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(s / static_cast<double>(n));
}

}  // namespace detail

inline OracleScores score_against(const Video& source, const Video& edited, const Video& target, const EditMask& mask) {
  require_same_dims("oracle_judge", source, edited);
  require_same_dims("oracle_judge", source, target);
  OracleScores s;
  s.ea = detail::to_score(detail::masked_rmse(edited, target, mask, true) / kRmseScale);
  s.pc = detail::to_score(detail::masked_rmse(edited, source, mask, false) / kRmseScale);

  const auto& d = edited.dims();
  const std::size_t fs = d.frame_size();
  double jitter = 0.0;
  if (d.frames > 1) {
    for (std::size_t f = 1; f < d.frames; ++f)
      for (std::size_t i = 0; i < fs; ++i) {
        const std::size_t cur = f * fs + i, prev = (f - 1) * fs + i;
        const double e1 = edited.values()[cur] - target.values()[cur];
        const double e0 = edited.values()[prev] - target.values()[prev];
        jitter += std::abs(e1 - e0);
      }
    jitter /= static_cast<double>((d.frames - 1) * fs);
  }
  s.gn = detail::to_score(jitter / kJitterScale);

  std::size_t clipped = 0;
  for (double v : edited.values())
    if (v < kClipBand || v > 1.0 - kClipBand) ++clipped;
  s.gr = detail::to_score(10.0 * static_cast<double>(clipped) / static_cast<double>(edited.size()));
  return s;
}

// Four-dimension rubric against the oracle target of (source, instruction).
inline OracleScores oracle_judge(const Video& source, const Video& edited, const EditInstruction& ins) {
  require_same_dims("oracle_judge", source, edited);
  const Video target = apply_oracle_edit(source, ins);
  return score_against(source, edited, target, mask_between(source, target));
}

}  // namespace revise::world
