#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "revise/error.hpp"
#include "revise/microworld/video.hpp"

namespace revise::curator {

struct Clip {
  std::string id;
  world::Video frames;
  std::optional<std::vector<double>> embedding;
  std::optional<std::string> caption;
};

inline double frame_difference(const world::Video& v, std::size_t f) {
  const auto a = v.frame(f - 1), b = v.frame(f);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(b[i] - a[i]);
  return s / static_cast<double>(a.size());
}

// Frame i is a cut when its mean absolute difference to frame i-1 exceeds the
// threshold.
inline std::vector<std::size_t> detect_cuts(const world::Video& video, double threshold = 0.3) {
  if (video.dims().frames < 2) throw ValidationError("detect_cuts: need at least two frames");
  if (!(threshold > 0)) throw ValidationError("detect_cuts: threshold must be positive");
  std::vector<std::size_t> cuts;
  for (std::size_t f = 1; f < video.dims().frames; ++f)
    if (frame_difference(video, f) > threshold) cuts.push_back(f);
  return cuts;
}

inline world::Video frame_range(const world::Video& v, std::size_t begin, std::size_t end) {
  const auto& d = v.dims();
  std::vector<double> values(v.values().begin() + static_cast<std::ptrdiff_t>(begin * d.frame_size()),
                             v.values().begin() + static_cast<std::ptrdiff_t>(end * d.frame_size()));
  return world::Video({end - begin, d.height, d.width}, std::move(values));
}

// Splits at the detected cuts, then windows every shot into clips of
// clip_frames (a shorter tail is dropped). A video that yields a single clip
// keeps its id; otherwise clips are numbered in frame order.
inline std::vector<Clip> segment_shots(const Clip& video, std::size_t clip_frames, double threshold = 0.3) {
  if (clip_frames == 0) throw ValidationError("segment_shots: clip_frames must be positive");
  const std::size_t n = video.frames.dims().frames;
  std::vector<std::size_t> bounds{0};
  if (n >= 2)
    for (std::size_t c : detect_cuts(video.frames, threshold)) bounds.push_back(c);
  bounds.push_back(n);
  std::vector<Clip> out;
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s)
    for (std::size_t lo = bounds[s]; lo + clip_frames <= bounds[s + 1]; lo += clip_frames)
      out.push_back({video.id, frame_range(video.frames, lo, lo + clip_frames), std::nullopt, video.caption});
  if (out.size() > 1) {
    char buf[16];
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::snprintf(buf, sizeof buf, "-%03zu", i);
      out[i].id += buf;
    }
  }
  return out;
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Raw feature vector; normalization happens in embed_clip.
  virtual std::vector<double> features(const world::Video& v) const = 0;
  virtual std::string name() const = 0;
};

// Mean frame over time, flattened.
class MeanFrameEmbedder : public Embedder {
 public:
  explicit MeanFrameEmbedder(bool centered = false) : centered_(centered) {}

  std::vector<double> features(const world::Video& v) const override {
    const auto& d = v.dims();
    std::vector<double> out(d.frame_size(), 0.0);
    for (std::size_t f = 0; f < d.frames; ++f) {
      const auto fr = v.frame(f);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += fr[i];
    }
    for (double& x : out) x /= static_cast<double>(d.frames);
    if (centered_) {
      double m = 0.0;
      for (double x : out) m += x;
      m /= static_cast<double>(out.size());
      for (double& x : out) x -= m;
    }
    return out;
  }

  std::string name() const override { return centered_ ? "mean_frame_centered" : "mean_frame"; }

 private:
  bool centered_;
};

inline std::vector<double> normalize(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (!(n > 1e-12)) throw ValidationError("embed_clip: zero feature vector cannot be normalized");
  for (double& x : v) x /= n;
  return v;
}

inline std::vector<double> embed_clip(const Clip& clip, const Embedder& embedder) {
  try {
    return normalize(embedder.features(clip.frames));
  } catch (const ValidationError& e) {
    throw ValidationError("clip " + clip.id + ": " + e.what());
  }
}

// Fills every clip's embedding, split across threads by contiguous chunks.
inline void embed_clips(std::vector<Clip>& clips, const Embedder& embedder, std::size_t threads = 1) {
  threads = std::max<std::size_t>(1, std::min(threads, clips.size()));
  if (threads == 1) {
    for (auto& c : clips) c.embedding = embed_clip(c, embedder);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  const std::size_t chunk = (clips.size() + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(clips.size(), (w + 1) * chunk); ++i)
          clips[i].embedding = embed_clip(clips[i], embedder);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Toy captioner: background level, the off-background shape and its drift
// between the first and last frame.
inline std::string describe_clip(const world::Video& v) {
  const auto& d = v.dims();
  auto first = v.frame(0);
  std::vector<double> sorted(first.begin(), first.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double bg = sorted[sorted.size() / 2];
  auto centroid = [&](std::size_t f, std::size_t& count, double& level) {
    double r = 0, c = 0;
    count = 0;
    level = 0;
    for (std::size_t i = 0; i < d.height; ++i)
      for (std::size_t j = 0; j < d.width; ++j) {
        const double x = v.at(f, i, j);
        if (std::abs(x - bg) > 0.2) {
          r += static_cast<double>(i);
          c += static_cast<double>(j);
          level += x;
          ++count;
        }
      }
    if (count > 0) {
      r /= static_cast<double>(count);
      c /= static_cast<double>(count);
      level /= static_cast<double>(count);
    }
    return std::pair{r, c};
  };
  std::string s = bg < 0.35 ? "a dim scene" : (bg < 0.65 ? "a grey scene" : "a bright scene");
  std::size_t n0 = 0, n1 = 0;
  double level0 = 0, level1 = 0;
  const auto [r0, c0] = centroid(0, n0, level0);
  const auto [r1, c1] = centroid(d.frames - 1, n1, level1);
  if (n0 == 0) return s + " with nothing in it";
  s += std::string(" with a ") + (level0 > bg ? "light" : "dark") + " shape of " + std::to_string(n0) + " pixels";
  std::string motion;
  if (n1 > 0) {
    const double dr = r1 - r0, dc = c1 - c0;
    if (dr <= -0.5) motion = "upward";
    if (dr >= 0.5) motion = "downward";
    if (dc <= -0.5 || dc >= 0.5) motion += std::string(motion.empty() ? "" : " and ") + (dc < 0 ? "to the left" : "to the right");
  }
  return s + (motion.empty() ? " that stays in place" : " drifting " + motion);
}

// One JSON object per line: {id, frames | frames_path, caption?}. A relative
// frames_path is resolved against the manifest's directory.
inline std::vector<Clip> parse_clip_manifest(const std::string& text, const std::filesystem::path& base_dir = {}) {
  std::vector<Clip> out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "clip manifest line " + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.contains("id") || !j.at("id").is_string()) throw ValidationError(where + ": missing string field 'id'");
      Clip c;
      c.id = j.at("id").get<std::string>();
      if (j.contains("frames")) {
        c.frames = world::video_from_json(j.at("frames"));
      } else if (j.contains("frames_path")) {
        std::filesystem::path p = j.at("frames_path").get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        std::ifstream in(p);
        if (!in) throw ValidationError(where + ": cannot open frames_path " + p.string());
        c.frames = world::video_from_json(nlohmann::json::parse(in));
      } else {
        throw ValidationError(where + ": needs 'frames' or 'frames_path'");
      }
      if (j.contains("caption") && !j.at("caption").is_null()) c.caption = j.at("caption").get<std::string>();
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      throw ValidationError(msg.rfind(where, 0) == 0 ? msg : where + ": " + msg);
    }
  }
  return out;
}

inline std::vector<Clip> load_clip_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open clip manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_clip_manifest(ss.str(), path.parent_path());
}

inline std::string clip_manifest_line(const Clip& c) {
  nlohmann::json j;
  j["id"] = c.id;
  j["frames"] = world::video_to_json(c.frames);
  if (c.caption) j["caption"] = *c.caption;
  return j.dump();
}

}  // namespace revise::curator
