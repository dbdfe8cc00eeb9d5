#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "revise/error.hpp"
#include "revise/microworld/instruction.hpp"
#include "revise/microworld/oracle.hpp"
#include "revise/microworld/video.hpp"
#include "revise/numcore/graph.hpp"
#include "revise/numcore/layers.hpp"
#include "revise/numcore/params.hpp"

namespace revise::critic {

using num::Graph;
using num::ParamStore;
using num::Tensor;
using num::Var;

// Indices round(i (F-1) / (k-1)) with halves rounded up; k = 1 picks frame 0.
inline std::vector<std::size_t> frame_indices(std::size_t frames, std::size_t k) {
  if (k < 1 || k > frames) {
    throw ValidationError("select_frames: k = " + std::to_string(k) + " outside [1, " + std::to_string(frames) + "]");
  }
  std::vector<std::size_t> out(k, 0);
  for (std::size_t i = 1; i < k; ++i) out[i] = (2 * i * (frames - 1) + (k - 1)) / (2 * (k - 1));
  return out;
}

inline std::vector<std::vector<double>> select_frames(const world::Video& v, std::size_t k) {
  std::vector<std::vector<double>> out;
  for (std::size_t f : frame_indices(v.dims().frames, k)) out.emplace_back(v.frame(f).begin(), v.frame(f).end());
  return out;
}

// Latent columns covering the selected frames, in frame order.
inline std::vector<std::size_t> frame_columns(const world::VideoDims& dims, std::size_t k) {
  std::vector<std::size_t> cols;
  for (std::size_t f : frame_indices(dims.frames, k))
    for (std::size_t j = 0; j < dims.frame_size(); ++j) cols.push_back(f * dims.frame_size() + j);
  return cols;
}

struct CriticConfig {
  world::VideoDims dims;
  std::size_t k = 2;
  std::size_t hidden = 64;
  std::size_t patch_radius = 3;
  bool zero_head = false;

  std::size_t frame_width() const { return k * dims.frame_size(); }
  std::size_t patch_size() const { return (2 * patch_radius + 1) * (2 * patch_radius + 1); }
  // patch | row | column | (row, col, frame) position | frame min, mean | instruction
  std::size_t context_width() const {
    return patch_size() + dims.width + dims.height + 3 + 2 + world::kInstructionFeatureSize;
  }
  // Values a pixel of the expected frame can be read from: the source patch,
  // its row and column, the frame minimum, and the constants 0 and 1.
  std::size_t candidates() const { return patch_size() + dims.width + dims.height + 3; }
  std::size_t head_inputs() const { return 4 * k; }
  bool operator==(const CriticConfig&) const = default;
};

struct CriticModel {
  CriticConfig config;
  ParamStore params;
};

inline constexpr double kDistanceFloor = 1e-3;
inline constexpr double kCenterPrior = 4.0;
inline constexpr std::size_t kMixWidth = 16;

inline CriticModel init_critic(const CriticConfig& config, std::uint64_t seed) {
  frame_indices(config.dims.frames, config.k);
  if (config.hidden == 0) throw ValidationError("critic config: hidden width must be positive");
  CriticModel c{config, ParamStore(seed)};
  num::Rng rng(num::counter_key(seed, 0x63726974ULL));
  auto& s = c.params;
  const std::size_t keys = world::embedding_vocabulary().size() * config.k, n = config.candidates();
  s.add("critic.table", Tensor(num::Shape{keys, n}));
  s.add("critic.gain", Tensor(num::Shape{keys, n}));
  num::add_dense(s, "critic.enc", config.context_width(), config.hidden, rng);
  num::add_dense(s, "critic.att", config.hidden, n, rng, true);
  num::add_dense(s, "critic.head", config.head_inputs(), 2, rng, config.zero_head);
  num::add_dense(s, "critic.mix", config.head_inputs(), kMixWidth, rng);
  num::add_dense(s, "critic.mix_out", kMixWidth, 2, rng, true);
  if (!config.zero_head) {
    // Start as "yes when the frames are close to the expectation".
    Tensor& w = s.param("critic.head.weight").value;
    for (std::size_t f = 0; f < config.k; ++f) {
      w.at(4 * f + 1, 0) += -1.0;
      w.at(4 * f + 1, 1) += 1.0;
    }
    Tensor& b = s.param("critic.head.bias").value;
    b[0] += -static_cast<double>(config.k) * 4.0;
  }
  auto& a = s.attributes();
  a["model"] = "critic";
  a["dims"] = world::to_string(config.dims);
  a["k"] = std::to_string(config.k);
  a["hidden"] = std::to_string(config.hidden);
  a["patch_radius"] = std::to_string(config.patch_radius);
  return c;
}

inline CriticModel critic_from_checkpoint(ParamStore store) {
  const auto& a = store.attributes();
  if (a.count("model") == 0 || a.at("model") != "critic") throw ValidationError("checkpoint is not a critic checkpoint");
  CriticConfig c;
  if (std::sscanf(a.at("dims").c_str(), "%zux%zux%zu", &c.dims.frames, &c.dims.height, &c.dims.width) != 3) {
    throw ValidationError("critic checkpoint: bad dims attribute");
  }
  c.k = std::stoul(a.at("k"));
  c.hidden = std::stoul(a.at("hidden"));
  c.patch_radius = std::stoul(a.at("patch_radius"));
  if (store.value("critic.att.weight").cols() != c.candidates()) {
    throw ShapeError("critic checkpoint: candidate count does not match dims " + a.at("dims"));
  }
  return CriticModel{c, std::move(store)};
}

inline Tensor feature_matrix(const std::vector<world::EditInstruction>& instructions) {
  Tensor out(num::Shape{instructions.size(), world::kInstructionFeatureSize});
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    const auto f = world::instruction_features(instructions[i]);
    std::copy(f.begin(), f.end(), &out[i * world::kInstructionFeatureSize]);
  }
  return out;
}

// One row per (sample, selected frame, pixel): what the source looks like
// around that pixel, where it is, and what was asked. Positions outside the
// frame read as the frame minimum.
inline Tensor pixel_context(const CriticConfig& cfg, const Tensor& source_frames, const Tensor& features) {
  const std::size_t b = source_frames.rows(), h = cfg.dims.height, w = cfg.dims.width, fs = cfg.dims.frame_size();
  const std::size_t width = cfg.context_width();
  const int rad = static_cast<int>(cfg.patch_radius);
  const auto frames = frame_indices(cfg.dims.frames, cfg.k);
  const double tscale = cfg.dims.frames > 1 ? 1.0 / static_cast<double>(cfg.dims.frames - 1) : 0.0;
  Tensor out(num::Shape{b * cfg.k * fs, width});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t f = 0; f < cfg.k; ++f) {
      const double* px = &source_frames[i * cfg.frame_width() + f * fs];
      double lo = px[0], mean = 0.0;
      for (std::size_t j = 0; j < fs; ++j) {
        lo = std::min(lo, px[j]);
        mean += px[j];
      }
      mean /= static_cast<double>(fs);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          double* row = &out[((i * cfg.k + f) * fs + r * w + c) * width];
          std::size_t o = 0;
          for (int dr = -rad; dr <= rad; ++dr)
            for (int dc = -rad; dc <= rad; ++dc) {
              const int rr = static_cast<int>(r) + dr, cc = static_cast<int>(c) + dc;
              const bool inside = rr >= 0 && cc >= 0 && rr < static_cast<int>(h) && cc < static_cast<int>(w);
              row[o++] = inside ? px[rr * w + cc] : lo;
            }
          for (std::size_t cc = 0; cc < w; ++cc) row[o++] = px[r * w + cc];
          for (std::size_t rr = 0; rr < h; ++rr) row[o++] = px[rr * w + c];
          row[o++] = h > 1 ? static_cast<double>(r) / static_cast<double>(h - 1) : 0.0;
          row[o++] = w > 1 ? static_cast<double>(c) / static_cast<double>(w - 1) : 0.0;
          row[o++] = static_cast<double>(frames[f]) * tscale;
          row[o++] = lo;
          row[o++] = mean;
          for (std::size_t j = 0; j < world::kInstructionFeatureSize; ++j) row[o++] = features.at(i, j);
        }
    }
  return out;
}

inline Tensor candidate_values(const CriticConfig& cfg, const Tensor& context) {
  const std::size_t rows = context.rows(), w = context.cols(), n = cfg.candidates();
  const std::size_t direct = cfg.patch_size() + cfg.dims.width + cfg.dims.height;
  Tensor out(num::Shape{rows, n});
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy(&context[i * w], &context[i * w] + direct, &out[i * n]);
    out[i * n + direct] = context[i * w + direct + 3];
    out[i * n + direct + 1] = 0.0;
    out[i * n + direct + 2] = 1.0;
  }
  return out;
}

// Row keys into the per-(instruction, frame) tables, one per context row.
inline std::vector<std::size_t> table_keys(const CriticConfig& cfg, const std::vector<std::size_t>& embed) {
  std::vector<std::size_t> keys;
  keys.reserve(embed.size() * cfg.frame_width());
  for (std::size_t e : embed)
    for (std::size_t f = 0; f < cfg.k; ++f)
      for (std::size_t p = 0; p < cfg.dims.frame_size(); ++p) keys.push_back(e * cfg.k + f);
  return keys;
}

// Expected edited frames [B x k*HW]. Each pixel is a softmax-weighted read of
// candidate source values; the weights come from a centre prior, a table keyed
// by instruction and frame, a content gain, and a small network over the
// pixel context. Depends on the source and instruction only.
inline Var expected_frames(Graph& g, const CriticModel& c, const Tensor& source_frames, const Tensor& features,
                           const std::vector<std::size_t>& embed, bool frozen) {
  const auto& cfg = c.config;
  const auto& s = c.params;
  const std::size_t b = source_frames.rows(), n = cfg.candidates();
  const Tensor ctx = pixel_context(cfg, source_frames, features);
  Tensor values = candidate_values(cfg, ctx);
  Tensor prior(num::Shape{ctx.rows(), n});
  for (std::size_t i = 0; i < ctx.rows(); ++i) prior[i * n + cfg.patch_size() / 2] = kCenterPrior;
  const auto keys = table_keys(cfg, embed);
  auto table = [&](const std::string& name) { return frozen ? g.frozen(s, name) : g.param(s, name); };
  Var v = g.constant(std::move(values));
  Var logits = num::add(g.constant(std::move(prior)), num::gather_rows(table("critic.table"), keys));
  logits = num::add(logits, num::mul(num::gather_rows(table("critic.gain"), keys), v));
  Var h = num::tanh(num::dense(g, s, "critic.enc", g.constant(ctx), frozen));
  logits = num::add(logits, num::dense(g, s, "critic.att", h, frozen));
  return num::reshape(num::row_sum(num::mul(num::softmax_rows(logits), v)), {b, cfg.frame_width()});
}

// Per frame: msd(edited, expected), its log, log msd(expected, source) and
// log msd(edited, source).
inline Var head_features(Graph& g, const CriticConfig& cfg, Var source_frames, Var edited_frames, Var expected) {
  const std::size_t fs = cfg.dims.frame_size();
  Var floor = g.constant(Tensor::scalar(kDistanceFloor));
  Var diff = num::sub(edited_frames, expected);
  Var change = num::sub(expected, source_frames);
  Var moved = num::sub(edited_frames, source_frames);
  std::vector<Var> q;
  for (std::size_t f = 0; f < cfg.k; ++f) {
    std::vector<std::size_t> cols(fs);
    for (std::size_t j = 0; j < fs; ++j) cols[j] = f * fs + j;
    Var d = num::gather_cols(diff, cols);
    Var msd = num::row_mean(num::mul(d, d));
    Var e = num::gather_cols(change, cols);
    q.push_back(msd);
    q.push_back(num::log(num::add(msd, floor)));
    Var m = num::gather_cols(moved, cols);
    q.push_back(num::log(num::add(num::row_mean(num::mul(e, e)), floor)));
    q.push_back(num::log(num::add(num::row_mean(num::mul(m, m)), floor)));
  }
  return num::concat(q);
}

inline std::vector<std::size_t> embed_indices(const std::vector<world::EditInstruction>& instructions) {
  std::vector<std::size_t> out;
  for (const auto& ins : instructions) out.push_back(world::embedding_index(ins));
  return out;
}

// Logits [B x 2] = (l_yes, l_no) from how far the shown frames are from what
// the instruction should have produced. Gradients reach the edited frames
// (and the critic parameters unless frozen); the source enters as a constant.
inline Var critic_logits(Graph& g, const CriticModel& c, Var source_frames, Var edited_frames,
                         const std::vector<world::EditInstruction>& instructions, bool frozen,
                         Var* expected_out = nullptr) {
  const std::size_t w = c.config.frame_width(), b = source_frames.value().rows();
  if (source_frames.value().cols() != w || edited_frames.value().cols() != w || edited_frames.value().rows() != b ||
      instructions.size() != b) {
    throw ShapeError("critic_forward: source " + num::shape_string(source_frames.value().shape()) + ", edited " +
                     num::shape_string(edited_frames.value().shape()) + ", " + std::to_string(instructions.size()) +
                     " instructions for k = " + std::to_string(c.config.k));
  }
  Var expected = expected_frames(g, c, source_frames.value(), feature_matrix(instructions), embed_indices(instructions),
                                 frozen);
  if (expected_out != nullptr) *expected_out = expected;
  Var q = head_features(g, c.config, source_frames, edited_frames, expected);
  Var mix = num::tanh(num::dense(g, c.params, "critic.mix", q, frozen));
  return num::add(num::dense(g, c.params, "critic.head", q, frozen), num::dense(g, c.params, "critic.mix_out", mix, frozen));
}

inline Tensor frames_matrix(const std::vector<const world::Video*>& videos, std::size_t k) {
  if (videos.empty()) throw ShapeError("critic: empty batch");
  const auto cols = frame_columns(videos.front()->dims(), k);
  Tensor out(num::Shape{videos.size(), cols.size()});
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (!(videos[i]->dims() == videos.front()->dims())) throw ShapeError("critic: mixed video dims in one batch");
    for (std::size_t j = 0; j < cols.size(); ++j) out[i * cols.size() + j] = videos[i]->values()[cols[j]];
  }
  return out;
}

struct Logits {
  double yes = 0.0;
  double no = 0.0;
};

inline double p_yes(const Logits& l) { return num::detail::stable_sigmoid(l.yes - l.no); }

enum class Answer { yes, no };

inline std::string to_string(Answer a) { return a == Answer::yes ? "yes" : "no"; }

inline Answer parse_answer(const std::string& s) {
  if (s == "yes") return Answer::yes;
  if (s == "no") return Answer::no;
  throw ValidationError("answer must be yes or no, got '" + s + "'");
}

struct Verdict {
  std::string id;
  double p_yes = 0.5;
  Answer answer = Answer::yes;
  Logits logits;
  std::vector<double> rationale;
};

inline Verdict make_verdict(std::string id, const Logits& l) {
  const double p = p_yes(l);
  return Verdict{std::move(id), p, p >= 0.5 ? Answer::yes : Answer::no, l, {}};
}

// -log sigma(l_correct - l_opposite) = softplus(-margin).
inline double reason_loss(const Logits& l, Answer correct) {
  const double margin = correct == Answer::yes ? l.yes - l.no : l.no - l.yes;
  return num::detail::stable_softplus(-margin);
}

// Batched form over logits [B x 2]: mean of softplus(-margin).
inline Var reason_loss(Var logits, const std::vector<Answer>& correct) {
  const std::size_t b = logits.value().rows();
  if (logits.value().cols() != 2 || correct.size() != b) {
    throw ShapeError("reason_loss: logits " + num::shape_string(logits.value().shape()) + " for " +
                     std::to_string(correct.size()) + " answers");
  }
  Graph& g = *logits.graph;
  Tensor sign(num::Shape{b, 1});
  for (std::size_t i = 0; i < b; ++i) sign[i] = correct[i] == Answer::yes ? 1.0 : -1.0;
  Var margin = num::sub(num::gather_cols(logits, {0}), num::gather_cols(logits, {1}));
  return num::mean(num::softplus(num::neg(num::mul(g.constant(std::move(sign)), margin))));
}

inline std::vector<Logits> critic_forward(const CriticModel& c, const std::vector<const world::Video*>& sources,
                                          const std::vector<const world::Video*>& edited,
                                          const std::vector<world::EditInstruction>& instructions) {
  if (sources.size() != edited.size() || sources.size() != instructions.size()) {
    throw ShapeError("critic_forward: batch lengths differ");
  }
  Graph g;
  Var l = critic_logits(g, c, g.constant(frames_matrix(sources, c.config.k)),
                        g.constant(frames_matrix(edited, c.config.k)), instructions, true);
  std::vector<Logits> out(sources.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {l.value()[2 * i], l.value()[2 * i + 1]};
  return out;
}

inline Logits critic_forward(const CriticModel& c, const world::Video& source, const world::Video& edited,
                             const world::EditInstruction& ins) {
  return critic_forward(c, {&source}, {&edited}, {ins}).front();
}

struct Thresholds {
  double ea = 7.0;
  double pc = 7.0;
  double gn = 7.0;
  double gr = 7.0;

  void validate() const {
    for (double t : {ea, pc, gn, gr})
      if (!(t >= 0.0 && t <= 10.0)) throw ValidationError("oracle thresholds must lie in [0,10]");
  }
};

inline Answer oracle_answer(const world::OracleScores& s, const Thresholds& th = {}) {
  th.validate();
  return s.ea >= th.ea && s.pc >= th.pc && s.gn >= th.gn && s.gr >= th.gr ? Answer::yes : Answer::no;
}

}  // namespace revise::critic
