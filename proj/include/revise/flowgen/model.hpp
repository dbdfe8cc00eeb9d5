#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "revise/error.hpp"
#include "revise/flowgen/path.hpp"
#include "revise/microworld/instruction.hpp"
#include "revise/microworld/video.hpp"
#include "revise/numcore/graph.hpp"
#include "revise/numcore/layers.hpp"
#include "revise/numcore/params.hpp"
#include "revise/numcore/rng.hpp"

namespace revise::flow {

using num::Graph;
using num::ParamStore;
using num::Var;

struct FlowConfig {
  world::VideoDims dims;
  std::size_t video_dim = 128;
  std::size_t text_dim = 16;
  std::size_t understanding_dim = 32;
  std::size_t fused_dim = 128;
  std::size_t hidden = 256;
  bool zero_output = false;
  bool zero_fuse = false;
  bool learned_decoder = false;

  std::size_t latent_dim() const { return dims.size(); }

  void validate() const {
    if (video_dim == 0 || text_dim == 0 || understanding_dim == 0 || fused_dim == 0 || hidden == 0) {
      throw ValidationError("flow config: all widths must be positive");
    }
    if (dims.size() == 0) throw ValidationError("flow config: empty video dims");
  }

  bool operator==(const FlowConfig&) const = default;
};

// The generator owns its encoders, the null conditioning vector and the
// optional decoder; everything lives in one parameter store.
struct FlowModel {
  FlowConfig config;
  ParamStore params;
};

namespace detail {

inline void write_config(const FlowConfig& c, ParamStore& s) {
  auto& a = s.attributes();
  a["model"] = "flowgen";
  a["dims"] = world::to_string(c.dims);
  a["video_dim"] = std::to_string(c.video_dim);
  a["text_dim"] = std::to_string(c.text_dim);
  a["understanding_dim"] = std::to_string(c.understanding_dim);
  a["fused_dim"] = std::to_string(c.fused_dim);
  a["hidden"] = std::to_string(c.hidden);
  a["learned_decoder"] = c.learned_decoder ? "1" : "0";
}

inline std::size_t attr_size(const ParamStore& s, const std::string& key) {
  const auto it = s.attributes().find(key);
  if (it == s.attributes().end()) throw ValidationError("checkpoint: missing attribute '" + key + "'");
  return std::stoul(it->second);
}

}  // namespace detail

inline FlowModel init_flow_model(const FlowConfig& config, std::uint64_t seed) {
  config.validate();
  FlowModel m{config, ParamStore(seed)};
  num::Rng rng(num::counter_key(seed, 0x666c6f77ULL));
  auto& s = m.params;
  const std::size_t d = config.latent_dim();
  const std::size_t vocab = world::embedding_vocabulary().size();
  num::add_dense(s, "enc.video", d, config.video_dim, rng);
  s.add_uniform("enc.text", {vocab, config.text_dim}, 1, rng);
  num::add_dense(s, "enc.under", config.video_dim + config.text_dim, config.understanding_dim, rng);
  num::add_dense(s, "enc.fuse", config.video_dim + config.text_dim + config.understanding_dim, config.fused_dim, rng,
                 config.zero_fuse);
  s.add_uniform("enc.null", {1, config.fused_dim}, 1, rng);
  num::add_dense(s, "gen.in", d + kTimeFeatures + config.fused_dim, config.hidden, rng);
  num::add_dense(s, "gen.mid", config.hidden, config.hidden, rng);
  num::add_dense(s, "gen.out", config.hidden, d, rng, config.zero_output);
  // Time-dependent gain on a direct z -> velocity path; starts closed.
  num::add_dense(s, "gen.skip", kTimeFeatures, 1, rng, true);
  if (config.learned_decoder) {
    s.add("dec.weight", num::Tensor::identity(d));
    s.add("dec.bias", num::Tensor(num::Shape{d}));
  }
  detail::write_config(config, s);
  return m;
}

inline FlowModel flow_model_from_checkpoint(ParamStore store) {
  if (store.attributes().count("model") == 0 || store.attributes().at("model") != "flowgen") {
    throw ValidationError("checkpoint is not a generator checkpoint");
  }
  FlowConfig c;
  const std::string dims = store.attributes().at("dims");
  if (std::sscanf(dims.c_str(), "%zux%zux%zu", &c.dims.frames, &c.dims.height, &c.dims.width) != 3) {
    throw ValidationError("checkpoint: bad dims attribute '" + dims + "'");
  }
  c.video_dim = detail::attr_size(store, "video_dim");
  c.text_dim = detail::attr_size(store, "text_dim");
  c.understanding_dim = detail::attr_size(store, "understanding_dim");
  c.fused_dim = detail::attr_size(store, "fused_dim");
  c.hidden = detail::attr_size(store, "hidden");
  c.learned_decoder = detail::attr_size(store, "learned_decoder") != 0;
  if (store.value("gen.out.weight").cols() != c.latent_dim()) {
    throw ShapeError("checkpoint: generator output width does not match dims " + dims);
  }
  return FlowModel{c, std::move(store)};
}

// Rows of the batch matrix are flattened videos.
inline num::Tensor stack_latents(const std::vector<const world::Video*>& videos) {
  if (videos.empty()) throw ShapeError("stack_latents: empty batch");
  const std::size_t d = videos.front()->size();
  num::Tensor out(num::Shape{videos.size(), d});
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i]->size() != d) throw ShapeError("stack_latents: videos of different sizes in one batch");
    std::copy(videos[i]->values().begin(), videos[i]->values().end(), &out[i * d]);
  }
  return out;
}

struct ConditionVars {
  Var v;
  Var t;
  Var u;
  Var fused;
};

inline ConditionVars encode_condition(Graph& g, const FlowModel& m, const num::Tensor& sources,
                                      const std::vector<std::size_t>& embed_index) {
  const auto& s = m.params;
  if (sources.cols() != m.config.latent_dim() || sources.rows() != embed_index.size()) {
    throw ShapeError("encode_condition: sources " + num::shape_string(sources.shape()) + " for " +
                     std::to_string(embed_index.size()) + " instructions and latent width " +
                     std::to_string(m.config.latent_dim()));
  }
  ConditionVars c;
  c.v = num::dense(g, s, "enc.video", g.constant(sources));
  c.t = num::gather_rows(g.param(s, "enc.text"), embed_index);
  c.u = num::dense(g, s, "enc.under", num::concat({c.v, c.t}));
  c.fused = num::dense(g, s, "enc.fuse", num::concat({c.v, c.t, c.u}));
  return c;
}

// Rows flagged in `drop` take the learned null vector instead of c.
inline Var cfg_dropout(Graph& g, const FlowModel& m, Var fused, const std::vector<bool>& drop) {
  const std::size_t b = fused.value().rows(), w = fused.value().cols();
  if (drop.size() != b) throw ShapeError("cfg_dropout: mask length does not match batch");
  bool any = false;
  num::Tensor keep(num::Shape{b, w}, 1.0), take(num::Shape{b, w}, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    if (!drop[i]) continue;
    any = true;
    for (std::size_t j = 0; j < w; ++j) {
      keep[i * w + j] = 0.0;
      take[i * w + j] = 1.0;
    }
  }
  if (!any) return fused;
  Var null = num::repeat_rows(g.param(m.params, "enc.null"), b);
  return num::add(num::mul(g.constant(keep), fused), num::mul(g.constant(take), null));
}

inline std::vector<bool> draw_drop_mask(std::size_t n, double p, num::Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("cfg_dropout: p_drop outside [0,1]");
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.bernoulli(p);
  return out;
}

inline num::Tensor time_feature_matrix(const std::vector<double>& times) {
  num::Tensor out(num::Shape{times.size(), kTimeFeatures});
  for (std::size_t i = 0; i < times.size(); ++i) {
    require_time("predict_velocity", times[i]);
    const auto f = time_features(times[i]);
    std::copy(f.begin(), f.end(), &out[i * kTimeFeatures]);
  }
  return out;
}

// v = G([z | time features | c]) + gain(t) * z.
inline Var predict_velocity(Graph& g, const FlowModel& m, Var z, const std::vector<double>& times, Var c) {
  const auto& s = m.params;
  const std::size_t b = z.value().rows();
  if (z.value().cols() != m.config.latent_dim() || times.size() != b || c.value().rows() != b ||
      c.value().cols() != m.config.fused_dim) {
    throw ShapeError("predict_velocity: z " + num::shape_string(z.value().shape()) + ", c " +
                     num::shape_string(c.value().shape()) + ", " + std::to_string(times.size()) + " times");
  }
  Var tf = g.constant(time_feature_matrix(times));
  Var h = num::tanh(num::dense(g, s, "gen.in", num::concat({z, tf, c})));
  h = num::tanh(num::dense(g, s, "gen.mid", h));
  Var gain = num::dense(g, s, "gen.skip", tf);
  return num::add(num::dense(g, s, "gen.out", h), num::scale_rows(z, gain));
}

// x_hat0 = z - t v with a per-row t.
inline Var estimate_clean(Graph& g, Var z, const std::vector<double>& times, Var v) {
  num::Tensor t(num::Shape{times.size(), 1});
  for (std::size_t i = 0; i < times.size(); ++i) t[i] = times[i];
  return num::sub(z, num::scale_rows(v, g.constant(std::move(t))));
}

// Latent -> pixels: identity (or the learned linear map), then clamp to [0,1].
inline Var decode(Graph& g, const FlowModel& m, Var x) {
  if (x.value().cols() != m.config.latent_dim()) {
    throw ShapeError("decode: latent width " + std::to_string(x.value().cols()) + " vs video size " +
                     std::to_string(m.config.latent_dim()));
  }
  if (m.config.learned_decoder) x = num::dense(g, m.params, "dec", x);
  return num::clamp(x, 0.0, 1.0);
}

// Single-sample conveniences over the batched graph code.

struct ConditionSignal {
  num::Tensor v;
  num::Tensor t;
  num::Tensor u;
  num::Tensor fused;
};

inline ConditionSignal encode_condition(const FlowModel& m, const world::Video& source,
                                        const world::EditInstruction& ins) {
  Graph g;
  const auto c = encode_condition(g, m, stack_latents({&source}), {world::embedding_index(ins)});
  return {c.v.value(), c.t.value(), c.u.value(), c.fused.value()};
}

inline ConditionSignal cfg_dropout(const FlowModel& m, const ConditionSignal& c, double p_drop, num::Rng& rng) {
  ConditionSignal out = c;
  if (draw_drop_mask(1, p_drop, rng)[0]) out.fused = m.params.value("enc.null");
  return out;
}

inline num::Tensor predict_velocity(const FlowModel& m, const num::Tensor& z, double t, const num::Tensor& fused) {
  Graph g;
  const std::size_t d = m.config.latent_dim();
  if (z.size() != d) throw ShapeError("predict_velocity: latent " + num::shape_string(z.shape()));
  Var out = predict_velocity(g, m, g.constant(z.reshaped({1, d})), {t},
                             g.constant(fused.reshaped({1, fused.size()})));
  return out.value().reshaped(z.shape());
}

inline world::Video decode(const FlowModel& m, const num::Tensor& latent) {
  Graph g;
  const std::size_t d = m.config.latent_dim();
  if (latent.size() != d) {
    throw ShapeError("decode: latent " + num::shape_string(latent.shape()) + " vs video " +
                     world::to_string(m.config.dims));
  }
  Var out = decode(g, m, g.constant(latent.reshaped({1, d})));
  return world::Video(m.config.dims, out.value().values());
}

}  // namespace revise::flow
