#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "revise/flowgen/model.hpp"
#include "revise/flowgen/sampler.hpp"
#include "revise/microworld/dataset.hpp"
#include "revise/microworld/oracle.hpp"
#include "revise/numcore/optimizer.hpp"
#include "revise/objectives/losses.hpp"
#include "revise/reflector/critic.hpp"

namespace revise::obj {

using num::Graph;
using num::Tensor;
using num::Var;

struct TrainConfig {
  Objective objective = Objective::sft;
  double lambda = 0.75;
  double lambda_c = 0.2;
  num::OptimizerConfig optimizer;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double cfg_drop = 0.2;
  std::size_t frame_k = 2;
  std::size_t val_samples = 64;
  std::size_t val_steps = 16;
  bool record_wall_clock = true;
  std::string critic_checkpoint;
  // Generator the run started from; empty for a fresh initialization.
  std::string base_checkpoint;

  void validate() const {
    if (!(lambda >= 0)) throw ValidationError("train config: lambda must be >= 0");
    if (!(lambda_c >= 0)) throw ValidationError("train config: lambda_c must be >= 0");
    if (!(cfg_drop >= 0 && cfg_drop <= 1)) throw ValidationError("train config: cfg_drop outside [0,1]");
    if (batch_size == 0) throw ValidationError("train config: batch_size must be positive");
    if (val_steps == 0) throw ValidationError("train config: val_steps must be positive");
    optimizer.validate();
  }
};

struct LossBreakdown {
  double l_fm = 0.0;
  double l_reason = 0.0;
  double p_yes = 0.0;  // batch mean
  double l_total = 0.0;
  std::vector<double> sqerr;
  std::vector<double> p_yes_per_sample;
  std::vector<double> w;
};

// Per-sample noise for one step, keyed by (seed, epoch, step, sample) so runs
// that differ only in objective see identical t, eps and dropout draws.
struct StepNoise {
  std::vector<double> t;
  std::vector<bool> drop;
  Tensor eps;
};

inline StepNoise draw_step_noise(std::uint64_t seed, std::size_t epoch, std::size_t step, std::size_t batch,
                                 std::size_t d, double p_drop) {
  StepNoise n{std::vector<double>(batch), std::vector<bool>(batch), Tensor(num::Shape{batch, d})};
  for (std::size_t i = 0; i < batch; ++i) {
    num::Rng rng(num::counter_key(seed, 0x73746570ULL, epoch, step, i));
    n.t[i] = rng.uniform();
    n.drop[i] = rng.bernoulli(p_drop);
    for (std::size_t j = 0; j < d; ++j) n.eps[i * d + j] = rng.normal();
  }
  return n;
}

struct FmTerms {
  Tensor z;
  Var v;
  Var sqerr;  // [B x 1]
  Var l_fm;
};

// Flow-matching part of the step: noisy latents, velocity prediction and the
// per-sample squared error against eps - x0.
inline FmTerms fm_terms(Graph& g, const flow::FlowModel& m, const std::vector<const world::Triplet*>& batch,
                        const StepNoise& noise) {
  const std::size_t b = batch.size(), d = m.config.latent_dim();
  if (noise.t.size() != b || noise.eps.rows() != b || noise.eps.cols() != d) {
    throw ShapeError("train: step noise does not match the batch");
  }
  std::vector<const world::Video*> sources, targets;
  std::vector<std::size_t> embed;
  for (const auto* t : batch) {
    sources.push_back(&t->source);
    targets.push_back(&t->target);
    embed.push_back(world::embedding_index(t->instruction));
  }
  const Tensor x0 = flow::stack_latents(targets);
  FmTerms f{Tensor(num::Shape{b, d}), {}, {}, {}};
  Tensor vt(num::Shape{b, d});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double e = noise.eps[i * d + j], x = x0[i * d + j], t = noise.t[i];
      f.z[i * d + j] = (1.0 - t) * x + t * e;
      vt[i * d + j] = e - x;
    }
  const auto cond = flow::encode_condition(g, m, flow::stack_latents(sources), embed);
  Var fused = flow::cfg_dropout(g, m, cond.fused, noise.drop);
  f.v = flow::predict_velocity(g, m, g.constant(f.z), noise.t, fused);
  Var diff = num::sub(f.v, g.constant(vt));
  f.sqerr = num::row_mean(num::mul(diff, diff));
  f.l_fm = num::mean(f.sqerr);
  return f;
}

// Builds the objective graph for one batch and returns the scalar to minimise.
// Shared by train_step and the gradient tests.
inline Var objective_graph(Graph& g, const flow::FlowModel& m, const critic::CriticModel* critic,
                           const std::vector<const world::Triplet*>& batch, const StepNoise& noise,
                           const TrainConfig& cfg, LossBreakdown& out) {
  if (cfg.objective != Objective::sft && critic == nullptr) {
    throw ValidationError("train: objective " + to_string(cfg.objective) + " needs a critic checkpoint");
  }
  const std::size_t b = batch.size();
  std::vector<const world::Video*> sources;
  std::vector<world::EditInstruction> instructions;
  for (const auto* t : batch) {
    sources.push_back(&t->source);
    instructions.push_back(t->instruction);
  }
  const FmTerms fm = fm_terms(g, m, batch, noise);
  const Tensor& z = fm.z;
  Var v = fm.v, sq = fm.sqerr, l_fm = fm.l_fm;
  out.l_fm = l_fm.value().item();
  out.sqerr.assign(sq.value().values().begin(), sq.value().values().end());
  out.p_yes = 0.0;
  out.l_reason = 0.0;
  out.p_yes_per_sample.clear();
  out.w.clear();

  if (cfg.objective == Objective::sft) {
    out.l_total = out.l_fm;
    return l_fm;
  }

  if (critic->config.k != cfg.frame_k || !(critic->config.dims == m.config.dims)) {
    throw ValidationError("train: critic frame count or video dims do not match the generator");
  }
  const auto cols = critic::frame_columns(m.config.dims, cfg.frame_k);
  const Tensor src_frames = critic::frames_matrix(sources, cfg.frame_k);
  const std::vector<critic::Answer> yes(b, critic::Answer::yes);

  auto collect = [&](const Tensor& logits) {
    out.p_yes_per_sample.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
      const critic::Logits l{logits[2 * i], logits[2 * i + 1]};
      out.p_yes_per_sample[i] = critic::p_yes(l);
      out.l_reason += critic::reason_loss(l, critic::Answer::yes) / static_cast<double>(b);
      out.p_yes += out.p_yes_per_sample[i] / static_cast<double>(b);
    }
  };

  if (cfg.objective == Objective::uso) {
    Var xhat = flow::estimate_clean(g, g.constant(z), noise.t, v);
    Var frames = num::gather_cols(flow::decode(g, m, xhat), cols);
    Var logits = critic::critic_logits(g, *critic, g.constant(src_frames), frames, instructions, true);
    Var l_reason = critic::reason_loss(logits, yes);
    collect(logits.value());
    Var total = num::add(l_fm, num::scale(l_reason, cfg.lambda));
    out.l_total = total.value().item();
    return total;
  }

  // RWO: the critic sees the clean estimate as plain values.
  Graph side;
  Var xhat = flow::estimate_clean(side, side.constant(z), noise.t, side.constant(v.value()));
  Var frames = num::gather_cols(flow::decode(side, m, xhat), cols);
  Var logits = critic::critic_logits(side, *critic, side.constant(src_frames), frames, instructions, true);
  collect(logits.value());
  Tensor w(num::Shape{b, 1});
  out.w.resize(b);
  for (std::size_t i = 0; i < b; ++i) w[i] = out.w[i] = 1.0 - out.p_yes_per_sample[i];
  Var total = num::add(num::mean(num::mul(g.constant(std::move(w)), sq)), num::scale(l_fm, cfg.lambda_c));
  out.l_total = total.value().item();
  return total;
}

inline LossBreakdown train_step(flow::FlowModel& m, const critic::CriticModel* critic,
                                const std::vector<const world::Triplet*>& batch, const TrainConfig& cfg,
                                std::size_t epoch, std::size_t step) {
  const StepNoise noise = draw_step_noise(cfg.seed, epoch, step, batch.size(), m.config.latent_dim(), cfg.cfg_drop);
  LossBreakdown out;
  Graph g;
  Var total = objective_graph(g, m, critic, batch, noise, cfg, out);
  num::optimizer_step(m.params, g.backward(total), cfg.optimizer);
  return out;
}

struct StepRecord {
  std::size_t step = 0;
  double l_fm = 0.0;
  double l_reason = 0.0;
  double p_yes_mean = 0.0;
  double l_total = 0.0;
  double seconds = 0.0;
};

struct ValidationRecord {
  std::size_t epoch = 0;
  world::OracleScores mean;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<ValidationRecord> validation;

  std::string steps_csv() const {
    std::ostringstream os;
    os << "step,l_fm,l_reason,p_yes_mean,l_total,seconds\n";
    char buf[256];
    for (const auto& r : steps) {
      std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.3f\n", r.step, r.l_fm, r.l_reason, r.p_yes_mean,
                    r.l_total, r.seconds);
      os << buf;
    }
    return os.str();
  }

  std::string validation_csv() const {
    std::ostringstream os;
    os << "epoch,ea,pc,gn,gr\n";
    char buf[160];
    for (const auto& r : validation) {
      std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.mean.ea, r.mean.pc, r.mean.gn, r.mean.gr);
      os << buf;
    }
    return os.str();
  }
};

// Mean oracle scores of sampled edits on held-out triplets.
inline world::OracleScores validate_generator(const flow::FlowModel& m, const std::vector<const world::Triplet*>& val,
                                              std::size_t steps, std::uint64_t seed) {
  world::OracleScores mean;
  if (val.empty()) return mean;
  std::vector<const world::Video*> sources;
  std::vector<world::EditInstruction> ins;
  std::vector<std::uint64_t> seeds;
  for (const auto* t : val) {
    sources.push_back(&t->source);
    ins.push_back(t->instruction);
    seeds.push_back(flow::sample_seed(seed, t->id));
  }
  const auto edited = flow::sample_batch(m, sources, ins, steps, seeds);
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto s = world::score_against(val[i]->source, edited[i], val[i]->target,
                                        world::mask_between(val[i]->source, val[i]->target));
    mean.ea += s.ea;
    mean.pc += s.pc;
    mean.gn += s.gn;
    mean.gr += s.gr;
  }
  const double n = static_cast<double>(val.size());
  mean.ea /= n;
  mean.pc /= n;
  mean.gn /= n;
  mean.gr /= n;
  return mean;
}

struct TrainResult {
  flow::FlowModel model;
  TrainLog log;
};

inline TrainResult train(const TrainConfig& cfg, flow::FlowModel model, const critic::CriticModel* critic,
                         const std::vector<world::Triplet>& train_set, const std::vector<world::Triplet>& val_set,
                         const std::function<void(std::size_t epoch, const TrainResult&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("train: empty training set");
  if (cfg.objective != Objective::sft && critic == nullptr) {
    throw ValidationError("train: objective " + to_string(cfg.objective) + " needs a critic checkpoint");
  }
  TrainResult r{std::move(model), {}};
  std::vector<const world::Triplet*> val;
  for (std::size_t i = 0; i < std::min(cfg.val_samples, val_set.size()); ++i) val.push_back(&val_set[i]);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto start = std::chrono::steady_clock::now();
  std::size_t global = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    num::Rng rng(num::counter_key(cfg.seed, 0x73687566ULL, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::size_t step = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size, ++step, ++global) {
      std::vector<const world::Triplet*> batch;
      for (std::size_t i = lo; i < std::min(order.size(), lo + cfg.batch_size); ++i) batch.push_back(&train_set[order[i]]);
      const LossBreakdown lb = train_step(r.model, critic, batch, cfg, epoch, step);
      StepRecord rec{global, lb.l_fm, lb.l_reason, lb.p_yes, lb.l_total, 0.0};
      if (cfg.record_wall_clock) {
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      r.log.steps.push_back(rec);
    }
    if (!val.empty()) r.log.validation.push_back({epoch, validate_generator(r.model, val, cfg.val_steps, cfg.seed)});
    if (on_epoch) on_epoch(epoch, r);
  }
  return r;
}

inline nlohmann::json run_metadata(const TrainConfig& cfg, const std::string& checkpoint) {
  nlohmann::json j;
  j["objective"] = to_string(cfg.objective);
  j["lambda"] = cfg.lambda;
  j["lambda_c"] = cfg.lambda_c;
  j["optimizer"] = {{"kind", num::to_string(cfg.optimizer.kind)},
                    {"learning_rate", cfg.optimizer.learning_rate},
                    {"weight_decay", cfg.optimizer.weight_decay},
                    {"beta1", cfg.optimizer.beta1},
                    {"beta2", cfg.optimizer.beta2},
                    {"epsilon", cfg.optimizer.epsilon},
                    {"warmup_steps", cfg.optimizer.warmup_steps}};
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["cfg_drop"] = cfg.cfg_drop;
  j["frame_k"] = cfg.frame_k;
  j["val_samples"] = cfg.val_samples;
  j["val_steps"] = cfg.val_steps;
  j["stop_gradient_policy"] = stop_gradient_policy(cfg.objective);
  j["template_versions"] = {{"instruction", world::kTemplateVersion}};
  j["checkpoints"] = {{"critic", cfg.critic_checkpoint}, {"base", cfg.base_checkpoint}, {"generator", checkpoint}};
  return j;
}

}  // namespace revise::obj
