#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "revise/microworld/dataset.hpp"
#include "revise/microworld/edit.hpp"
#include "revise/microworld/oracle.hpp"
#include "revise/numcore/optimizer.hpp"
#include "revise/reflector/critic.hpp"

namespace revise::critic {

enum class ExampleKind { target, wrong_operator, noisy_target, unedited, blend, pure_noise };

inline std::string to_string(ExampleKind k) {
  switch (k) {
    case ExampleKind::target: return "target";
    case ExampleKind::wrong_operator: return "wrong_operator";
    case ExampleKind::noisy_target: return "noisy_target";
    case ExampleKind::unedited: return "unedited";
    case ExampleKind::blend: return "blend";
    case ExampleKind::pure_noise: return "pure_noise";
  }
  return "?";
}

struct CriticExample {
  std::string id;
  world::Video source;
  world::Video edited;
  world::EditInstruction instruction;
  world::Video target;
  ExampleKind kind = ExampleKind::target;
  Answer label = Answer::yes;
};

inline Answer label_with_oracle(const CriticExample& e, const Thresholds& th) {
  return oracle_answer(world::oracle_judge(e.source, e.edited, e.instruction), th);
}

namespace detail {

inline world::Video add_noise(const world::Video& v, double amplitude, num::Rng& rng) {
  world::Video out = v;
  for (double& x : out.values()) x = std::clamp(x + rng.uniform(-amplitude, amplitude), 0.0, 1.0);
  return out;
}

inline world::Video blend(const world::Video& a, const world::Video& b, double alpha) {
  world::Video out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = (1.0 - alpha) * a.values()[i] + alpha * b.values()[i];
  return out;
}

inline world::EditInstruction other_instruction(const world::EditInstruction& ins, num::Rng& rng) {
  for (;;) {
    const auto op = world::kOperators[rng.below(world::kOperators.size())];
    if (op == ins.op) continue;
    const auto catalog = world::parameter_catalog(op);
    return world::make_instruction(op, catalog[rng.below(catalog.size())]);
  }
}

}  // namespace detail

// Each base triplet yields its oracle target plus one corruption, cycling
// through wrong-operator, noisy, unedited and partially edited variants.
// Every label comes from the oracle rubric, never from the construction.
inline std::vector<CriticExample> build_critic_dataset(std::size_t n_triplets, std::uint64_t seed,
                                                       const Thresholds& th = {}, const world::VideoDims& dims = {}) {
  std::vector<CriticExample> out;
  out.reserve(2 * n_triplets);
  for (std::size_t i = 0; i < n_triplets; ++i) {
    const world::Triplet t = world::make_triplet(seed, i, world::Subset::editing, dims);
    num::Rng rng(num::counter_key(seed, 0x6e656761ULL, i));
    CriticExample pos{t.id + "-pos", t.source, t.target, t.instruction, t.target, ExampleKind::target, Answer::yes};
    CriticExample neg{t.id + "-neg", t.source, t.target, t.instruction, t.target, ExampleKind::target, Answer::no};
    switch (rng.below(4)) {
      case 0:
        neg.kind = ExampleKind::wrong_operator;
        neg.edited = world::apply_oracle_edit(t.source, detail::other_instruction(t.instruction, rng));
        break;
      case 1:
        neg.kind = ExampleKind::noisy_target;
        neg.edited = detail::add_noise(t.target, rng.uniform(0.15, 0.6), rng);
        break;
      case 2:
        neg.kind = ExampleKind::unedited;
        neg.edited = t.source;
        break;
      default:
        neg.kind = ExampleKind::blend;
        neg.edited = detail::blend(t.target, t.source, rng.uniform(0.5, 1.0));
        break;
    }
    pos.label = label_with_oracle(pos, th);
    neg.label = label_with_oracle(neg, th);
    out.push_back(std::move(pos));
    out.push_back(std::move(neg));
  }
  return out;
}

// Oracle targets against uniform noise videos: separable by construction.
inline std::vector<CriticExample> build_separable_dataset(std::size_t n_triplets, std::uint64_t seed,
                                                          const Thresholds& th = {}) {
  std::vector<CriticExample> out;
  for (std::size_t i = 0; i < n_triplets; ++i) {
    const world::Triplet t = world::make_triplet(seed, i, world::Subset::editing, {});
    num::Rng rng(num::counter_key(seed, 0x6e6f6973ULL, i));
    world::Video noise(t.source.dims());
    for (double& x : noise.values()) x = rng.uniform();
    CriticExample pos{t.id + "-pos", t.source, t.target, t.instruction, t.target, ExampleKind::target, Answer::yes};
    CriticExample neg{t.id + "-neg", t.source, std::move(noise), t.instruction, t.target, ExampleKind::pure_noise,
                      Answer::no};
    pos.label = label_with_oracle(pos, th);
    neg.label = label_with_oracle(neg, th);
    out.push_back(std::move(pos));
    out.push_back(std::move(neg));
  }
  return out;
}

struct PretrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double heldout_fraction = 0.2;
  double gate = 0.9;
  // Weight of the squared error between the expected frames and the oracle
  // target, added to the binary loss. 0 trains on the verdicts alone.
  double expectation_weight = 10.0;
  num::OptimizerConfig optimizer{num::OptimizerKind::adamw, 3e-3, 0.0, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 0;
};

struct PretrainReport {
  std::size_t train_examples = 0;
  std::size_t heldout_examples = 0;
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  double final_loss = 0.0;
  bool ready = false;
};

inline std::vector<Verdict> judge_examples(const CriticModel& c, const std::vector<CriticExample>& examples,
                                           std::size_t batch = 256) {
  std::vector<Verdict> out;
  out.reserve(examples.size());
  for (std::size_t lo = 0; lo < examples.size(); lo += batch) {
    const std::size_t hi = std::min(examples.size(), lo + batch);
    std::vector<const world::Video*> src, ed;
    std::vector<world::EditInstruction> ins;
    for (std::size_t i = lo; i < hi; ++i) {
      src.push_back(&examples[i].source);
      ed.push_back(&examples[i].edited);
      ins.push_back(examples[i].instruction);
    }
    const auto logits = critic_forward(c, src, ed, ins);
    for (std::size_t i = lo; i < hi; ++i) out.push_back(make_verdict(examples[i].id, logits[i - lo]));
  }
  return out;
}

inline double accuracy(const CriticModel& c, const std::vector<CriticExample>& examples) {
  if (examples.empty()) return 0.0;
  const auto verdicts = judge_examples(c, examples);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) hit += verdicts[i].answer == examples[i].label;
  return static_cast<double>(hit) / static_cast<double>(examples.size());
}

struct PretrainResult {
  CriticModel critic;
  PretrainReport report;
};

// Binary training with reason_loss against the oracle labels, plus the
// optional expectation term. The held-out slice is fixed by the seed before
// any update.
inline PretrainResult pretrain_critic(const std::vector<CriticExample>& data, const CriticConfig& cc,
                                      const PretrainConfig& pc) {
  std::size_t yes = 0;
  for (const auto& e : data) yes += e.label == Answer::yes;
  if (yes == 0 || yes == data.size()) throw ValidationError("pretrain_critic: dataset has a single class");
  if (pc.batch_size == 0) throw ValidationError("pretrain_critic: batch size must be positive");
  if (!(pc.expectation_weight >= 0)) throw ValidationError("pretrain_critic: expectation_weight must be >= 0");
  pc.optimizer.validate();

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  num::Rng split_rng(num::counter_key(pc.seed, 0x686f6c64ULL));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split_rng.below(i)]);
  const auto n_held = static_cast<std::size_t>(pc.heldout_fraction * static_cast<double>(data.size()));
  std::vector<CriticExample> held, train;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_held ? held : train).push_back(data[order[i]]);

  PretrainResult r{init_critic(cc, pc.seed), {}};
  r.report.train_examples = train.size();
  r.report.heldout_examples = held.size();
  std::vector<std::size_t> idx(train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t epoch = 0; epoch < pc.epochs; ++epoch) {
    num::Rng rng(num::counter_key(pc.seed, 0x65706f63ULL, epoch));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    for (std::size_t lo = 0; lo < idx.size(); lo += pc.batch_size) {
      const std::size_t hi = std::min(idx.size(), lo + pc.batch_size);
      std::vector<const world::Video*> src, ed, tgt;
      std::vector<world::EditInstruction> ins;
      std::vector<Answer> labels;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& e = train[idx[i]];
        src.push_back(&e.source);
        ed.push_back(&e.edited);
        tgt.push_back(&e.target);
        ins.push_back(e.instruction);
        labels.push_back(e.label);
      }
      Graph g;
      Var expected;
      Var logits = critic_logits(g, r.critic, g.constant(frames_matrix(src, cc.k)), g.constant(frames_matrix(ed, cc.k)),
                                 ins, false, &expected);
      Var loss = reason_loss(logits, labels);
      if (pc.expectation_weight > 0) {
        Var d = num::sub(expected, g.constant(frames_matrix(tgt, cc.k)));
        loss = num::add(loss, num::scale(num::mean(num::mul(d, d)), pc.expectation_weight));
      }
      r.report.final_loss = loss.value().item();
      num::optimizer_step(r.critic.params, g.backward(loss), pc.optimizer);
    }
  }
  r.report.train_accuracy = accuracy(r.critic, train);
  r.report.heldout_accuracy = held.empty() ? 0.0 : accuracy(r.critic, held);
  r.report.ready = r.report.heldout_accuracy >= pc.gate;
  return r;
}

}  // namespace revise::critic
