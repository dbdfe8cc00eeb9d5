#include <cmath>

#include <gtest/gtest.h>

#include "revise/microworld.hpp"
#include "revise/numcore/checkpoint.hpp"
#include "revise/reflector/reflector.hpp"

namespace revise::critic {
namespace {

using num::Tensor;
using num::Var;

world::Video random_video(const world::VideoDims& dims, std::uint64_t seed) {
  num::Rng rng(seed);
  world::Video v(dims);
  for (double& x : v.values()) x = rng.uniform();
  return v;
}

void randomize(CriticModel& c, std::uint64_t seed, double scale) {
  num::Rng rng(seed);
  for (auto& p : c.params.params())
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] += rng.uniform(-scale, scale);
}

TEST(SelectFrames, Indices) {
  EXPECT_EQ(frame_indices(8, 2), (std::vector<std::size_t>{0, 7}));
  EXPECT_EQ(frame_indices(8, 3), (std::vector<std::size_t>{0, 4, 7}));
  EXPECT_EQ(frame_indices(8, 8), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(frame_indices(8, 1), (std::vector<std::size_t>{0}));
  EXPECT_THROW(frame_indices(8, 0), ValidationError);
  EXPECT_THROW(frame_indices(8, 9), ValidationError);
}

TEST(SelectFrames, Contents) {
  const auto v = random_video({}, 3);
  const auto frames = select_frames(v, 2);
  ASSERT_EQ(frames.size(), 2u);
  for (std::size_t j = 0; j < 64; ++j) {
    EXPECT_EQ(frames[0][j], v.frame(0)[j]);
    EXPECT_EQ(frames[1][j], v.frame(7)[j]);
  }
  EXPECT_EQ(frame_columns({}, 2).size(), 128u);
  EXPECT_EQ(frame_columns({}, 2)[64], 7u * 64u);
}

TEST(Probability, PYes) {
  EXPECT_DOUBLE_EQ(p_yes({1.3, 1.3}), 0.5);
  EXPECT_NEAR(p_yes({2.0, 0.0}), 0.8807970779778823, 1e-12);
  EXPECT_NEAR(p_yes({0.4, -1.1}) + p_yes({-1.1, 0.4}), 1.0, 1e-15);
  EXPECT_EQ(make_verdict("a", {0.0, 0.0}).answer, Answer::yes);
  EXPECT_EQ(make_verdict("a", {0.0, 1e-9}).answer, Answer::no);
}

TEST(ReasonLoss, Values) {
  EXPECT_NEAR(reason_loss({0.7, 0.7}, Answer::yes), std::log(2.0), 1e-12);
  EXPECT_NEAR(reason_loss({2.0, 0.0}, Answer::yes), 0.12692801104297252, 1e-12);
  EXPECT_NEAR(reason_loss({0.0, 2.0}, Answer::no), 0.12692801104297252, 1e-12);
  const double big = reason_loss({0.0, 50.0}, Answer::yes);
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_NEAR(big, 50.0 + std::log1p(std::exp(-50.0)), 1e-12);
  EXPECT_NEAR(reason_loss({-800.0, 800.0}, Answer::yes), 1600.0, 1e-9);
}

TEST(ReasonLoss, Properties) {
  num::Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Logits l{rng.uniform(-20, 20), rng.uniform(-20, 20)};
    const double both = reason_loss(l, Answer::yes) + reason_loss(l, Answer::no);
    EXPECT_GE(both, 2.0 * std::log(2.0) - 1e-12);
    const Logits better{l.yes + rng.uniform(0.01, 3.0), l.no};
    EXPECT_LT(reason_loss(better, Answer::yes), reason_loss(l, Answer::yes));
  }
  EXPECT_NEAR(reason_loss({1.0, 1.0}, Answer::yes) + reason_loss({1.0, 1.0}, Answer::no), 2.0 * std::log(2.0), 1e-15);
}

TEST(ReasonLoss, BatchedMatchesScalar) {
  num::Graph g;
  const Tensor logits(num::Shape{3, 2}, {1.0, -0.5, 0.2, 0.3, -4.0, 2.0});
  const std::vector<Answer> ans{Answer::yes, Answer::no, Answer::yes};
  const double batched = reason_loss(g.constant(logits), ans).value().item();
  double expect = 0.0;
  for (std::size_t i = 0; i < 3; ++i) expect += reason_loss({logits[2 * i], logits[2 * i + 1]}, ans[i]) / 3.0;
  EXPECT_NEAR(batched, expect, 1e-14);
}

TEST(OracleAnswer, Conjunction) {
  EXPECT_EQ(oracle_answer({10, 10, 10, 10}, {10, 10, 10, 10}), Answer::yes);
  EXPECT_EQ(oracle_answer({8, 9, 7, 9}), Answer::yes);
  EXPECT_EQ(oracle_answer({6.9, 10, 10, 10}), Answer::no);
  EXPECT_THROW(oracle_answer({8, 8, 8, 8}, {11, 7, 7, 7}), ValidationError);
}

TEST(OracleAnswer, Monotone) {
  num::Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    world::OracleScores s{rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10)};
    if (oracle_answer(s) == Answer::no) continue;
    world::OracleScores up = s;
    switch (rng.below(4)) {
      case 0: up.ea = std::min(10.0, up.ea + rng.uniform()); break;
      case 1: up.pc = std::min(10.0, up.pc + rng.uniform()); break;
      case 2: up.gn = std::min(10.0, up.gn + rng.uniform()); break;
      default: up.gr = std::min(10.0, up.gr + rng.uniform()); break;
    }
    EXPECT_EQ(oracle_answer(up), Answer::yes);
  }
}

TEST(Critic, ZeroHeadGivesEqualLogits) {
  CriticConfig cc;
  cc.zero_head = true;
  const auto c = init_critic(cc, 1);
  const auto t = world::make_triplet(4, 0, world::Subset::editing, {});
  const Logits l = critic_forward(c, t.source, t.target, t.instruction);
  EXPECT_EQ(l.yes, 0.0);
  EXPECT_EQ(l.no, 0.0);
}

TEST(Critic, DeterministicAndShapeChecked) {
  auto c = init_critic({}, 2);
  randomize(c, 3, 0.1);
  const auto t = world::make_triplet(4, 1, world::Subset::editing, {});
  const Logits a = critic_forward(c, t.source, t.target, t.instruction);
  const Logits b = critic_forward(c, t.source, t.target, t.instruction);
  EXPECT_EQ(a.yes, b.yes);
  EXPECT_EQ(a.no, b.no);
  const world::Video small(world::VideoDims{8, 4, 4});
  EXPECT_THROW(critic_forward(c, small, small, t.instruction), ShapeError);
  num::Graph g;
  EXPECT_THROW(critic_logits(g, c, g.constant(Tensor(num::Shape{1, 128})), g.constant(Tensor(num::Shape{1, 64})),
                             {t.instruction}, true),
               ShapeError);
}

TEST(Critic, BatchEqualsSingles) {
  auto c = init_critic({}, 2);
  randomize(c, 4, 0.1);
  std::vector<world::Triplet> ts;
  for (std::size_t i = 0; i < 5; ++i) ts.push_back(world::make_triplet(8, i, world::Subset::editing, {}));
  std::vector<const world::Video*> s, e;
  std::vector<world::EditInstruction> ins;
  for (const auto& t : ts) {
    s.push_back(&t.source);
    e.push_back(&t.target);
    ins.push_back(t.instruction);
  }
  const auto batch = critic_forward(c, s, e, ins);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const Logits one = critic_forward(c, ts[i].source, ts[i].target, ts[i].instruction);
    EXPECT_NEAR(batch[i].yes, one.yes, 1e-12);
    EXPECT_NEAR(batch[i].no, one.no, 1e-12);
  }
}

// The channel the reflective objective relies on: d(l_yes - l_no)/d(edited).
TEST(Critic, EditedFrameGradientMatchesFiniteDifferences) {
  auto c = init_critic({}, 6);
  randomize(c, 7, 0.2);
  const auto t = world::make_triplet(12, 3, world::Subset::editing, {});
  const Tensor src = frames_matrix({&t.source}, 2);
  Tensor edited = frames_matrix({&t.target}, 2);
  num::Rng rng(2);
  for (std::size_t i = 0; i < edited.size(); ++i) edited[i] += rng.uniform(-0.1, 0.1);
  auto margin = [&](const Tensor& e, Tensor* grad) {
    num::Graph g;
    num::ParamStore leaf;
    leaf.add("edited", e);
    Var l = critic_logits(g, c, g.constant(src), g.param(leaf, "edited"), {t.instruction}, true);
    Var m = num::sum(num::sub(num::gather_cols(l, {0}), num::gather_cols(l, {1})));
    if (grad != nullptr) *grad = g.backward(m).at("edited");
    return m.value().item();
  };
  Tensor grad;
  margin(edited, &grad);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < edited.size(); ++i) {
    Tensor up = edited, dn = edited;
    up[i] += h;
    dn[i] -= h;
    const double fd = (margin(up, nullptr) - margin(dn, nullptr)) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-3, std::abs(fd) + std::abs(grad[i])));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Critic, CheckpointRoundTrip) {
  auto c = init_critic({}, 11);
  randomize(c, 12, 0.1);
  const auto back = critic_from_checkpoint(num::parse_checkpoint(num::serialize_checkpoint(c.params)));
  EXPECT_EQ(back.config, c.config);
  const auto t = world::make_triplet(1, 2, world::Subset::editing, {});
  const Logits a = critic_forward(c, t.source, t.target, t.instruction);
  const Logits b = critic_forward(back, t.source, t.target, t.instruction);
  EXPECT_EQ(a.yes, b.yes);
  EXPECT_EQ(a.no, b.no);
}

TEST(Pretrain, DatasetIsLabelledByOracle) {
  const auto data = build_critic_dataset(40, 3);
  ASSERT_EQ(data.size(), 80u);
  std::size_t yes = 0;
  for (const auto& e : data) {
    EXPECT_EQ(e.label, oracle_answer(world::oracle_judge(e.source, e.edited, e.instruction)));
    yes += e.label == Answer::yes;
  }
  EXPECT_GT(yes, 20u);
  EXPECT_LT(yes, 60u);
}

TEST(Pretrain, SingleClassRejected) {
  auto data = build_separable_dataset(4, 1);
  std::vector<CriticExample> pos;
  for (const auto& e : data)
    if (e.label == Answer::yes) pos.push_back(e);
  EXPECT_THROW(pretrain_critic(pos, {}, {}), ValidationError);
}

TEST(Pretrain, UntrainedIsChance) {
  const auto data = build_separable_dataset(50, 2);
  CriticConfig cc;
  cc.zero_head = true;
  PretrainConfig pc;
  pc.epochs = 0;
  pc.heldout_fraction = 0.0;
  const auto r = pretrain_critic(data, cc, pc);
  EXPECT_NEAR(r.report.train_accuracy, 0.5, 0.05);
}

TEST(Pretrain, SeparableReachesGate) {
  const auto data = build_separable_dataset(150, 3);
  PretrainConfig pc;
  pc.epochs = 12;
  pc.optimizer.learning_rate = 1e-2;
  pc.seed = 1;
  const auto r = pretrain_critic(data, {}, pc);
  EXPECT_GE(r.report.heldout_accuracy, 0.99);
  EXPECT_TRUE(r.report.ready);
}

TEST(Pretrain, SameSeedSameParameters) {
  const auto data = build_critic_dataset(20, 5);
  PretrainConfig pc;
  pc.epochs = 2;
  pc.seed = 4;
  const auto a = pretrain_critic(data, {}, pc);
  const auto b = pretrain_critic(data, {}, pc);
  EXPECT_EQ(num::serialize_checkpoint(a.critic.params), num::serialize_checkpoint(b.critic.params));
}

TEST(Agreement, Fractions) {
  std::vector<Verdict> a, b;
  for (int i = 0; i < 100; ++i) {
    const std::string id = "s" + std::to_string(i);
    a.push_back(answer_verdict(id, Answer::yes));
    b.push_back(answer_verdict(id, i < 66 ? Answer::yes : Answer::no));
  }
  EXPECT_DOUBLE_EQ(agreement(a, a).decision_agreement, 1.0);
  EXPECT_DOUBLE_EQ(agreement(a, b).decision_agreement, 0.66);
  std::vector<Verdict> flip;
  for (const auto& v : a) flip.push_back(answer_verdict(v.id, Answer::no));
  EXPECT_DOUBLE_EQ(agreement(a, flip).decision_agreement, 0.0);
  EXPECT_FALSE(agreement(a, b).rationale_similarity.has_value());
  b.pop_back();
  EXPECT_THROW(agreement(a, b), ValidationError);
}

TEST(Agreement, RationaleCosineAndCsv) {
  std::vector<Verdict> a{answer_verdict("x", Answer::yes), answer_verdict("y", Answer::no)};
  std::vector<Verdict> b{answer_verdict("x", Answer::yes), answer_verdict("y", Answer::yes)};
  a[0].rationale = {1, 0};
  b[0].rationale = {1, 0};
  a[1].rationale = {1, 0};
  b[1].rationale = {0, 2};
  const auto r = agreement(a, b);
  ASSERT_TRUE(r.rationale_similarity.has_value());
  EXPECT_NEAR(*r.rationale_similarity, 0.5, 1e-15);
  EXPECT_EQ(r.csv(), "id,answer_a,answer_b,match\nx,yes,yes,1\ny,no,yes,0\n");
}

TEST(Prompt, RenderContainsEverything) {
  const auto& t = builtin_prompt_template();
  EXPECT_EQ(t.version, "v1");
  const auto ins = world::make_instruction(world::Operator::identity, {});
  const std::string p = render_prompt(t, ins);
  EXPECT_NE(p.find(ins.text), std::string::npos);
  for (const char* d : kDimensions) EXPECT_NE(p.find(std::string("- ") + d + ": "), std::string::npos);
  EXPECT_NE(p.find("chain of reasoning"), std::string::npos);
  EXPECT_NE(p.find("\"yes\""), std::string::npos);
  EXPECT_NE(p.find("\"no\""), std::string::npos);
  EXPECT_EQ(p.find('{'), std::string::npos);
  EXPECT_EQ(p, render_prompt(t, ins));
}

TEST(Prompt, FileMatchesBuiltinAndVersionsDiffer) {
  const auto file = load_prompt_template(std::string(REVISE_SOURCE_DIR) + "/templates/judge_prompt_v1.txt");
  EXPECT_EQ(file.version, builtin_prompt_template().version);
  EXPECT_EQ(file.body, builtin_prompt_template().body);
  EXPECT_EQ(file.rubrics, builtin_prompt_template().rubrics);
  PromptTemplate v2 = file;
  v2.version = "v2";
  EXPECT_NE(v2.version, file.version);
  EXPECT_THROW(parse_prompt_template("version: v3\n---\nno slots\n"), ValidationError);
  EXPECT_THROW(parse_prompt_template("version: v3\nrubric EA: x\n"), ValidationError);
}

}  // namespace
}  // namespace revise::critic
