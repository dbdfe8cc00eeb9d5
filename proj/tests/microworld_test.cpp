#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "revise/microworld.hpp"

namespace revise::world {
namespace {

SceneParams single_pixel(double bg = 0.1, double intensity = 0.9) {
  SceneParams s;
  s.background = bg;
  SceneObject o;
  o.row = 2;
  o.col = 2;
  o.intensity = intensity;
  s.objects.push_back(o);
  return s;
}

TEST(Render, StaticUnitPixel) {
  const Video v = render_scene(single_pixel());
  for (std::size_t f = 0; f < 8; ++f)
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) EXPECT_DOUBLE_EQ(v.at(f, r, c), (r == 2 && c == 2) ? 0.9 : 0.1);
}

TEST(Render, EmptySceneIsConstant) {
  SceneParams s;
  s.background = 0.3;
  const Video v = render_scene(s);
  for (double x : v.values()) EXPECT_EQ(x, 0.3);
}

TEST(Render, Deterministic) {
  EXPECT_EQ(render_scene(random_scene({}, 17)), render_scene(random_scene({}, 17)));
}

TEST(Render, OutOfBoundsRejected) {
  SceneParams s = single_pixel();
  s.objects[0].v_col = 1.0;  // reaches column 9 by the last frame
  EXPECT_THROW(render_scene(s), ValidationError);
  s.objects[0].v_col = 0.0;
  s.objects[0].width = 7;
  EXPECT_THROW(render_scene(s), ValidationError);
}

TEST(Render, RandomScenesStayInRange) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Video v = render_scene(random_scene({}, seed));
    EXPECT_TRUE(v.in_unit_range());
  }
}

TEST(Edit, IdentityIsNoOp) {
  const Video src = render_scene(random_scene({}, 3));
  EXPECT_EQ(apply_oracle_edit(src, make_instruction(Operator::identity, {})), src);
}

TEST(Edit, TranslateSinglePixel) {
  const Video src = render_scene(single_pixel());
  const Video out = apply_oracle_edit(src, make_instruction(Operator::translate, {{"dx", 1}, {"dy", 0}}));
  for (std::size_t f = 0; f < 8; ++f) {
    EXPECT_DOUBLE_EQ(out.at(f, 2, 3), 0.9);
    EXPECT_DOUBLE_EQ(out.at(f, 2, 2), 0.1);
  }
}

TEST(Edit, DecayClosedForm) {
  const Video src = render_scene(single_pixel(0.1, 0.8));
  const Video out = apply_oracle_edit(src, make_instruction(Operator::decay, {{"rate", 0.5}}));
  for (std::size_t f = 0; f < 8; ++f) {
    EXPECT_NEAR(out.at(f, 2, 2), 0.8 * std::pow(0.5, f), 1e-15);
    EXPECT_DOUBLE_EQ(out.at(f, 0, 0), 0.1);
  }
}

TEST(Edit, ReflectMirrorsColumnsOrRows) {
  const Video src = render_scene(single_pixel());
  const Video lr = apply_oracle_edit(src, make_instruction(Operator::reflect, {{"axis", 0}}));
  EXPECT_DOUBLE_EQ(lr.at(0, 2, 5), 0.9);
  const Video tb = apply_oracle_edit(src, make_instruction(Operator::reflect, {{"axis", 1}}));
  EXPECT_DOUBLE_EQ(tb.at(0, 5, 2), 0.9);
}

TEST(Edit, GrowDilatesOverTime) {
  const Video src = render_scene(single_pixel());
  const Video out = apply_oracle_edit(src, make_instruction(Operator::grow, {{"rate", 0.5}}));
  EXPECT_DOUBLE_EQ(out.at(1, 1, 1), 0.1);  // radius 0 at t = 1
  EXPECT_DOUBLE_EQ(out.at(2, 1, 1), 0.9);  // radius 1 at t = 2
  EXPECT_DOUBLE_EQ(out.at(4, 0, 4), 0.9);  // radius 2 at t = 4
  EXPECT_DOUBLE_EQ(out.at(4, 0, 5), 0.1);
}

TEST(Edit, ImpactSplitsFromOnset) {
  SceneParams s;
  s.background = 0.2;
  SceneObject o;
  o.row = 3;
  o.col = 3;
  o.width = 2;
  o.intensity = 0.7;
  s.objects.push_back(o);
  const Video src = render_scene(s);
  const Video out = apply_oracle_edit(src, make_instruction(Operator::impact, {{"onset", 4}}));
  EXPECT_EQ(out.frame(3)[3 * 8 + 3], 0.7);
  EXPECT_EQ(out.frame(3)[3 * 8 + 4], 0.7);
  EXPECT_EQ(out.at(4, 3, 2), 0.7);
  EXPECT_EQ(out.at(4, 3, 3), 0.2);
  EXPECT_EQ(out.at(4, 3, 4), 0.2);
  EXPECT_EQ(out.at(4, 3, 5), 0.7);
}

TEST(Edit, ThresholdBrightenIsConditional) {
  const auto ins = make_instruction(Operator::threshold_brighten, {{"delta", 0.2}, {"threshold", 0.3}});
  const Video dark = render_scene(single_pixel(0.1));
  const Video lit = apply_oracle_edit(dark, ins);
  EXPECT_NEAR(lit.at(0, 0, 0), 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(lit.at(0, 2, 2), 0.9);
  const Video bright = render_scene(single_pixel(0.4));
  EXPECT_EQ(edit_mask(bright, ins).count(), 0u);
}

TEST(Edit, InvalidInstructionsRejected) {
  EXPECT_THROW(parse_operator("melt"), ValidationError);
  EXPECT_THROW(make_instruction(Operator::decay, {}), ValidationError);
  EXPECT_THROW(make_instruction(Operator::decay, {{"rate", 1.5}}), ValidationError);
  EXPECT_THROW(make_instruction(Operator::translate, {{"dx", 0.5}, {"dy", 0}}), ValidationError);
  EXPECT_THROW(make_instruction(Operator::reflect, {{"axis", 0}, {"speed", 1}}), ValidationError);
}

TEST(Mask, IdentityAllFalse) {
  const Video src = render_scene(random_scene({}, 5));
  EXPECT_EQ(edit_mask(src, make_instruction(Operator::identity, {})).count(), 0u);
}

TEST(Mask, TranslateMarksOldAndNewPositions) {
  const Video src = render_scene(single_pixel());
  const EditMask m = edit_mask(src, make_instruction(Operator::translate, {{"dx", 1}, {"dy", 0}}));
  EXPECT_EQ(m.count(), 16u);
  for (std::size_t f = 0; f < 8; ++f) {
    EXPECT_TRUE(m.flags[f * 64 + 2 * 8 + 2]);
    EXPECT_TRUE(m.flags[f * 64 + 2 * 8 + 3]);
  }
}

TEST(Instruction, TextDeterministicAndParameterSensitive) {
  const auto a = make_instruction(Operator::decay, {{"rate", 0.6}});
  const auto b = make_instruction(Operator::decay, {{"rate", 0.6}});
  const auto c = make_instruction(Operator::decay, {{"rate", 0.8}});
  EXPECT_EQ(a.text, b.text);
  EXPECT_FALSE(a.text.empty());
  EXPECT_NE(a.text, c.text);
  EXPECT_NE(embedding_index(a), embedding_index(c));
  EXPECT_EQ(a.reasoning_type, ReasoningType::temporal);
}

TEST(Instruction, VocabularyCoversCatalog) {
  std::set<std::size_t> seen;
  for (auto op : kOperators)
    for (const auto& p : parameter_catalog(op)) seen.insert(embedding_index(make_instruction(op, p)));
  EXPECT_EQ(seen.size() + 1, embedding_vocabulary().size());  // + narrative
}

TEST(Judge, PerfectEdit) {
  const Video src = render_scene(single_pixel());
  const auto ins = make_instruction(Operator::translate, {{"dx", 1}, {"dy", 0}});
  const auto s = oracle_judge(src, apply_oracle_edit(src, ins), ins);
  EXPECT_EQ(s, (OracleScores{10, 10, 10, 10}));
}

TEST(Judge, UneditedOutputUnderTranslate) {
  // Two masked pixels per frame, both off by 0.8: rmse 0.8 saturates the
  // 0.5 scale, so ea = 0. The unmasked region matches the source exactly.
  const Video src = render_scene(single_pixel());
  const auto ins = make_instruction(Operator::translate, {{"dx", 1}, {"dy", 0}});
  const auto s = oracle_judge(src, src, ins);
  EXPECT_DOUBLE_EQ(s.pc, 10.0);
  EXPECT_DOUBLE_EQ(s.ea, 0.0);
  EXPECT_DOUBLE_EQ(s.gn, 10.0);
  EXPECT_DOUBLE_EQ(s.gr, 10.0);
}

TEST(Judge, NoiseOnEditRegionBoundsEa) {
  // Uniform noise in [-0.5, 0.5] has rmse near 0.5/sqrt(3) = 0.289, so
  // ea is near 10 * (1 - 0.577) = 4.2.
  const Video src = render_scene(random_scene({}, 11));
  const auto ins = make_instruction(Operator::translate, {{"dx", 1}, {"dy", 1}});
  Video edited = apply_oracle_edit(src, ins);
  const EditMask m = edit_mask(src, ins);
  num::Rng rng(4);
  for (std::size_t i = 0; i < edited.size(); ++i)
    if (m.flags[i]) edited.values()[i] += rng.uniform(-0.5, 0.5);
  EXPECT_LE(oracle_judge(src, edited, ins).ea, 5.0);
}

TEST(Judge, ShapeMismatch) {
  const Video a(VideoDims{8, 8, 8}, 0.1);
  const Video b(VideoDims{4, 8, 8}, 0.1);
  EXPECT_THROW(oracle_judge(a, b, make_instruction(Operator::identity, {})), ShapeError);
}

TEST(Judge, ClippingPenalised) {
  const Video src = render_scene(single_pixel());
  const auto ins = make_instruction(Operator::identity, {});
  Video edited = src;
  for (std::size_t i = 0; i < 26; ++i) edited.values()[i] = 0.0;  // ~5% of pixels
  const auto s = oracle_judge(src, edited, ins);
  EXPECT_NEAR(s.gr, 10.0 * (1.0 - 10.0 * 26.0 / 512.0), 1e-12);
}

TEST(Dataset, SplitArithmetic) {
  const Dataset ds = gen_dataset(100, 1, Subset::editing, {0.8, 0.1, 0.1});
  EXPECT_EQ(ds.split.train.size(), 80u);
  EXPECT_EQ(ds.split.val.size(), 10u);
  EXPECT_EQ(ds.split.test.size(), 10u);
  const auto c = split_counts(10, {0.8, 0.1, 0.1});
  EXPECT_EQ(c, (std::array<std::size_t, 3>{8, 1, 1}));
  EXPECT_THROW(split_counts(10, {0.8, 0.1, 0.2}), ValidationError);
}

TEST(Dataset, DisjointSplits) {
  const Dataset ds = gen_dataset(57, 2, Subset::editing, {0.7, 0.2, 0.1});
  std::set<std::string> all;
  for (const auto* ids : {&ds.split.train, &ds.split.val, &ds.split.test}) all.insert(ids->begin(), ids->end());
  EXPECT_EQ(all.size(), 57u);
}

TEST(Dataset, DeterministicAndShardable) {
  const Dataset a = gen_dataset(40, 9, Subset::editing, {});
  const Dataset b = gen_dataset(40, 9, Subset::editing, {});
  const Dataset c = gen_dataset(40, 9, Subset::editing, {}, {}, 4);
  EXPECT_EQ(a.triplets, b.triplets);
  EXPECT_EQ(a.split, b.split);
  EXPECT_EQ(a.triplets, c.triplets);
  EXPECT_EQ(to_jsonl(a.triplets), to_jsonl(c.triplets));
}

TEST(Dataset, BalancedReasoningTypes) {
  const Dataset ds = gen_dataset(8, 5, Subset::editing, {});
  std::map<ReasoningType, int> per_type;
  for (const auto& t : ds.triplets) ++per_type[t.instruction.reasoning_type];
  for (auto type : kReasoningTypes) EXPECT_EQ(per_type[type], 2);
  const Dataset big = gen_dataset(103, 5, Subset::editing, {});
  std::map<ReasoningType, int> counts;
  for (const auto& t : big.triplets) ++counts[t.instruction.reasoning_type];
  for (auto type : kReasoningTypes) EXPECT_LE(std::abs(counts[type] - 103 / 4), 1);
}

TEST(Dataset, JsonlRoundTripIsExact) {
  const Dataset ds = gen_dataset(12, 21, Subset::editing, {});
  const std::string text = to_jsonl(ds.triplets);
  EXPECT_EQ(from_jsonl(text), ds.triplets);
  const auto j = nlohmann::json::parse(text.substr(0, text.find('\n')));
  for (const char* key : {"id", "subset", "reasoning_type", "operator_id", "parameters", "instruction_text", "source",
                          "target"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["source"].size(), 8u);
}

// Every generated triplet is scored perfect on EA and PC by its own oracle.
TEST(Property, OracleConsistency) {
  const Dataset ds = gen_dataset(400, 77, Subset::editing, {});
  for (const auto& t : ds.triplets) {
    const auto s = oracle_judge(t.source, t.target, t.instruction);
    EXPECT_EQ(s.ea, 10.0) << t.id;
    EXPECT_EQ(s.pc, 10.0) << t.id;
    EXPECT_EQ(t.target, apply_oracle_edit(t.source, t.instruction));
    EXPECT_TRUE(t.target.in_unit_range());
  }
}

// Changing the edited video outside the edit mask never moves EA; inside the
// mask never moves PC.
TEST(Property, MaskScoreCoupling) {
  const Dataset ds = gen_dataset(120, 13, Subset::editing, {});
  num::Rng rng(99);
  for (const auto& t : ds.triplets) {
    const EditMask m = edit_mask(t.source, t.instruction);
    Video base = t.target;
    for (double& v : base.values()) v = std::clamp(v + rng.uniform(-0.1, 0.1), 0.0, 1.0);
    Video outside = base, inside = base;
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (m.flags[i]) inside.values()[i] = rng.uniform();
      else outside.values()[i] = rng.uniform();
    }
    const auto s0 = oracle_judge(t.source, base, t.instruction);
    EXPECT_EQ(oracle_judge(t.source, outside, t.instruction).ea, s0.ea);
    EXPECT_EQ(oracle_judge(t.source, inside, t.instruction).pc, s0.pc);
  }
}

}  // namespace
}  // namespace revise::world
