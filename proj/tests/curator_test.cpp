#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <httplib.h>

#include "revise/curator/curator.hpp"

using namespace revise;
using namespace revise::curator;

namespace {

world::Video constant_video(std::size_t frames, double level) { return world::Video({frames, 4, 4}, level); }

world::Video concat(const std::vector<world::Video>& parts) {
  std::vector<double> v;
  std::size_t frames = 0;
  for (const auto& p : parts) {
    v.insert(v.end(), p.values().begin(), p.values().end());
    frames += p.dims().frames;
  }
  return world::Video({frames, parts[0].dims().height, parts[0].dims().width}, std::move(v));
}

SimilarityMatrix random_matrix(std::size_t n, num::Rng& rng, bool coarse) {
  std::vector<double> v(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      // Coarse values produce exact ties in the row means.
      const double x = coarse ? static_cast<double>(rng.below(5)) * 0.25 - 0.5 : rng.uniform(-1.0, 1.0);
      v[i * n + j] = v[j * n + i] = x;
    }
  return SimilarityMatrix(n, std::move(v));
}

std::size_t brute_force_target(const std::vector<std::size_t>& members, const SimilarityMatrix& s) {
  std::vector<double> means;
  for (std::size_t m : members) {
    double sum = 0;
    for (std::size_t o : members)
      if (o != m) sum += s.at(m, o);
    means.push_back(sum / static_cast<double>(members.size() - 1));
  }
  const double lo = *std::min_element(means.begin(), means.end());
  std::size_t best = SIZE_MAX;
  for (std::size_t i = 0; i < members.size(); ++i)
    if (means[i] == lo) best = std::min(best, members[i]);
  return best;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

TEST(DetectCuts, ConstantVideoHasNone) { EXPECT_TRUE(detect_cuts(constant_video(8, 0.4)).empty()); }

TEST(DetectCuts, SingleJunction) {
  const auto v = concat({constant_video(5, 0.1), constant_video(4, 0.9)});
  EXPECT_NEAR(frame_difference(v, 5), 0.8, 1e-12);
  EXPECT_EQ(detect_cuts(v, 0.3), (std::vector<std::size_t>{5}));
  EXPECT_TRUE(detect_cuts(v, 0.81).empty());
}

TEST(DetectCuts, RejectsBadInput) {
  EXPECT_THROW(detect_cuts(constant_video(1, 0.1)), ValidationError);
  EXPECT_THROW(detect_cuts(constant_video(4, 0.1), 0.0), ValidationError);
}

TEST(DetectCuts, FindsEveryInjectedJump) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto movies = synth_movies(1, 3 + seed % 6, {8, 8, 8}, seed);
    const auto& v = movies[0].frames;
    double intra = 0, inter = 1;
    std::vector<std::size_t> injected;
    for (std::size_t f = 1; f < v.dims().frames; ++f) {
      if (f % 8 == 0) {
        injected.push_back(f);
        inter = std::min(inter, frame_difference(v, f));
      } else {
        intra = std::max(intra, frame_difference(v, f));
      }
    }
    ASSERT_LT(intra, inter);
    for (double th : {0.3, 0.5 * (intra + inter)})
      if (th > intra && th < inter) {
        EXPECT_EQ(detect_cuts(v, th), injected) << "seed " << seed;
      }
  }
}

TEST(SegmentShots, WindowsEachShot) {
  Clip movie{"m", concat({constant_video(8, 0.1), constant_video(8, 0.9), constant_video(11, 0.1)}), {}, "cap"};
  const auto clips = segment_shots(movie, 8);
  ASSERT_EQ(clips.size(), 3u);
  EXPECT_EQ(clips[0].id, "m-000");
  EXPECT_EQ(clips[2].id, "m-002");
  EXPECT_EQ(clips[1].frames.values()[0], 0.9);
  EXPECT_EQ(*clips[2].caption, "cap");
  Clip single{"s", constant_video(8, 0.2), {}, {}};
  EXPECT_EQ(segment_shots(single, 8)[0].id, "s");
}

TEST(Embed, UnitNormAndIdentity) {
  MeanFrameEmbedder e;
  Clip a{"a", world::render_scene(world::random_scene({}, 3)), {}, {}};
  Clip b = a;
  const auto ea = embed_clip(a, e), eb = embed_clip(b, e);
  EXPECT_NEAR(std::sqrt(dot(ea, ea)), 1.0, 1e-9);
  EXPECT_EQ(ea, eb);
  EXPECT_NEAR(dot(ea, eb), 1.0, 1e-12);
}

TEST(Embed, CenteredNegationIsAntipodal) {
  MeanFrameEmbedder e(true);
  Clip a{"a", world::render_scene(world::random_scene({}, 5)), {}, {}};
  Clip neg = a;
  for (double& x : neg.frames.values()) x = 1.0 - x;
  EXPECT_NEAR(dot(embed_clip(a, e), embed_clip(neg, e)), -1.0, 1e-9);
}

TEST(Embed, ZeroVectorIsAnError) {
  EXPECT_THROW(embed_clip({"z", constant_video(4, 0.0), {}, {}}, MeanFrameEmbedder()), ValidationError);
  EXPECT_THROW(embed_clip({"c", constant_video(4, 0.5), {}, {}}, MeanFrameEmbedder(true)), ValidationError);
}

TEST(Embed, ThreadedMatchesSerial) {
  auto clips = synth_movies(1, 12, {8, 8, 8}, 2);
  auto shots = segment_shots(clips[0], 8);
  auto serial = shots, threaded = shots;
  embed_clips(serial, MeanFrameEmbedder(), 1);
  embed_clips(threaded, MeanFrameEmbedder(), 4);
  for (std::size_t i = 0; i < shots.size(); ++i) EXPECT_EQ(*serial[i].embedding, *threaded[i].embedding);
}

TEST(Cluster, IdenticalSevenSplitSixOne) {
  const std::vector<std::vector<double>> e(7, {0.6, 0.8});
  const auto c = cluster_clips(e, 0.9, 6);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].size(), 6u);
  EXPECT_EQ(c[1], (std::vector<std::size_t>{6}));
}

TEST(Cluster, OrthogonalAreSingletons) {
  std::vector<std::vector<double>> e;
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> v(5, 0.0);
    v[i] = 1.0;
    e.push_back(v);
  }
  const auto c = cluster_clips(e, 0.5);
  EXPECT_EQ(c.size(), 5u);
  EXPECT_EQ(c, cluster_clips(e, 0.5));
}

TEST(Cluster, CapNeverExceeded) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    num::Rng rng(seed);
    const std::size_t n = 5 + rng.below(60), d = 2 + rng.below(4);
    std::vector<std::vector<double>> e;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(d);
      for (double& x : v) x = 1.0 + 0.1 * rng.uniform(-1.0, 1.0);
      e.push_back(normalize(v));
    }
    const double th = rng.uniform(0.5, 0.99);
    std::size_t total = 0;
    for (const auto& c : cluster_clips(e, th)) {
      EXPECT_LE(c.size(), 6u);
      total += c.size();
    }
    EXPECT_EQ(total, n);
  }
}

TEST(Cluster, RejectsBadThreshold) {
  EXPECT_THROW(cluster_clips({{1.0}}, 0.0), ValidationError);
  EXPECT_THROW(cluster_clips({{1.0}}, 1.0), ValidationError);
}

TEST(SelectTarget, ThreeClipExample) {
  const SimilarityMatrix s(3, {1, 0.9, 0.8, 0.9, 1, 0.2, 0.8, 0.2, 1});
  EXPECT_NEAR(mean_similarity({0, 1, 2}, 0, s), 0.85, 1e-12);
  EXPECT_NEAR(mean_similarity({0, 1, 2}, 1, s), 0.55, 1e-12);
  EXPECT_NEAR(mean_similarity({0, 1, 2}, 2, s), 0.50, 1e-12);
  EXPECT_EQ(select_target({0, 1, 2}, s), 2u);
}

TEST(SelectTarget, PairTiesToSmallest) {
  const SimilarityMatrix s(3, {1, 0.3, 0.1, 0.3, 1, 0.7, 0.1, 0.7, 1});
  EXPECT_EQ(select_target({2, 1}, s), 1u);
  EXPECT_EQ(select_target({0, 2}, s), 0u);
}

TEST(SelectTarget, OutlierSelected) {
  const SimilarityMatrix s(4, {1, 0.95, 0.9, 0.1, 0.95, 1, 0.92, 0.2, 0.9, 0.92, 1, 0.15, 0.1, 0.2, 0.15, 1});
  EXPECT_EQ(select_target({0, 1, 2, 3}, s), 3u);
}

TEST(SelectTarget, SingletonIsAnError) {
  const SimilarityMatrix s(1, {1});
  EXPECT_THROW(select_target({0}, s), ValidationError);
}

TEST(SelectTarget, MatchesBruteForce) {
  num::Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    const auto s = random_matrix(n, rng, trial % 2 == 0);
    std::vector<std::size_t> members(n);
    for (std::size_t i = 0; i < n; ++i) members[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    ASSERT_EQ(select_target(members, s), brute_force_target(members, s)) << "trial " << trial;
  }
}

TEST(SimilarityMatrix, RejectsMalformed) {
  EXPECT_THROW(SimilarityMatrix(2, {1, 0.5, 0.4, 1}), ValidationError);
  EXPECT_THROW(SimilarityMatrix(2, {0.9, 0.5, 0.5, 1}), ValidationError);
  EXPECT_THROW(SimilarityMatrix(2, {1, 1.5, 1.5, 1}), ValidationError);
}

TEST(BuildTriplets, PairsEverySourceWithTarget) {
  std::vector<Clip> clips;
  for (int i = 0; i < 6; ++i) clips.push_back({"c" + std::to_string(i), constant_video(2, 0.1), {}, "caption " + std::to_string(i)});
  clips[3].caption.reset();
  const SimilarityMatrix s = similarity_matrix(std::vector<std::vector<double>>(6, {1.0}));
  const auto six = build_triplets({make_cluster({0, 1, 2, 3, 4, 5}, s)}, clips);
  ASSERT_EQ(six.size(), 5u);
  for (const auto& k : six) {
    EXPECT_EQ(k.target_id, "c0");
    EXPECT_NE(k.source_id, "c0");
    EXPECT_EQ(k.template_text, "caption 0");
  }
  const auto two = build_triplets({make_cluster({3, 4}, s)}, clips);
  ASSERT_EQ(two.size(), 1u);
  EXPECT_EQ(two[0].target_id, "c3");
  EXPECT_TRUE(two[0].needs_rewrite);
  EXPECT_EQ(two[0].template_text, kPlaceholderTemplate);
}

TEST(Rewrite, TemporalBankCue) {
  TemplateRewriter r;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto text = r.rewrite({"apply decay", world::ReasoningType::temporal, world::Operator::decay, seed});
    const auto& cues = reasoning_bank(world::ReasoningType::temporal).cues;
    EXPECT_TRUE(std::any_of(cues.begin(), cues.end(), [&](const std::string& c) { return lower(text).find(c) != std::string::npos; }))
        << text;
    EXPECT_NE(text.find("apply decay"), std::string::npos);
  }
}

TEST(Rewrite, BanksCarryTheirCues) {
  for (auto t : world::kReasoningTypes)
    for (const auto& tmpl : reasoning_bank(t).templates) {
      const auto& cues = reasoning_bank(t).cues;
      EXPECT_TRUE(std::any_of(cues.begin(), cues.end(), [&](const std::string& c) { return lower(tmpl).find(c) != std::string::npos; }))
          << tmpl;
    }
}

TEST(Rewrite, IdentityStillMeansNoChange) {
  TemplateRewriter r;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto text = r.rewrite({"keep the video unchanged", world::ReasoningType::commonsense, world::Operator::identity, seed});
    EXPECT_NE(lower(text).find("no change"), std::string::npos) << text;
  }
}

TEST(Rewrite, Deterministic) {
  TemplateRewriter r;
  const RewriteRequest q{"move the object right by 1 pixel", world::ReasoningType::spatial, world::Operator::translate, 4};
  EXPECT_EQ(r.rewrite(q), r.rewrite(q));
}

TEST(Rewrite, RemoteFailureFallsBack) {
  bench::RemoteJudgeConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  cfg.attempts = 1;
  cfg.timeout_s = 1;
  RemoteRewriter remote(cfg);
  const RewriteRequest q{"apply decay", world::ReasoningType::temporal, world::Operator::decay, 1};
  const auto rec = rewrite_instruction(q, remote);
  ASSERT_TRUE(rec.warning.has_value());
  EXPECT_EQ(rec.rewriter, "builtin");
  EXPECT_EQ(rec.text, TemplateRewriter().rewrite(q));
  EXPECT_EQ(rec.literal, "apply decay");
}

TEST(Rewrite, RemoteUsesReply) {
  httplib::Server svr;
  std::string seen;
  svr.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = req.body;
    res.set_content(R"({"choices":[{"message":{"content":" \"Over time the glow fades.\" "}}]})", "application/json");
  });
  const int port = svr.bind_to_any_port("127.0.0.1");
  std::thread th([&] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  bench::RemoteJudgeConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  RemoteRewriter remote(cfg);
  const auto rec = rewrite_instruction({"apply decay", world::ReasoningType::temporal, world::Operator::decay, 1}, remote);
  svr.stop();
  th.join();
  EXPECT_FALSE(rec.warning.has_value());
  EXPECT_EQ(rec.text, "Over time the glow fades.");
  EXPECT_NE(seen.find("unfolds over time"), std::string::npos);
  EXPECT_NE(seen.find("apply decay"), std::string::npos);
}

TEST(Manifest, RoundTripAndFramesPath) {
  const auto dir = std::filesystem::temp_directory_path() / "revise_curator_manifest";
  std::filesystem::create_directories(dir);
  Clip a{"a", world::render_scene(world::random_scene({}, 1)), {}, "a caption"};
  Clip b{"b", world::render_scene(world::random_scene({}, 2)), {}, {}};
  {
    std::ofstream(dir / "b.json") << world::video_to_json(b.frames).dump();
    std::ofstream(dir / "clips.jsonl") << clip_manifest_line(a) << "\n{\"id\":\"b\",\"frames_path\":\"b.json\"}\n";
  }
  const auto clips = load_clip_manifest(dir / "clips.jsonl");
  ASSERT_EQ(clips.size(), 2u);
  EXPECT_EQ(clips[0].frames, a.frames);
  EXPECT_EQ(*clips[0].caption, "a caption");
  EXPECT_EQ(clips[1].frames, b.frames);
  EXPECT_FALSE(clips[1].caption.has_value());
  EXPECT_THROW(parse_clip_manifest("{\"id\":\"x\"}\n"), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(Caption, DescribesDrift) {
  world::SceneParams p;
  p.background = 0.1;
  p.objects.push_back({2, 1, 1, 1, 0.9, 0.0, 0.5});
  EXPECT_EQ(describe_clip(world::render_scene(p)), "a dim scene with a light shape of 1 pixels drifting to the right");
}

TEST(Curate, ToyPipeline) {
  const auto movies = synth_movies(3, 10, {8, 8, 8}, 11);
  TemplateRewriter rw;
  CurateConfig cfg;
  cfg.caption_missing = true;
  cfg.seed = 5;
  const auto r = curate(movies, MeanFrameEmbedder(), rw, cfg);
  EXPECT_EQ(r.clips.size(), 30u);
  ASSERT_FALSE(r.triplets.empty());
  std::size_t expected = 0;
  for (const auto& c : r.clusters) {
    EXPECT_LE(c.members.size(), 6u);
    expected += c.sources.size();
  }
  EXPECT_EQ(r.triplets.size(), expected);
  for (const auto& t : r.triplets) {
    EXPECT_EQ(t.subset, world::Subset::in_context);
    ASSERT_TRUE(t.curation.has_value());
    EXPECT_NE(t.curation->source_clip_id, t.curation->target_clip_id);
    EXPECT_EQ(t.instruction.text, t.curation->rewritten_instruction);
  }
  const auto again = curate(movies, MeanFrameEmbedder(), rw, cfg);
  EXPECT_EQ(world::to_jsonl(r.triplets), world::to_jsonl(again.triplets));
  cfg.threads = 4;
  EXPECT_EQ(world::to_jsonl(r.triplets), world::to_jsonl(curate(movies, MeanFrameEmbedder(), rw, cfg).triplets));
  const auto parsed = world::from_jsonl(world::to_jsonl(r.triplets));
  EXPECT_EQ(parsed, r.triplets);
}
