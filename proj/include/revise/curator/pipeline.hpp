#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "revise/curator/clips.hpp"
#include "revise/curator/cluster.hpp"
#include "revise/curator/rewrite.hpp"
#include "revise/microworld/dataset.hpp"
#include "revise/microworld/scene.hpp"

namespace revise::curator {

inline constexpr const char* kPlaceholderTemplate = "continue the scene in a way that fits what came before";

struct TripletSkeleton {
  std::string source_id;
  std::string target_id;
  std::string template_text;
  bool needs_rewrite = false;
};

// One skeleton per source, each paired with its cluster's target. The
// target's caption becomes the instruction template.
inline std::vector<TripletSkeleton> build_triplets(const std::vector<Cluster>& clusters, const std::vector<Clip>& clips) {
  std::vector<TripletSkeleton> out;
  for (const auto& c : clusters) {
    if (c.members.size() < 2) throw ValidationError("build_triplets: cluster needs at least two members");
    const Clip& target = clips.at(c.target);
    for (std::size_t s : c.sources) {
      TripletSkeleton k{clips.at(s).id, target.id, kPlaceholderTemplate, true};
      if (target.caption && !target.caption->empty()) {
        k.template_text = *target.caption;
        k.needs_rewrite = false;
      }
      out.push_back(std::move(k));
    }
  }
  return out;
}

struct CurateConfig {
  double cut_threshold = 0.3;
  double sim_threshold = 0.9;
  std::size_t max_cluster = 6;
  std::size_t clip_frames = 8;
  // Captions missing clips with describe_clip instead of the placeholder.
  bool caption_missing = false;
  std::size_t threads = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(cut_threshold > 0)) throw ValidationError("curate: cut_threshold must be positive");
    if (!(sim_threshold > 0 && sim_threshold < 1)) throw ValidationError("curate: sim_threshold must lie in (0, 1)");
    if (max_cluster < 2) throw ValidationError("curate: max_cluster must be at least 2");
    if (clip_frames == 0) throw ValidationError("curate: clip_frames must be positive");
  }
};

struct CurateResult {
  std::vector<Clip> clips;  // sorted by id, embeddings filled
  std::vector<std::vector<std::size_t>> memberships;
  std::vector<Cluster> clusters;  // clusters with at least two members
  std::vector<TripletSkeleton> skeletons;
  std::vector<RewriteRecord> rewrites;
  std::vector<world::Triplet> triplets;
};

// Segment, embed, cluster, pick targets, pair and rewrite. A pure function of
// (videos, config, seed) for deterministic embedders and rewriters.
inline CurateResult curate(const std::vector<Clip>& videos, const Embedder& embedder, Rewriter& rewriter,
                           const CurateConfig& cfg) {
  cfg.validate();
  CurateResult r;
  for (const auto& v : videos)
    for (auto& c : segment_shots(v, cfg.clip_frames, cfg.cut_threshold)) r.clips.push_back(std::move(c));
  std::sort(r.clips.begin(), r.clips.end(), [](const Clip& a, const Clip& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < r.clips.size(); ++i)
    if (r.clips[i].id == r.clips[i - 1].id) throw ValidationError("curate: duplicate clip id " + r.clips[i].id);
  for (std::size_t i = 1; i < r.clips.size(); ++i) world::require_same_dims("curate", r.clips[0].frames, r.clips[i].frames);
  if (cfg.caption_missing)
    for (auto& c : r.clips)
      if (!c.caption) c.caption = describe_clip(c.frames);

  embed_clips(r.clips, embedder, cfg.threads);
  std::vector<std::vector<double>> emb;
  for (const auto& c : r.clips) emb.push_back(*c.embedding);
  r.memberships = cluster_clips(emb, cfg.sim_threshold, cfg.max_cluster);
  const SimilarityMatrix sim = similarity_matrix(emb);
  for (const auto& m : r.memberships)
    if (m.size() >= 2) r.clusters.push_back(make_cluster(m, sim));
  r.skeletons = build_triplets(r.clusters, r.clips);

  std::map<std::string, const Clip*> by_id;
  for (const auto& c : r.clips) by_id[c.id] = &c;
  for (std::size_t i = 0; i < r.skeletons.size(); ++i) {
    const auto& k = r.skeletons[i];
    RewriteRequest req{k.template_text, world::reasoning_type_of(world::Operator::narrative), world::Operator::narrative,
                       num::counter_key(cfg.seed, 0x63757261ULL, i)};
    RewriteRecord rec = rewrite_instruction(req, rewriter);
    world::Triplet t;
    t.id = world::triplet_id(world::Subset::in_context, i);
    t.subset = world::Subset::in_context;
    t.source = by_id.at(k.source_id)->frames;
    t.target = by_id.at(k.target_id)->frames;
    t.instruction = world::make_instruction(world::Operator::narrative, {});
    t.instruction.literal = k.template_text;
    t.instruction.text = rec.text;
    t.curation = world::CurationInfo{k.source_id, k.target_id, k.template_text, rec.text};
    r.triplets.push_back(std::move(t));
    r.rewrites.push_back(std::move(rec));
  }
  return r;
}

// Synthetic movies for toy mode. Shots alternate between dim and bright
// settings so every junction is a cut at the default threshold, and a few
// recurring settings per polarity give the clustering something to find.
inline std::vector<Clip> synth_movies(std::size_t n_movies, std::size_t shots_per_movie, const world::VideoDims& dims,
                                      std::uint64_t seed, std::size_t settings_per_polarity = 3) {
  if (n_movies == 0 || shots_per_movie == 0 || settings_per_polarity == 0)
    throw ValidationError("synth_movies: counts must be positive");
  std::vector<Clip> out;
  for (std::size_t m = 0; m < n_movies; ++m) {
    std::vector<world::SceneParams> settings;
    for (std::size_t s = 0; s < 2 * settings_per_polarity; ++s) {
      world::SceneParams p = world::random_scene(dims, num::counter_key(seed, 0x73657474ULL, m, s));
      num::Rng rng(num::counter_key(seed, 0x706f6c61ULL, m, s));
      const bool bright = s % 2 == 1;
      p.background = bright ? rng.uniform(0.6, 0.7) : rng.uniform(0.03, 0.12);
      for (auto& o : p.objects) o.intensity = bright ? rng.uniform(0.0, 0.15) : rng.uniform(0.8, 0.95);
      settings.push_back(p);
    }
    std::vector<double> values;
    for (std::size_t k = 0; k < shots_per_movie; ++k) {
      num::Rng rng(num::counter_key(seed, 0x73686f74ULL, m, k));
      world::SceneParams p = settings[2 * rng.below(settings_per_polarity) + k % 2];
      p.background = std::clamp(p.background + rng.uniform(-0.02, 0.02), 0.0, 1.0);
      for (auto& o : p.objects) o.intensity = std::clamp(o.intensity + rng.uniform(-0.04, 0.04), 0.0, 1.0);
      const world::Video shot = world::render_scene(p);
      values.insert(values.end(), shot.values().begin(), shot.values().end());
    }
    char id[32];
    std::snprintf(id, sizeof id, "movie-%03zu", m);
    out.push_back({id, world::Video({dims.frames * shots_per_movie, dims.height, dims.width}, std::move(values)),
                   std::nullopt, std::nullopt});
  }
  return out;
}

}  // namespace revise::curator
