#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "revise/error.hpp"

namespace revise::curator {

// Symmetric cosine-similarity matrix over unit vectors with an exact unit
// diagonal.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;

  SimilarityMatrix(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
    if (values_.size() != n * n) throw ValidationError("similarity matrix: expected n*n entries");
    for (std::size_t i = 0; i < n; ++i) {
      if (at(i, i) != 1.0) throw ValidationError("similarity matrix: diagonal must be exactly 1");
      for (std::size_t j = 0; j < n; ++j) {
        if (!(at(i, j) >= -1.0 && at(i, j) <= 1.0)) throw ValidationError("similarity matrix: entry outside [-1, 1]");
        if (std::abs(at(i, j) - at(j, i)) > 1e-9) throw ValidationError("similarity matrix: not symmetric");
      }
    }
  }

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("embedding length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline SimilarityMatrix similarity_matrix(const std::vector<std::vector<double>>& unit) {
  const std::size_t n = unit.size();
  std::vector<double> v(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) v[i * n + j] = v[j * n + i] = std::clamp(dot(unit[i], unit[j]), -1.0, 1.0);
  return SimilarityMatrix(n, std::move(v));
}

// Greedy pass in input order: each embedding joins the first cluster whose
// centroid has cosine >= sim_threshold with it and which still has room,
// otherwise it founds a new cluster. Returns member indices per cluster.
inline std::vector<std::vector<std::size_t>> cluster_clips(const std::vector<std::vector<double>>& embeddings,
                                                           double sim_threshold = 0.9, std::size_t max_size = 6) {
  if (!(sim_threshold > 0 && sim_threshold < 1)) throw ValidationError("cluster_clips: threshold must lie in (0, 1)");
  if (max_size == 0) throw ValidationError("cluster_clips: max_size must be positive");
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::vector<double>> sums;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const auto& e = embeddings[i];
    double en = std::sqrt(dot(e, e));
    bool placed = false;
    for (std::size_t c = 0; c < clusters.size() && !placed; ++c) {
      if (clusters[c].size() >= max_size) continue;
      const double sn = std::sqrt(dot(sums[c], sums[c]));
      const double cosine = sn > 0 && en > 0 ? dot(sums[c], e) / (sn * en) : 0.0;
      if (cosine >= sim_threshold) {
        clusters[c].push_back(i);
        for (std::size_t k = 0; k < e.size(); ++k) sums[c][k] += e[k];
        placed = true;
      }
    }
    if (!placed) {
      clusters.push_back({i});
      sums.push_back(e);
    }
  }
  return clusters;
}

// Mean similarity of a member to the other members, summed in ascending
// member order.
inline double mean_similarity(const std::vector<std::size_t>& sorted_members, std::size_t m, const SimilarityMatrix& sim) {
  double s = 0.0;
  for (std::size_t o : sorted_members)
    if (o != m) s += sim.at(m, o);
  return s / static_cast<double>(sorted_members.size() - 1);
}

// Member with the lowest mean similarity to the others; ties go to the
// smallest index.
inline std::size_t select_target(std::vector<std::size_t> members, const SimilarityMatrix& sim) {
  if (members.size() < 2) throw ValidationError("select_target: cluster needs at least two members");
  std::sort(members.begin(), members.end());
  if (std::adjacent_find(members.begin(), members.end()) != members.end())
    throw ValidationError("select_target: duplicate member");
  if (members.back() >= sim.size()) throw ValidationError("select_target: member outside the similarity matrix");
  std::size_t best = members[0];
  double best_mean = mean_similarity(members, best, sim);
  for (std::size_t i = 1; i < members.size(); ++i) {
    const double m = mean_similarity(members, members[i], sim);
    if (m < best_mean) {
      best_mean = m;
      best = members[i];
    }
  }
  return best;
}

struct Cluster {
  std::vector<std::size_t> members;
  std::size_t target = 0;
  std::vector<std::size_t> sources;
};

inline Cluster make_cluster(std::vector<std::size_t> members, const SimilarityMatrix& sim) {
  Cluster c;
  c.target = select_target(members, sim);
  std::sort(members.begin(), members.end());
  for (std::size_t m : members)
    if (m != c.target) c.sources.push_back(m);
  c.members = std::move(members);
  return c;
}

}  // namespace revise::curator
