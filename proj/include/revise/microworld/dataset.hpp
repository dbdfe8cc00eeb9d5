#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "revise/error.hpp"
#include "revise/microworld/edit.hpp"
#include "revise/microworld/instruction.hpp"
#include "revise/microworld/scene.hpp"
#include "revise/microworld/video.hpp"
#include "revise/numcore/rng.hpp"

namespace revise::world {

enum class Subset { editing, in_context };

inline std::string to_string(Subset s) { return s == Subset::editing ? "editing" : "in_context"; }

inline Subset parse_subset(const std::string& s) {
  if (s == "editing") return Subset::editing;
  if (s == "in_context") return Subset::in_context;
  throw ValidationError("unknown subset '" + s + "'");
}

// Provenance recorded by the curation pipeline.
struct CurationInfo {
  std::string source_clip_id;
  std::string target_clip_id;
  std::string literal_instruction;
  std::string rewritten_instruction;

  bool operator==(const CurationInfo&) const = default;
};

struct Triplet {
  std::string id;
  Subset subset = Subset::editing;
  Video source;
  EditInstruction instruction;
  Video target;
  std::optional<CurationInfo> curation;

  bool operator==(const Triplet&) const = default;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  bool operator==(const SplitManifest&) const = default;
};

struct Dataset {
  std::vector<Triplet> triplets;
  SplitManifest split;

  const Triplet& by_id(const std::string& id) const {
    for (const auto& t : triplets)
      if (t.id == id) return t;
    throw ValidationError("dataset: no triplet '" + id + "'");
  }

  std::vector<Triplet> select(const std::vector<std::string>& ids) const {
    std::vector<Triplet> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(by_id(id));
    return out;
  }
};

inline std::string triplet_id(Subset subset, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06zu", subset == Subset::editing ? "edit" : "ctx", index);
  return buf;
}

// Floor for validation and test, remainder to train.
inline std::array<std::size_t, 3> split_counts(std::size_t n, const SplitRatios& r) {
  if (r.train < 0 || r.val < 0 || r.test < 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must be non-negative and sum to 1");
  }
  const auto fl = [&](double x) { return static_cast<std::size_t>(std::floor(static_cast<double>(n) * x + 1e-9)); };
  const std::size_t val = fl(r.val), test = fl(r.test);
  return {n - val - test, val, test};
}

// The i-th triplet depends only on (seed, i): reasoning types cycle so every
// category is balanced within one, operators cycle within a category, and
// parameters and scene are drawn from a stream keyed by (seed, i).
inline Triplet make_triplet(std::uint64_t seed, std::size_t index, Subset subset, const VideoDims& dims) {
  const ReasoningType type = kReasoningTypes[index % kReasoningTypes.size()];
  const auto ops = operators_of(type);
  const Operator op = ops[(index / kReasoningTypes.size()) % ops.size()];
  num::Rng rng(num::counter_key(seed, 0x7269706cULL, index));
  const auto catalog = parameter_catalog(op);
  Parameters params = catalog[rng.below(catalog.size())];
  Triplet t;
  t.id = triplet_id(subset, index);
  t.subset = subset;
  t.source = render_scene(random_scene(dims, num::counter_key(seed, 0x7363656eULL, index)));
  t.instruction = make_instruction(op, std::move(params));
  t.target = apply_oracle_edit(t.source, t.instruction);
  return t;
}

inline Dataset gen_dataset(std::size_t n, std::uint64_t seed, Subset subset, const SplitRatios& ratios,
                           const VideoDims& dims = {}, std::size_t threads = 1) {
  if (n == 0) throw ValidationError("gen_dataset: n must be positive");
  const auto counts = split_counts(n, ratios);
  Dataset ds;
  ds.triplets.resize(n);
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) ds.triplets[i] = make_triplet(seed, i, subset, dims);
  } else {
    // Shards by contiguous id range.
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i)
          ds.triplets[i] = make_triplet(seed, i, subset, dims);
      });
    }
    for (auto& th : pool) th.join();
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  num::Rng rng(num::counter_key(seed, 0x73706c74ULL));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (std::size_t k = 0; k < n; ++k) {
    const std::string& id = ds.triplets[order[k]].id;
    if (k < counts[0]) ds.split.train.push_back(id);
    else if (k < counts[0] + counts[1]) ds.split.val.push_back(id);
    else ds.split.test.push_back(id);
  }
  for (auto* ids : {&ds.split.train, &ds.split.val, &ds.split.test}) std::sort(ids->begin(), ids->end());
  return ds;
}

inline nlohmann::json triplet_to_json(const Triplet& t) {
  nlohmann::json j;
  j["id"] = t.id;
  j["subset"] = to_string(t.subset);
  j["reasoning_type"] = to_string(t.instruction.reasoning_type);
  j["operator_id"] = to_string(t.instruction.op);
  j["parameters"] = t.instruction.parameters;
  j["instruction_text"] = t.instruction.text;
  j["source"] = video_to_json(t.source);
  j["target"] = video_to_json(t.target);
  if (t.curation) {
    j["source_clip_id"] = t.curation->source_clip_id;
    j["target_clip_id"] = t.curation->target_clip_id;
    j["literal_instruction"] = t.curation->literal_instruction;
    j["rewritten_instruction"] = t.curation->rewritten_instruction;
  }
  return j;
}

inline Triplet triplet_from_json(const nlohmann::json& j) {
  for (const char* key : {"id", "subset", "reasoning_type", "operator_id", "parameters", "instruction_text", "source",
                          "target"}) {
    if (!j.contains(key)) throw ValidationError(std::string("triplet record: missing field '") + key + "'");
  }
  Triplet t;
  t.id = j.at("id").get<std::string>();
  t.subset = parse_subset(j.at("subset").get<std::string>());
  const Operator op = parse_operator(j.at("operator_id").get<std::string>());
  t.instruction = make_instruction(op, j.at("parameters").get<Parameters>());
  t.instruction.reasoning_type = parse_reasoning_type(j.at("reasoning_type").get<std::string>());
  t.instruction.text = j.at("instruction_text").get<std::string>();
  t.source = video_from_json(j.at("source"));
  t.target = video_from_json(j.at("target"));
  require_same_dims("triplet record", t.source, t.target);
  if (j.contains("source_clip_id")) {
    CurationInfo c;
    c.source_clip_id = j.at("source_clip_id").get<std::string>();
    c.target_clip_id = j.value("target_clip_id", "");
    c.literal_instruction = j.value("literal_instruction", "");
    c.rewritten_instruction = j.value("rewritten_instruction", "");
    t.instruction.literal = c.literal_instruction;
    t.curation = std::move(c);
  }
  return t;
}

// One JSON object per line. Doubles are written in shortest round-trip form.
inline std::string to_jsonl(const std::vector<Triplet>& triplets) {
  std::string out;
  for (const auto& t : triplets) {
    out += triplet_to_json(t).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Triplet> from_jsonl(const std::string& text) {
  std::vector<Triplet> out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(triplet_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace revise::world
