#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "revise/curator/pipeline.hpp"
#include "revise/error.hpp"
#include "revise/flowgen/model.hpp"
#include "revise/numcore/checkpoint.hpp"
#include "revise/objectives/train.hpp"
#include "revise/reflector/pretrain.hpp"
#include "revise/rvebench/evaluate.hpp"

namespace revise::cli {

inline constexpr const char* kVersion = "revise 0.1.0";

// Every accepted key with its default. Files and overrides may only set keys
// that appear here, with a value of the same JSON type.
inline nlohmann::json default_config() {
  return nlohmann::json::parse(R"({
  "output_dir": "runs/default",
  "world": {
    "frames": 8, "height": 8, "width": 8,
    "n": 640, "seed": 42, "subset": "editing", "threads": 1,
    "split": {"train": 0.8, "val": 0.1, "test": 0.1}
  },
  "train": {
    "objective": "sft", "lambda": 0.75, "lambda_c": 0.2,
    "optimizer": "adamw", "learning_rate": 0.002, "weight_decay": 0.0001, "warmup_steps": 0,
    "batch_size": 16, "epochs": 60, "seed": 0, "cfg_drop": 0.2, "frame_k": 2,
    "hidden": 256, "val_samples": 64, "val_steps": 16, "record_wall_clock": true,
    "critic_checkpoint": "", "base_checkpoint": "", "run_name": ""
  },
  "critic": {
    "dataset": "constructed", "triplets": 1000, "seed": 5,
    "epochs": 80, "batch_size": 32, "learning_rate": 0.01, "heldout_fraction": 0.2,
    "gate": 0.9, "expectation_weight": 10.0, "k": 2, "hidden": 64,
    "thresholds": {"ea": 7.0, "pc": 7.0, "gn": 7.0, "gr": 7.0}
  },
  "eval": {
    "judge": "oracle", "mode": "editing", "split": "test", "edits": "model",
    "checkpoint": "", "name": "", "steps": 16, "seed": 0,
    "concurrency": 1, "failure_budget": 0.1, "similarity": true,
    "endpoint": "", "model": "gpt-4o", "api_key_env": "", "cache_dir": "",
    "attempts": 3, "timeout_s": 60, "frames": 2, "prompt_template": ""
  },
  "curate": {
    "manifest": "", "toy_movies": 4, "toy_shots": 12,
    "cut_threshold": 0.3, "sim_threshold": 0.9, "max_cluster": 6, "clip_frames": 8,
    "caption_missing": true, "rewriter": "builtin", "seed": 0, "threads": 1
  },
  "sweep": {
    "objective": "uso", "lambdas": [0.10, 0.25, 0.50, 0.75, 1.00]
  }
})");
}

namespace detail {

inline bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) {
    // An integer default only accepts integers.
    return !(a.is_number_integer() && !b.is_number_integer());
  }
  return a.type() == b.type();
}

inline std::string kind_name(const nlohmann::json& j) {
  if (j.is_number_integer()) return "integer";
  return j.type_name();
}

}  // namespace detail

// Overlays `src` onto `dst`, rejecting keys absent from `dst` and values of
// another type. Arrays are replaced whole.
inline void merge_config(nlohmann::json& dst, const nlohmann::json& src, const std::string& path = "") {
  if (!src.is_object()) throw ValidationError("config" + (path.empty() ? "" : " '" + path + "'") + ": expected an object");
  for (const auto& [key, value] : src.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!dst.contains(key)) throw ValidationError("config: unknown key '" + where + "'");
    auto& slot = dst[key];
    if (slot.is_object()) {
      merge_config(slot, value, where);
    } else {
      if (!detail::same_kind(slot, value)) {
        throw ValidationError("config: key '" + where + "' expects " + detail::kind_name(slot) + ", got " +
                              detail::kind_name(value));
      }
      slot = value;
    }
  }
}

// "a.b.c=value". The value is read as JSON when it parses, otherwise as a
// plain string.
inline void apply_override(nlohmann::json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) parts.push_back(rest.substr(0, pos));
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = nlohmann::json{{*it, patch}};
  merge_config(cfg, patch);
}

inline nlohmann::json load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  nlohmann::json cfg = default_config();
  if (!path.empty()) {
    const auto parsed = nlohmann::json::parse(num::read_file(path), nullptr, false);
    if (parsed.is_discarded()) throw ValidationError("config " + path + ": not valid JSON");
    merge_config(cfg, parsed);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

struct RunConfig {
  nlohmann::json raw;
  std::filesystem::path output_dir;
  world::VideoDims dims;
  std::size_t n = 0;
  std::uint64_t world_seed = 0;
  world::Subset subset = world::Subset::editing;
  world::SplitRatios split;
  std::size_t world_threads = 1;
  obj::TrainConfig train;
  std::string train_run_name;
  flow::FlowConfig flow;
  std::string critic_dataset;
  std::size_t critic_triplets = 0;
  critic::CriticConfig critic;
  critic::PretrainConfig pretrain;
  critic::Thresholds thresholds;
  nlohmann::json eval;
  curator::CurateConfig curate;
  std::string curate_manifest;
  std::size_t toy_movies = 0;
  std::size_t toy_shots = 0;
  std::string rewriter;
  obj::Objective sweep_objective = obj::Objective::uso;
  std::vector<double> lambdas;
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  c.raw = j;
  c.output_dir = j.at("output_dir").get<std::string>();
  const auto& w = j.at("world");
  c.dims = {w.at("frames").get<std::size_t>(), w.at("height").get<std::size_t>(), w.at("width").get<std::size_t>()};
  if (c.dims.size() == 0) throw ValidationError("config: world dims must be positive");
  c.n = w.at("n").get<std::size_t>();
  c.world_seed = w.at("seed").get<std::uint64_t>();
  c.subset = world::parse_subset(w.at("subset").get<std::string>());
  c.split = {w.at("split").at("train").get<double>(), w.at("split").at("val").get<double>(),
             w.at("split").at("test").get<double>()};
  c.world_threads = w.at("threads").get<std::size_t>();

  const auto& t = j.at("train");
  c.train.objective = obj::parse_objective(t.at("objective").get<std::string>());
  c.train.lambda = t.at("lambda").get<double>();
  c.train.lambda_c = t.at("lambda_c").get<double>();
  c.train.optimizer.kind = num::parse_optimizer_kind(t.at("optimizer").get<std::string>());
  c.train.optimizer.learning_rate = t.at("learning_rate").get<double>();
  c.train.optimizer.weight_decay = t.at("weight_decay").get<double>();
  c.train.optimizer.warmup_steps = t.at("warmup_steps").get<std::size_t>();
  c.train.batch_size = t.at("batch_size").get<std::size_t>();
  c.train.epochs = t.at("epochs").get<std::size_t>();
  c.train.seed = t.at("seed").get<std::uint64_t>();
  c.train.cfg_drop = t.at("cfg_drop").get<double>();
  c.train.frame_k = t.at("frame_k").get<std::size_t>();
  c.train.val_samples = t.at("val_samples").get<std::size_t>();
  c.train.val_steps = t.at("val_steps").get<std::size_t>();
  c.train.record_wall_clock = t.at("record_wall_clock").get<bool>();
  c.train.critic_checkpoint = t.at("critic_checkpoint").get<std::string>();
  c.train.base_checkpoint = t.at("base_checkpoint").get<std::string>();
  if (!c.train.base_checkpoint.empty() && !std::filesystem::exists(c.train.base_checkpoint))
    throw ValidationError("config: train.base_checkpoint " + c.train.base_checkpoint + " not found");
  c.train_run_name = t.at("run_name").get<std::string>();
  c.train.validate();
  c.flow.dims = c.dims;
  c.flow.hidden = t.at("hidden").get<std::size_t>();
  c.flow.validate();

  const auto& k = j.at("critic");
  c.critic_dataset = k.at("dataset").get<std::string>();
  if (c.critic_dataset != "constructed" && c.critic_dataset != "separable")
    throw ValidationError("config: critic.dataset must be 'constructed' or 'separable'");
  c.critic_triplets = k.at("triplets").get<std::size_t>();
  c.critic.dims = c.dims;
  c.critic.k = k.at("k").get<std::size_t>();
  c.critic.hidden = k.at("hidden").get<std::size_t>();
  c.pretrain.epochs = k.at("epochs").get<std::size_t>();
  c.pretrain.batch_size = k.at("batch_size").get<std::size_t>();
  c.pretrain.heldout_fraction = k.at("heldout_fraction").get<double>();
  c.pretrain.gate = k.at("gate").get<double>();
  c.pretrain.expectation_weight = k.at("expectation_weight").get<double>();
  c.pretrain.optimizer.learning_rate = k.at("learning_rate").get<double>();
  c.pretrain.seed = k.at("seed").get<std::uint64_t>();
  const auto& th = k.at("thresholds");
  c.thresholds = {th.at("ea").get<double>(), th.at("pc").get<double>(), th.at("gn").get<double>(), th.at("gr").get<double>()};
  c.thresholds.validate();

  c.eval = j.at("eval");
  const std::string judge = c.eval.at("judge").get<std::string>();
  if (judge != "oracle" && judge != "remote") throw ValidationError("config: eval.judge must be 'oracle' or 'remote'");
  if (judge == "remote" && c.eval.at("endpoint").get<std::string>().empty())
    throw ValidationError("config: eval.endpoint is required for the remote judge");
  bench::parse_mode(c.eval.at("mode").get<std::string>());
  const std::string split = c.eval.at("split").get<std::string>();
  if (split != "train" && split != "val" && split != "test")
    throw ValidationError("config: eval.split must be train, val or test");
  const std::string edits = c.eval.at("edits").get<std::string>();
  if (edits != "model" && edits != "ground_truth") throw ValidationError("config: eval.edits must be 'model' or 'ground_truth'");
  const std::string tmpl = c.eval.at("prompt_template").get<std::string>();
  if (!tmpl.empty() && !std::filesystem::exists(tmpl)) throw ValidationError("config: eval.prompt_template " + tmpl + " not found");

  const auto& u = j.at("curate");
  c.curate_manifest = u.at("manifest").get<std::string>();
  if (!c.curate_manifest.empty() && !std::filesystem::exists(c.curate_manifest))
    throw ValidationError("config: curate.manifest " + c.curate_manifest + " not found");
  c.toy_movies = u.at("toy_movies").get<std::size_t>();
  c.toy_shots = u.at("toy_shots").get<std::size_t>();
  c.curate.cut_threshold = u.at("cut_threshold").get<double>();
  c.curate.sim_threshold = u.at("sim_threshold").get<double>();
  c.curate.max_cluster = u.at("max_cluster").get<std::size_t>();
  c.curate.clip_frames = u.at("clip_frames").get<std::size_t>();
  c.curate.caption_missing = u.at("caption_missing").get<bool>();
  c.curate.seed = u.at("seed").get<std::uint64_t>();
  c.curate.threads = u.at("threads").get<std::size_t>();
  c.curate.validate();
  c.rewriter = u.at("rewriter").get<std::string>();
  if (c.rewriter != "builtin" && c.rewriter != "remote")
    throw ValidationError("config: curate.rewriter must be 'builtin' or 'remote'");

  const auto& s = j.at("sweep");
  c.sweep_objective = obj::parse_objective(s.at("objective").get<std::string>());
  for (const auto& v : s.at("lambdas")) {
    if (!v.is_number()) throw ValidationError("config: sweep.lambdas must hold numbers");
    c.lambdas.push_back(v.get<double>());
  }
  return c;
}

}  // namespace revise::cli
