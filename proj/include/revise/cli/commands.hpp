#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "revise/cli/config.hpp"
#include "revise/cli/manifest.hpp"
#include "revise/curator/curator.hpp"
#include "revise/numcore/checkpoint.hpp"
#include "revise/objectives/train.hpp"
#include "revise/reflector/pretrain.hpp"
#include "revise/reflector/prompt.hpp"
#include "revise/rvebench/evaluate.hpp"

namespace revise::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kValidation = 2, kGate = 3, kTransport = 4 };

// Runs `body` under a manifest: "complete" on return, "failed" on any
// exception, which is rethrown.
template <typename Body>
auto with_manifest(RunManifest& m, Body&& body) {
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      m.finish("complete");
    } else {
      auto r = body();
      m.finish("complete");
      return r;
    }
  } catch (const std::exception& e) {
    m.note("error", e.what());
    m.finish("failed");
    throw;
  }
}

inline fs::path data_dir(const RunConfig& c) { return c.output_dir / "data"; }

inline std::vector<world::Triplet> load_split(const RunConfig& c, const std::string& split) {
  const fs::path p = data_dir(c) / (split + ".jsonl");
  if (!fs::exists(p)) throw ValidationError("dataset split " + p.string() + " not found; run generate-data first");
  return world::from_jsonl(num::read_file(p));
}

// --- generate-data ---------------------------------------------------------

inline void cmd_generate_data(const RunConfig& c, std::ostream& log) {
  const fs::path dir = data_dir(c);
  RunManifest m(dir, "generate-data", c.raw, c.world_seed);
  with_manifest(m, [&] {
    const world::Dataset ds = world::gen_dataset(c.n, c.world_seed, c.subset, c.split, c.dims, c.world_threads);
    const std::map<std::string, const std::vector<std::string>*> parts = {
        {"train", &ds.split.train}, {"val", &ds.split.val}, {"test", &ds.split.test}};
    for (const auto& [name, ids] : parts) {
      const auto rows = ds.select(*ids);
      const fs::path p = dir / (name + ".jsonl");
      num::write_file_atomic(p, world::to_jsonl(rows));
      m.artifact(name, p);
      log << name << ": " << rows.size() << " triplets -> " << p.string() << '\n';
    }
    nlohmann::json split{{"train", ds.split.train}, {"val", ds.split.val}, {"test", ds.split.test}};
    num::write_file_atomic(dir / "split.json", split.dump(2) + "\n");
    m.artifact("split", dir / "split.json");
  });
}

// --- pretrain-critic -------------------------------------------------------

struct PretrainOutcome {
  critic::PretrainReport report;
  fs::path checkpoint;
};

inline std::string accuracy_csv(const critic::PretrainReport& r, double gate) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "split,examples,accuracy\ntrain,%zu,%.6f\nheldout,%zu,%.6f\ngate,,%.6f\n",
                r.train_examples, r.train_accuracy, r.heldout_examples, r.heldout_accuracy, gate);
  return buf;
}

inline PretrainOutcome cmd_pretrain_critic(const RunConfig& c, std::ostream& log) {
  const fs::path dir = c.output_dir / "critic";
  RunManifest m(dir, "pretrain-critic", c.raw, c.pretrain.seed);
  return with_manifest(m, [&] {
    const auto data = c.critic_dataset == "separable"
                          ? critic::build_separable_dataset(c.critic_triplets, c.world_seed, c.thresholds)
                          : critic::build_critic_dataset(c.critic_triplets, c.world_seed, c.thresholds, c.dims);
    auto result = critic::pretrain_critic(data, c.critic, c.pretrain);
    PretrainOutcome out{result.report, dir / "critic.ckpt"};
    num::save_checkpoint(result.critic.params, out.checkpoint);
    num::write_file_atomic(dir / "accuracy.csv", accuracy_csv(result.report, c.pretrain.gate));
    m.artifact("checkpoint", out.checkpoint);
    m.artifact("accuracy", dir / "accuracy.csv");
    m.note("checkpoint_sha256", bench::sha256_hex(num::read_file(out.checkpoint)));
    m.note("heldout_accuracy", result.report.heldout_accuracy);
    log << "critic held-out accuracy " << result.report.heldout_accuracy << " (gate " << c.pretrain.gate << ")\n";
    if (!result.report.ready) {
      throw GateError("pretrain-critic: held-out accuracy " + std::to_string(result.report.heldout_accuracy) +
                      " below gate " + std::to_string(c.pretrain.gate));
    }
    return out;
  });
}

// --- train -----------------------------------------------------------------

inline fs::path critic_path(const RunConfig& c, const obj::TrainConfig& tc) {
  return tc.critic_checkpoint.empty() ? c.output_dir / "critic" / "critic.ckpt" : fs::path(tc.critic_checkpoint);
}

inline std::optional<critic::CriticModel> load_critic_for(const RunConfig& c, obj::TrainConfig& tc) {
  if (tc.objective == obj::Objective::sft) return std::nullopt;
  const fs::path p = critic_path(c, tc);
  if (!fs::exists(p)) {
    throw ValidationError("objective " + obj::to_string(tc.objective) + " needs a critic checkpoint; " + p.string() +
                          " not found");
  }
  tc.critic_checkpoint = p.string();
  return critic::critic_from_checkpoint(num::load_checkpoint(p));
}

// A fresh network, or the base checkpoint with its optimizer state cleared.
inline flow::FlowModel initial_generator(const RunConfig& c, const obj::TrainConfig& tc) {
  if (tc.base_checkpoint.empty()) return flow::init_flow_model(c.flow, tc.seed);
  auto m = flow::flow_model_from_checkpoint(num::load_checkpoint(tc.base_checkpoint));
  if (!(m.config.dims == c.dims))
    throw ValidationError("base checkpoint " + tc.base_checkpoint + " was trained on other video dims");
  m.params.reset_optimizer_state();
  return m;
}

struct TrainOutcome {
  obj::TrainLog log;
  fs::path checkpoint;
};

// One training run into `dir`. The checkpoint is rewritten atomically after
// every epoch, so an interrupted run leaves the last finished epoch behind.
inline TrainOutcome train_into(const RunConfig& c, obj::TrainConfig tc, const fs::path& dir, std::ostream& log) {
  const auto critic_model = load_critic_for(c, tc);
  const auto train_set = load_split(c, "train");
  const auto val_set = load_split(c, "val");
  RunManifest m(dir, "train", c.raw, tc.seed);
  return with_manifest(m, [&] {
    const fs::path ckpt = dir / "model.ckpt";
    m.note("train", obj::run_metadata(tc, ckpt.string()));
    m.artifact("checkpoint", ckpt);
    auto result = obj::train(tc, initial_generator(c, tc), critic_model ? &*critic_model : nullptr,
                             train_set, val_set, [&](std::size_t epoch, const obj::TrainResult& r) {
                               num::save_checkpoint(r.model.params, ckpt);
                               num::write_file_atomic(dir / "steps.csv", r.log.steps_csv());
                               m.note("epochs_done", epoch + 1);
                             });
    if (tc.epochs == 0) num::save_checkpoint(result.model.params, ckpt);
    num::write_file_atomic(dir / "steps.csv", result.log.steps_csv());
    num::write_file_atomic(dir / "validation.csv", result.log.validation_csv());
    m.artifact("steps", dir / "steps.csv");
    m.artifact("validation", dir / "validation.csv");
    if (!result.log.validation.empty()) {
      const auto& v = result.log.validation.back().mean;
      log << obj::to_string(tc.objective) << " lambda " << tc.lambda << ": validation ea " << v.ea << " pc " << v.pc
          << " gn " << v.gn << " gr " << v.gr << '\n';
    }
    return TrainOutcome{std::move(result.log), ckpt};
  });
}

inline std::string train_run_name(const RunConfig& c) {
  return c.train_run_name.empty() ? obj::to_string(c.train.objective) : c.train_run_name;
}

inline TrainOutcome cmd_train(const RunConfig& c, std::ostream& log) {
  return train_into(c, c.train, c.output_dir / "train" / train_run_name(c), log);
}

// --- evaluate --------------------------------------------------------------

inline std::unique_ptr<bench::Judge> make_judge(const RunConfig& c, const fs::path& default_cache) {
  if (c.eval.at("judge").get<std::string>() == "oracle") return std::make_unique<bench::OracleJudge>();
  bench::RemoteJudgeConfig rc;
  rc.endpoint = c.eval.at("endpoint").get<std::string>();
  rc.model = c.eval.at("model").get<std::string>();
  rc.api_key_env = c.eval.at("api_key_env").get<std::string>();
  rc.cache_dir = c.eval.at("cache_dir").get<std::string>();
  if (rc.cache_dir.empty()) rc.cache_dir = default_cache.string();
  rc.attempts = c.eval.at("attempts").get<int>();
  rc.timeout_s = c.eval.at("timeout_s").get<int>();
  rc.frames = c.eval.at("frames").get<std::size_t>();
  const std::string tmpl = c.eval.at("prompt_template").get<std::string>();
  return std::make_unique<bench::RemoteJudge>(rc, tmpl.empty() ? critic::builtin_prompt_template()
                                                               : critic::load_prompt_template(tmpl));
}

inline bench::EvalConfig eval_config(const RunConfig& c, const bench::Embedder* embedder) {
  bench::EvalConfig ec;
  ec.mode = bench::parse_mode(c.eval.at("mode").get<std::string>());
  ec.steps = c.eval.at("steps").get<std::size_t>();
  ec.seed = c.eval.at("seed").get<std::uint64_t>();
  ec.concurrency = c.eval.at("concurrency").get<std::size_t>();
  ec.failure_budget = c.eval.at("failure_budget").get<double>();
  ec.embedder = c.eval.at("similarity").get<bool>() ? embedder : nullptr;
  return ec;
}

inline void write_eval_outputs(const fs::path& dir, const bench::EvalRun& run, RunManifest& m) {
  num::write_file_atomic(dir / "results.csv", bench::results_csv(run.results));
  m.artifact("results", dir / "results.csv");
  std::string errors = "id,error\n";
  for (const auto& e : run.errors) errors += e.id + ",\"" + e.message + "\"\n";
  num::write_file_atomic(dir / "errors.csv", errors);
  m.artifact("errors", dir / "errors.csv");
  if (run.results.empty()) return;
  const auto report = bench::aggregate(run.results);
  num::write_file_atomic(dir / "report.csv", report.csv());
  num::write_file_atomic(dir / "report.txt", report.table());
  m.artifact("report", dir / "report.csv");
  m.artifact("table", dir / "report.txt");
}

// Evaluates the model (or the reference targets) on one split and returns the
// whole-subset report row.
inline bench::ReportRow evaluate_into(const RunConfig& c, const fs::path& checkpoint, const fs::path& dir,
                                      std::ostream& log) {
  const bool ground_truth = c.eval.at("edits").get<std::string>() == "ground_truth";
  const auto data = load_split(c, c.eval.at("split").get<std::string>());
  std::optional<flow::FlowModel> model;
  if (!ground_truth) {
    if (!fs::exists(checkpoint)) throw ValidationError("generator checkpoint " + checkpoint.string() + " not found");
    model = flow::flow_model_from_checkpoint(num::load_checkpoint(checkpoint));
  }
  RunManifest m(dir, "evaluate", c.raw, c.eval.at("seed").get<std::uint64_t>());
  return with_manifest(m, [&] {
    auto judge = make_judge(c, c.output_dir / "eval" / "cache");
    bench::TargetEmbedder embedder;
    const auto ec = eval_config(c, &embedder);
    m.note("judge", judge->name());
    if (!ground_truth) m.artifact("generator", checkpoint);
    bench::EvalRun run;
    try {
      run = ground_truth ? bench::evaluate_with(data, [](const world::Triplet& t) { return t.target; }, *judge, ec)
                         : bench::evaluate(data, *model, *judge, ec);
    } catch (const bench::BudgetExceeded& e) {
      write_eval_outputs(dir, e.partial, m);
      if (e.transport_only()) throw TransportError(e.what());
      throw;
    }
    write_eval_outputs(dir, run, m);
    const auto report = bench::aggregate(run.results);
    log << report.table();
    for (const auto& row : report.rows)
      if (row.category == "all") return row;
    throw ValidationError("evaluate: report has no summary row");
  });
}

inline bench::ReportRow cmd_evaluate(const RunConfig& c, std::ostream& log) {
  std::string name = c.eval.at("name").get<std::string>();
  const std::string judge = c.eval.at("judge").get<std::string>(), mode = c.eval.at("mode").get<std::string>();
  const bool ground_truth = c.eval.at("edits").get<std::string>() == "ground_truth";
  if (name.empty()) name = (ground_truth ? std::string("ground_truth") : train_run_name(c)) + "-" + judge + "-" + mode;
  fs::path ckpt = c.eval.at("checkpoint").get<std::string>();
  if (ckpt.empty()) ckpt = c.output_dir / "train" / train_run_name(c) / "model.ckpt";
  return evaluate_into(c, ckpt, c.output_dir / "eval" / name, log);
}

// --- sweep-lambda ----------------------------------------------------------

inline std::string lambda_label(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", lambda);
  return buf;
}

struct SweepOutcome {
  std::string csv;
  std::vector<std::string> failures;
};

// Train and evaluate once per lambda from the same base seed. Wall-clock
// columns are zeroed so reruns reproduce every file byte for byte.
inline SweepOutcome cmd_sweep_lambda(const RunConfig& c, std::ostream& log) {
  if (c.lambdas.empty()) throw ValidationError("sweep-lambda: lambda list is empty");
  const fs::path dir = c.output_dir / "sweep";
  RunManifest m(dir, "sweep-lambda", c.raw, c.train.seed);
  return with_manifest(m, [&] {
    SweepOutcome out;
    out.csv = "lambda,similarity,ea,pc,gn,gr,overall\n";
    std::string failures = "lambda,error\n";
    for (double lambda : c.lambdas) {
      const std::string label = lambda_label(lambda);
      const fs::path run_dir = dir / ("lambda-" + label);
      try {
        obj::TrainConfig tc = c.train;
        tc.objective = c.sweep_objective;
        tc.lambda = lambda;
        tc.record_wall_clock = false;
        const auto trained = train_into(c, tc, run_dir, log);
        const auto row = evaluate_into(c, trained.checkpoint, run_dir / "eval", log);
        out.csv += label + ',' + bench::detail::opt_num(row.similarity) + ',' + bench::detail::num(row.ea) + ',' +
                   bench::detail::opt_num(row.pc) + ',' + bench::detail::num(row.gn) + ',' +
                   bench::detail::num(row.gr) + ',' + bench::detail::num(row.overall) + '\n';
      } catch (const Error& e) {
        out.failures.push_back(label + ": " + e.what());
        failures += label + ",\"" + std::string(e.what()) + "\"\n";
        out.csv += label + ",,,,,,\n";
        log << "lambda " << label << " failed: " << e.what() << '\n';
      }
    }
    num::write_file_atomic(dir / "sweep.csv", out.csv);
    num::write_file_atomic(dir / "failures.csv", failures);
    m.artifact("table", dir / "sweep.csv");
    m.artifact("failures", dir / "failures.csv");
    m.note("failed_members", out.failures);
    return out;
  });
}

// --- curate ----------------------------------------------------------------

struct CurateOutcome {
  curator::CurateResult result;
  nlohmann::json stats;
  std::vector<std::string> warnings;
};

inline CurateOutcome cmd_curate(const RunConfig& c, std::ostream& log) {
  const fs::path dir = c.output_dir / "curate";
  RunManifest m(dir, "curate", c.raw, c.curate.seed);
  return with_manifest(m, [&] {
    std::vector<curator::Clip> videos =
        c.curate_manifest.empty()
            ? curator::synth_movies(c.toy_movies, c.toy_shots, {c.curate.clip_frames, c.dims.height, c.dims.width},
                                    c.curate.seed)
            : curator::load_clip_manifest(c.curate_manifest);
    if (videos.empty()) throw ValidationError("curate: clip manifest is empty");
    std::unique_ptr<curator::Rewriter> rewriter;
    if (c.rewriter == "remote") {
      bench::RemoteJudgeConfig rc;
      rc.endpoint = c.eval.at("endpoint").get<std::string>();
      rc.model = c.eval.at("model").get<std::string>();
      rc.api_key_env = c.eval.at("api_key_env").get<std::string>();
      rc.attempts = c.eval.at("attempts").get<int>();
      rc.timeout_s = c.eval.at("timeout_s").get<int>();
      rewriter = std::make_unique<curator::RemoteRewriter>(rc);
    } else {
      rewriter = std::make_unique<curator::TemplateRewriter>();
    }
    CurateOutcome out;
    out.result = curator::curate(videos, curator::MeanFrameEmbedder(), *rewriter, c.curate);
    nlohmann::json cuts = nlohmann::json::object();
    for (const auto& v : videos)
      cuts[v.id] = v.frames.dims().frames >= 2 ? curator::detect_cuts(v.frames, c.curate.cut_threshold).size() : 0;
    std::vector<std::size_t> sizes;
    for (const auto& cl : out.result.memberships) sizes.push_back(cl.size());
    for (const auto& r : out.result.rewrites)
      if (r.warning) out.warnings.push_back(*r.warning);
    if (out.result.triplets.empty()) out.warnings.push_back("no cluster has two members; zero triplets written");
    out.stats = {{"videos", videos.size()},
                 {"cuts", cuts},
                 {"clips", out.result.clips.size()},
                 {"cluster_sizes", sizes},
                 {"clusters_used", out.result.clusters.size()},
                 {"triplets", out.result.triplets.size()},
                 {"warnings", out.warnings}};
    num::write_file_atomic(dir / "curated.jsonl", world::to_jsonl(out.result.triplets));
    num::write_file_atomic(dir / "stats.json", out.stats.dump(2) + "\n");
    m.artifact("curated", dir / "curated.jsonl");
    m.artifact("stats", dir / "stats.json");
    for (const auto& w : out.warnings) log << "warning: " << w << '\n';
    log << out.result.triplets.size() << " triplets from " << out.result.clips.size() << " clips\n";
    return out;
  });
}

// Maps library errors onto process exit codes.
inline int exit_code(const std::exception& e) {
  if (dynamic_cast<const TransportError*>(&e)) return kTransport;
  if (dynamic_cast<const GateError*>(&e)) return kGate;
  return kValidation;
}

}  // namespace revise::cli
