#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "revise/error.hpp"
#include "revise/flowgen/model.hpp"
#include "revise/flowgen/sampler.hpp"
#include "revise/microworld/dataset.hpp"
#include "revise/rvebench/judge.hpp"
#include "revise/rvebench/scores.hpp"

namespace revise::bench {

struct SampleResult {
  std::string id;
  std::string subset;
  std::string category;
  JudgeScores scores;
  double overall = 0.0;
  std::optional<double> similarity;
};

struct SampleError {
  std::string id;
  std::string message;
  bool transport = false;
};

struct EvalRun {
  std::vector<SampleResult> results;
  std::vector<SampleError> errors;
};

// Raised when more samples fail than the budget allows; carries what did
// complete so callers can still persist it.
class BudgetExceeded : public GateError {
 public:
  BudgetExceeded(const std::string& what, EvalRun partial) : GateError(what), partial(std::move(partial)) {}
  EvalRun partial;

  // Nothing was scored and every failure was the judge being unreachable.
  bool transport_only() const {
    if (!partial.results.empty()) return false;
    for (const auto& e : partial.errors)
      if (!e.transport) return false;
    return true;
  }
};

struct EvalConfig {
  Mode mode = Mode::editing;
  std::size_t steps = 16;
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
  double failure_budget = 0.1;
  const Embedder* embedder = nullptr;
};

inline double ea_of(const JudgeScores& s) { return s.sc.at(0); }
inline std::optional<double> pc_of(const JudgeScores& s) {
  return s.sc.size() > 1 ? std::optional<double>(s.sc[1]) : std::nullopt;
}

// `edit` maps a triplet to the edited video (a sampler or a fixture). Samples
// fan out over `concurrency` workers; results come back sorted by id.
template <typename EditFn>
EvalRun evaluate_with(const std::vector<world::Triplet>& data, EditFn&& edit, Judge& judge, const EvalConfig& cfg) {
  if (data.empty()) throw ValidationError("evaluate: empty dataset");
  if (cfg.concurrency == 0) throw ValidationError("evaluate: concurrency must be positive");
  std::vector<std::optional<SampleResult>> slots(data.size());
  std::vector<std::optional<SampleError>> failures(data.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < data.size();) {
      const auto& t = data[i];
      try {
        const world::Video edited = edit(t);
        SampleResult r;
        r.id = t.id;
        r.subset = world::to_string(t.subset);
        r.category = world::to_string(t.instruction.reasoning_type);
        r.scores = judge.judge(t, edited, cfg.mode);
        r.overall = overall_score(r.scores);
        if (cfg.embedder != nullptr) r.similarity = similarity_metric(edited, t, *cfg.embedder);
        slots[i] = std::move(r);
      } catch (const TransportError& e) {
        failures[i] = SampleError{t.id, e.what(), true};
      } catch (const std::exception& e) {
        failures[i] = SampleError{t.id, e.what(), false};
      }
    }
  };
  const std::size_t n_threads = std::min(cfg.concurrency, data.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  EvalRun run;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (slots[i]) run.results.push_back(std::move(*slots[i]));
    else run.errors.push_back(failures[i].value_or(SampleError{data[i].id, "unknown failure"}));
  }
  std::sort(run.results.begin(), run.results.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(run.errors.begin(), run.errors.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  if (static_cast<double>(run.errors.size()) > cfg.failure_budget * static_cast<double>(data.size())) {
    const std::string what = "evaluate: " + std::to_string(run.errors.size()) + " of " + std::to_string(data.size()) +
                             " samples failed (budget " + std::to_string(cfg.failure_budget) + "); first: " +
                             run.errors.front().id + ": " + run.errors.front().message;
    throw BudgetExceeded(what, std::move(run));
  }
  return run;
}

inline EvalRun evaluate(const std::vector<world::Triplet>& data, const flow::FlowModel& model, Judge& judge,
                        const EvalConfig& cfg) {
  return evaluate_with(
      data,
      [&](const world::Triplet& t) {
        return flow::sample(model, t.source, t.instruction, cfg.steps, flow::sample_seed(cfg.seed, t.id));
      },
      judge, cfg);
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace detail

// id,subset,category,ea,pc,gn,gr,overall,similarity
inline std::string results_csv(const std::vector<SampleResult>& results) {
  std::ostringstream os;
  os << "id,subset,category,ea,pc,gn,gr,overall,similarity\n";
  for (const auto& r : results) {
    os << r.id << ',' << r.subset << ',' << r.category << ',' << detail::num(ea_of(r.scores)) << ','
       << detail::opt_num(pc_of(r.scores)) << ',' << detail::num(r.scores.pq[0]) << ',' << detail::num(r.scores.pq[1])
       << ',' << detail::num(r.overall) << ',' << detail::opt_num(r.similarity) << '\n';
  }
  return os.str();
}

struct ReportRow {
  std::string subset;
  std::string category;  // "all" for the whole-subset row
  std::size_t count = 0;
  double ea = 0.0;
  std::optional<double> pc;
  double gn = 0.0;
  double gr = 0.0;
  double overall = 0.0;
  std::optional<double> similarity;
};

struct BenchReport {
  std::vector<ReportRow> rows;
  bool has_similarity = false;

  std::string csv() const {
    std::ostringstream os;
    os << "subset,category,count,ea,pc,gn,gr,overall" << (has_similarity ? ",similarity" : "") << '\n';
    for (const auto& r : rows) {
      os << r.subset << ',' << r.category << ',' << r.count << ',' << detail::num(r.ea) << ','
         << detail::opt_num(r.pc) << ',' << detail::num(r.gn) << ',' << detail::num(r.gr) << ','
         << detail::num(r.overall);
      if (has_similarity) os << ',' << detail::opt_num(r.similarity);
      os << '\n';
    }
    return os.str();
  }

  std::string table() const {
    std::ostringstream os;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-11s %-12s %5s %7s %7s %7s %7s %8s%s\n", "subset", "category", "n", "EA", "PC",
                  "GN", "GR", "Overall", has_similarity ? "      Sim" : "");
    os << buf;
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-11s %-12s %5zu %7.3f %7s %7.3f %7.3f %8.3f", r.subset.c_str(),
                    r.category.c_str(), r.count, r.ea, r.pc ? detail::num(*r.pc).substr(0, 5).c_str() : "-", r.gn,
                    r.gr, r.overall);
      os << buf;
      if (has_similarity) {
        std::snprintf(buf, sizeof buf, " %8s", r.similarity ? detail::num(*r.similarity).c_str() : "-");
        os << buf;
      }
      os << '\n';
    }
    return os.str();
  }
};

// Means per (subset, category) plus one "all" row per subset. Sums run over
// id-sorted samples so the result does not depend on arrival order.
inline BenchReport aggregate(std::vector<SampleResult> results) {
  if (results.empty()) throw ValidationError("aggregate: no results");
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  struct Acc {
    std::size_t n = 0, n_pc = 0, n_sim = 0;
    double ea = 0, pc = 0, gn = 0, gr = 0, overall = 0, sim = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> cells;
  BenchReport rep;
  for (const auto& r : results) {
    for (const auto& key : {std::make_pair(r.subset, r.category), std::make_pair(r.subset, std::string("~all"))}) {
      Acc& a = cells[key];
      ++a.n;
      a.ea += ea_of(r.scores);
      if (auto pc = pc_of(r.scores)) {
        ++a.n_pc;
        a.pc += *pc;
      }
      a.gn += r.scores.pq[0];
      a.gr += r.scores.pq[1];
      a.overall += r.overall;
      if (r.similarity) {
        ++a.n_sim;
        a.sim += *r.similarity;
        rep.has_similarity = true;
      }
    }
  }
  for (const auto& [key, a] : cells) {
    ReportRow row;
    row.subset = key.first;
    row.category = key.second == "~all" ? "all" : key.second;
    const double n = static_cast<double>(a.n);
    row.count = a.n;
    row.ea = a.ea / n;
    if (a.n_pc > 0) row.pc = a.pc / static_cast<double>(a.n_pc);
    row.gn = a.gn / n;
    row.gr = a.gr / n;
    row.overall = a.overall / n;
    if (a.n_sim > 0) row.similarity = a.sim / static_cast<double>(a.n_sim);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace revise::bench
