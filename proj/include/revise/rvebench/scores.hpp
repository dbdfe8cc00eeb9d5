#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "revise/error.hpp"
#include "revise/microworld/dataset.hpp"
#include "revise/microworld/oracle.hpp"

namespace revise::bench {

enum class Mode { editing, in_context };

inline std::string to_string(Mode m) { return m == Mode::editing ? "editing" : "in_context"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "editing") return Mode::editing;
  if (s == "in_context") return Mode::in_context;
  throw ValidationError("unknown evaluation mode '" + s + "'");
}

struct JudgeScores {
  std::vector<double> sc;
  std::vector<double> pq;
  std::string sc_reasoning;
  std::string pq_reasoning;
  std::optional<double> o_score_reported;
  std::optional<double> o_score_residual;

  void validate() const {
    if (sc.empty() || sc.size() > 2) throw ValidationError("judge scores: SC needs 1 or 2 values");
    if (pq.size() != 2) throw ValidationError("judge scores: PQ needs exactly 2 values");
    for (double v : sc)
      if (!(v >= 0.0 && v <= 10.0)) throw ValidationError("judge scores: SC value " + std::to_string(v) + " outside [0,10]");
    for (double v : pq)
      if (!(v >= 0.0 && v <= 10.0)) throw ValidationError("judge scores: PQ value " + std::to_string(v) + " outside [0,10]");
  }
};

// sqrt(min(SC) * min(PQ)).
inline double overall_score(const std::vector<double>& sc, const std::vector<double>& pq) {
  if (sc.empty()) throw ValidationError("overall_score: empty SC list");
  if (pq.size() != 2) throw ValidationError("overall_score: PQ needs exactly 2 values");
  for (double v : sc)
    if (!(v >= 0.0 && v <= 10.0)) throw ValidationError("overall_score: SC value outside [0,10]");
  for (double v : pq)
    if (!(v >= 0.0 && v <= 10.0)) throw ValidationError("overall_score: PQ value outside [0,10]");
  return std::sqrt(*std::min_element(sc.begin(), sc.end()) * *std::min_element(pq.begin(), pq.end()));
}

inline double overall_score(const JudgeScores& s) { return overall_score(s.sc, s.pq); }

namespace detail {

// End of the balanced {...} block starting at `open`, honouring strings.
inline std::size_t match_brace(const std::string& text, std::size_t open) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i;
  }
  return std::string::npos;
}

inline std::vector<double> score_list(const nlohmann::json& block, const char* name, std::vector<std::string>& missing) {
  if (!block.is_object() || !block.contains("score")) {
    missing.push_back(std::string(name) + ".score");
    return {};
  }
  const auto& s = block.at("score");
  if (!s.is_array()) throw ValidationError(std::string("judge payload: ") + name + ".score is not a list");
  std::vector<double> out;
  for (const auto& v : s) {
    if (!v.is_number()) throw ValidationError(std::string("judge payload: ") + name + ".score has a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

// First well-formed JSON object in free text. Missing keys are listed together.
inline JudgeScores parse_judge_payload(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ValidationError("judge payload: empty text");
  std::optional<nlohmann::json> obj;
  for (std::size_t pos = text.find('{'); pos != std::string::npos && !obj; pos = text.find('{', pos + 1)) {
    const std::size_t end = detail::match_brace(text, pos);
    if (end == std::string::npos) continue;
    auto j = nlohmann::json::parse(text.substr(pos, end - pos + 1), nullptr, false);
    if (!j.is_discarded() && j.is_object()) obj = std::move(j);
  }
  if (!obj) throw ValidationError("judge payload: no JSON object in text: " + text);
  const auto& j = *obj;
  std::vector<std::string> missing;
  static const nlohmann::json empty = nlohmann::json::object();
  const auto& sc = j.contains("SC") ? j.at("SC") : empty;
  const auto& pq = j.contains("PQ") ? j.at("PQ") : empty;
  JudgeScores s;
  s.sc = detail::score_list(sc, "SC", missing);
  s.pq = detail::score_list(pq, "PQ", missing);
  if (!sc.contains("reasoning")) missing.push_back("SC.reasoning");
  else s.sc_reasoning = sc.at("reasoning").is_string() ? sc.at("reasoning").get<std::string>() : sc.at("reasoning").dump();
  if (!pq.contains("reasoning")) missing.push_back("PQ.reasoning");
  else s.pq_reasoning = pq.at("reasoning").is_string() ? pq.at("reasoning").get<std::string>() : pq.at("reasoning").dump();
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ValidationError("judge payload: missing " + list + " in: " + text);
  }
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(e.what()) + " in: " + text);
  }
  if (j.contains("O_score") && j.at("O_score").is_number()) {
    s.o_score_reported = j.at("O_score").get<double>();
    s.o_score_residual = std::abs(*s.o_score_reported - overall_score(s));
  }
  return s;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

// OracleScores into the judge schema. SC is [ea, pc] for editing and [ea] in
// in-context mode.
inline JudgeScores oracle_adapter(const world::OracleScores& o, Mode mode) {
  JudgeScores s;
  s.sc = mode == Mode::editing ? std::vector<double>{o.ea, o.pc} : std::vector<double>{o.ea};
  s.pq = {o.gn, o.gr};
  s.sc_reasoning = "edit accuracy " + detail::fmt(o.ea) +
                   (mode == Mode::editing ? ", preservation " + detail::fmt(o.pc) : std::string()) +
                   " from masked RMSE against the reference";
  s.pq_reasoning = "naturalness " + detail::fmt(o.gn) + " from frame-to-frame jitter, realism " + detail::fmt(o.gr) +
                   " from the clipped-pixel fraction";
  return s;
}

inline JudgeScores oracle_judge_adapter(const world::Video& source, const world::Video& edited,
                                        const world::Video& target, Mode mode) {
  return oracle_adapter(world::score_against(source, edited, target, world::mask_between(source, target)), mode);
}

inline JudgeScores oracle_judge_adapter(const world::Video& source, const world::Video& edited,
                                        const world::EditInstruction& ins, Mode mode) {
  return oracle_adapter(world::oracle_judge(source, edited, ins), mode);
}

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: vectors of different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

// Pluggable embedder pair for the auxiliary similarity column.
struct Embedder {
  virtual ~Embedder() = default;
  virtual std::vector<double> embed_video(const world::Video& v) const = 0;
  virtual std::vector<double> embed_instruction(const world::Triplet& t) const = 0;
};

// Toy default: the video itself against the reference target, both flattened.
struct TargetEmbedder : Embedder {
  std::vector<double> embed_video(const world::Video& v) const override {
    return {v.values().begin(), v.values().end()};
  }
  std::vector<double> embed_instruction(const world::Triplet& t) const override {
    return {t.target.values().begin(), t.target.values().end()};
  }
};

inline double similarity_metric(const world::Video& edited, const world::Triplet& t, const Embedder& e) {
  return cosine_similarity(e.embed_video(edited), e.embed_instruction(t));
}

}  // namespace revise::bench
