#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "revise/error.hpp"

namespace revise::world {

enum class ReasoningType { causal, spatial, temporal, commonsense };

// `narrative` marks curated in-context instructions, which have no oracle edit.
enum class Operator { identity, translate, reflect, decay, grow, impact, threshold_brighten, narrative };

inline constexpr std::array<ReasoningType, 4> kReasoningTypes = {
    ReasoningType::causal, ReasoningType::spatial, ReasoningType::temporal, ReasoningType::commonsense};

inline constexpr std::array<Operator, 7> kOperators = {Operator::identity, Operator::translate, Operator::reflect,
                                                       Operator::decay,    Operator::grow,      Operator::impact,
                                                       Operator::threshold_brighten};

inline constexpr const char* kTemplateVersion = "v1";

inline std::string to_string(ReasoningType t) {
  switch (t) {
    case ReasoningType::causal: return "causal";
    case ReasoningType::spatial: return "spatial";
    case ReasoningType::temporal: return "temporal";
    case ReasoningType::commonsense: return "commonsense";
  }
  return "?";
}

inline ReasoningType parse_reasoning_type(const std::string& s) {
  for (auto t : kReasoningTypes)
    if (to_string(t) == s) return t;
  throw ValidationError("unknown reasoning type '" + s + "'");
}

inline std::string to_string(Operator op) {
  switch (op) {
    case Operator::identity: return "identity";
    case Operator::translate: return "translate";
    case Operator::reflect: return "reflect";
    case Operator::decay: return "decay";
    case Operator::grow: return "grow";
    case Operator::impact: return "impact";
    case Operator::threshold_brighten: return "threshold_brighten";
    case Operator::narrative: return "narrative";
  }
  return "?";
}

inline Operator parse_operator(const std::string& s) {
  for (auto op : kOperators)
    if (to_string(op) == s) return op;
  if (s == "narrative") return Operator::narrative;
  throw ValidationError("unknown operator '" + s + "'");
}

inline ReasoningType reasoning_type_of(Operator op) {
  switch (op) {
    case Operator::impact: return ReasoningType::causal;
    case Operator::translate:
    case Operator::reflect: return ReasoningType::spatial;
    case Operator::decay:
    case Operator::grow: return ReasoningType::temporal;
    case Operator::threshold_brighten:
    case Operator::identity:
    case Operator::narrative: return ReasoningType::commonsense;
  }
  return ReasoningType::commonsense;
}

inline std::vector<Operator> operators_of(ReasoningType t) {
  std::vector<Operator> out;
  for (auto op : kOperators)
    if (reasoning_type_of(op) == t) out.push_back(op);
  // Non-identity operators first so small datasets exercise real edits.
  std::stable_partition(out.begin(), out.end(), [](Operator op) { return op != Operator::identity; });
  return out;
}

using Parameters = std::map<std::string, double>;

// Discrete parameter grid per operator. Embedding keys are built on this grid.
inline std::map<std::string, std::vector<double>> parameter_grid(Operator op) {
  switch (op) {
    case Operator::identity: return {};
    case Operator::translate: return {{"dx", {-2, -1, 0, 1, 2}}, {"dy", {-2, -1, 0, 1, 2}}};
    case Operator::reflect: return {{"axis", {0, 1}}};
    case Operator::decay: return {{"rate", {0.6, 0.7, 0.8, 0.9}}};
    case Operator::grow: return {{"rate", {0.25, 0.5}}};
    case Operator::impact: return {{"onset", {2, 3, 4, 5, 6}}};
    case Operator::threshold_brighten: return {{"delta", {0.2, 0.3}}, {"threshold", {0.3}}};
    case Operator::narrative: return {};
  }
  return {};
}

// Every on-grid parameter assignment of an operator (translate excludes the
// null move).
inline std::vector<Parameters> parameter_catalog(Operator op) {
  std::vector<Parameters> out{Parameters{}};
  for (const auto& [name, values] : parameter_grid(op)) {
    std::vector<Parameters> next;
    for (const auto& partial : out)
      for (double v : values) {
        Parameters p = partial;
        p[name] = v;
        next.push_back(std::move(p));
      }
    out = std::move(next);
  }
  if (op == Operator::translate) {
    std::erase_if(out, [](const Parameters& p) { return p.at("dx") == 0 && p.at("dy") == 0; });
  }
  return out;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct EditInstruction {
  ReasoningType reasoning_type = ReasoningType::commonsense;
  Operator op = Operator::identity;
  Parameters parameters;
  // Literal form ("move the object one pixel right").
  std::string literal;
  // Reasoning form shown to the model ("imagine the object drifted ...").
  std::string text;

  bool operator==(const EditInstruction&) const = default;
};

inline void validate_parameters(Operator op, const Parameters& params) {
  const auto grid = parameter_grid(op);
  for (const auto& [k, v] : params) {
    if (!grid.count(k)) throw ValidationError(to_string(op) + ": unknown parameter '" + k + "'");
    if (!std::isfinite(v)) throw ValidationError(to_string(op) + ": parameter '" + k + "' is not finite");
  }
  for (const auto& [k, values] : grid) {
    if (!params.count(k)) throw ValidationError(to_string(op) + ": missing parameter '" + k + "'");
  }
  auto get = [&](const char* k) { return params.at(k); };
  switch (op) {
    case Operator::translate:
      if (get("dx") != std::round(get("dx")) || get("dy") != std::round(get("dy")))
        throw ValidationError("translate: offsets must be integers");
      break;
    case Operator::reflect:
      if (get("axis") != 0 && get("axis") != 1) throw ValidationError("reflect: axis must be 0 or 1");
      break;
    case Operator::decay:
      if (!(get("rate") > 0 && get("rate") <= 1)) throw ValidationError("decay: rate must lie in (0, 1]");
      break;
    case Operator::grow:
      if (!(get("rate") >= 0 && get("rate") <= 2)) throw ValidationError("grow: rate must lie in [0, 2]");
      break;
    case Operator::impact:
      if (get("onset") < 0 || get("onset") != std::round(get("onset")))
        throw ValidationError("impact: onset must be a non-negative frame index");
      break;
    case Operator::threshold_brighten:
      if (!(get("delta") >= 0 && get("delta") <= 1)) throw ValidationError("threshold_brighten: delta must lie in [0, 1]");
      if (!(get("threshold") >= 0 && get("threshold") <= 1))
        throw ValidationError("threshold_brighten: threshold must lie in [0, 1]");
      break;
    case Operator::identity:
    case Operator::narrative: break;
  }
}

namespace detail {

inline std::string pixels(double n) {
  const double a = std::abs(n);
  return format_number(a) + (a == 1 ? " pixel" : " pixels");
}

inline std::string literal_text(Operator op, const Parameters& p) {
  switch (op) {
    case Operator::identity: return "keep the video unchanged";
    case Operator::translate: {
      std::string s = "move the object";
      const double dx = p.at("dx"), dy = p.at("dy");
      if (dx != 0) s += std::string(" ") + (dx > 0 ? "right" : "left") + " by " + pixels(dx);
      if (dx != 0 && dy != 0) s += " and";
      if (dy != 0) s += std::string(" ") + (dy > 0 ? "down" : "up") + " by " + pixels(dy);
      return s;
    }
    case Operator::reflect:
      return p.at("axis") == 0 ? "mirror the scene left to right" : "mirror the scene top to bottom";
    case Operator::decay: return "apply decay: multiply the object brightness by " + format_number(p.at("rate")) + " every frame";
    case Operator::grow: return "grow the object by " + format_number(p.at("rate")) + " pixels per frame";
    case Operator::impact: return "split the object into two halves from frame " + format_number(p.at("onset"));
    case Operator::threshold_brighten:
      return "raise the background by " + format_number(p.at("delta")) + " if its level is below " +
             format_number(p.at("threshold"));
    case Operator::narrative: return "continue the story";
  }
  return "";
}

inline std::string reasoning_text(Operator op, const Parameters& p) {
  switch (op) {
    case Operator::identity: return "What if nothing at all happened in this scene?";
    case Operator::translate: {
      const double dx = p.at("dx"), dy = p.at("dy");
      std::string dir;
      if (dy != 0) dir += dy > 0 ? "downward" : "upward";
      if (dx != 0) dir += std::string(dir.empty() ? "" : " and ") + (dx > 0 ? "to the right" : "to the left");
      return "Imagine the object drifted with the current, " + std::to_string(static_cast<int>(std::abs(dx))) +
             " steps across and " + std::to_string(static_cast<int>(std::abs(dy))) + " steps along, " + dir + ".";
    }
    case Operator::reflect:
      return p.at("axis") == 0 ? "What if we watched this scene in a mirror standing at its side?"
                               : "What if we watched this scene reflected in a still lake below it?";
    case Operator::decay:
      return "What if the object's light slowly faded as time passed, keeping " +
             format_number(std::round(p.at("rate") * 100)) + "% of its glow each moment?";
    case Operator::grow:
      return "Imagine the object swelling over time, like dough rising at pace " + format_number(p.at("rate")) + ".";
    case Operator::impact:
      return "What if the object was struck at moment " + format_number(p.at("onset")) +
             " and broke apart under the impact?";
    case Operator::threshold_brighten:
      return "What if someone switched on the lights because the room was darker than " +
             format_number(p.at("threshold")) + ", adding " + format_number(p.at("delta")) + " of brightness?";
    case Operator::narrative: return "What happens next in this story?";
  }
  return "";
}

}  // namespace detail

// Validated instruction with deterministic text for (operator, parameters,
// template version).
inline EditInstruction make_instruction(Operator op, Parameters params) {
  validate_parameters(op, params);
  EditInstruction ins;
  ins.reasoning_type = reasoning_type_of(op);
  ins.op = op;
  ins.literal = detail::literal_text(op, params);
  ins.text = detail::reasoning_text(op, params);
  ins.parameters = std::move(params);
  return ins;
}

// Snaps every parameter to the nearest grid value (ties to the lower value).
inline Parameters discretize(Operator op, const Parameters& params) {
  Parameters out;
  for (const auto& [name, values] : parameter_grid(op)) {
    auto it = params.find(name);
    if (it == params.end()) throw ValidationError(to_string(op) + ": missing parameter '" + name + "'");
    double best = values.front();
    for (double v : values)
      if (std::abs(v - it->second) < std::abs(best - it->second)) best = v;
    out[name] = best;
  }
  return out;
}

inline std::string embedding_key(Operator op, const Parameters& params) {
  std::string key = to_string(op) + "(";
  bool first = true;
  for (const auto& [k, v] : params) {
    key += (first ? "" : ",") + k + "=" + format_number(v);
    first = false;
  }
  return key + ")";
}

// Ordered list of every embedding key; a key's position is its table row.
inline const std::vector<std::string>& embedding_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (auto op : kOperators)
      for (const auto& p : parameter_catalog(op)) v.push_back(embedding_key(op, p));
    v.push_back(embedding_key(Operator::narrative, {}));
    return v;
  }();
  return vocab;
}

inline std::size_t embedding_index(const EditInstruction& ins) {
  const std::string key = embedding_key(ins.op, discretize(ins.op, ins.parameters));
  const auto& vocab = embedding_vocabulary();
  auto it = std::find(vocab.begin(), vocab.end(), key);
  if (it == vocab.end()) {
    // Off-grid combinations (a snapped translate of (0,0)) fall back to the
    // operator's first catalog entry.
    const std::string fallback = embedding_key(ins.op, parameter_catalog(ins.op).front());
    it = std::find(vocab.begin(), vocab.end(), fallback);
  }
  return static_cast<std::size_t>(it - vocab.begin());
}

inline constexpr std::size_t kInstructionFeatureSize = kOperators.size() + 1 + 7;

// Fixed (non-learned) instruction encoding: operator one-hot plus scaled
// parameters.
inline std::vector<double> instruction_features(const EditInstruction& ins) {
  std::vector<double> f(kInstructionFeatureSize, 0.0);
  f[static_cast<std::size_t>(ins.op)] = 1.0;
  auto get = [&](const char* k) {
    auto it = ins.parameters.find(k);
    return it == ins.parameters.end() ? 0.0 : it->second;
  };
  const std::size_t o = kOperators.size() + 1;
  f[o + 0] = get("dx") / 2.0;
  f[o + 1] = get("dy") / 2.0;
  f[o + 2] = get("axis");
  f[o + 3] = get("rate");
  f[o + 4] = get("onset") / 8.0;
  f[o + 5] = get("delta") / 0.3;
  f[o + 6] = get("threshold") / 0.3;
  return f;
}

}  // namespace revise::world
