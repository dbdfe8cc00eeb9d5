#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "revise/error.hpp"
#include "revise/microworld/instruction.hpp"
#include "revise/numcore/rng.hpp"
#include "revise/rvebench/judge.hpp"

namespace revise::curator {

// Templates hold a single {literal} slot. Every template contains at least one
// of the bank's cue phrases.
struct TemplateBank {
  std::vector<std::string> templates;
  std::vector<std::string> cues;
};

inline const TemplateBank& reasoning_bank(world::ReasoningType t) {
  static const std::map<world::ReasoningType, TemplateBank> banks = {
      {world::ReasoningType::causal,
       {{"Because something set it in motion, {literal}.", "As a result of a sudden knock, {literal}.",
         "What would cause this? Show that, because of it, {literal}."},
        {"because", "as a result", "cause"}}},
      {world::ReasoningType::spatial,
       {{"Imagine the object drifted with the current, so that {literal}.",
         "Picture the scene rearranged in space: {literal}.", "Think about where everything sits, then {literal}."},
        {"drifted with the current", "in space", "where everything sits"}}},
      {world::ReasoningType::temporal,
       {{"As time passes, {literal}.", "Gradually, moment by moment, {literal}.", "Over time, {literal}."},
        {"as time passes", "moment by moment", "over time"}}},
      {world::ReasoningType::commonsense,
       {{"As would naturally happen, {literal}.", "In the ordinary course of things, {literal}.",
         "Doing what anyone would expect, {literal}."},
        {"naturally", "ordinary course", "anyone would expect"}}},
  };
  return banks.at(t);
}

// Every identity template states that nothing changes.
inline const TemplateBank& identity_bank() {
  static const TemplateBank bank{{"Let there be no change at all: {literal}.",
                                  "Picture a quiet moment with no change: {literal}.",
                                  "Nothing moves and nothing fades, so no change: {literal}."},
                                 {"no change"}};
  return bank;
}

inline const TemplateBank& bank_for(world::ReasoningType t, world::Operator op) {
  return op == world::Operator::identity ? identity_bank() : reasoning_bank(t);
}

// Lower-cases the leading letter and drops trailing punctuation so the
// literal reads as a clause.
inline std::string as_clause(std::string s) {
  while (!s.empty() && (s.back() == '.' || s.back() == ' ' || s.back() == '?' || s.back() == '!')) s.pop_back();
  if (s.size() > 1 && std::isupper(static_cast<unsigned char>(s[0])) && !std::isupper(static_cast<unsigned char>(s[1])))
    s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

struct RewriteRequest {
  std::string literal;
  world::ReasoningType reasoning_type = world::ReasoningType::commonsense;
  world::Operator op = world::Operator::narrative;
  std::uint64_t seed = 0;
};

class Rewriter {
 public:
  virtual ~Rewriter() = default;
  virtual std::string rewrite(const RewriteRequest& r) = 0;
  virtual std::string name() const = 0;
};

// Picks a template from the bank keyed by (seed, literal).
class TemplateRewriter : public Rewriter {
 public:
  std::string rewrite(const RewriteRequest& r) override {
    const auto& bank = bank_for(r.reasoning_type, r.op);
    const auto pick = num::counter_key(r.seed, 0x72657772ULL, num::fnv1a64(r.literal)) % bank.templates.size();
    std::string out = bank.templates[pick];
    out.replace(out.find("{literal}"), 9, as_clause(r.literal));
    return out;
  }
  std::string name() const override { return "builtin"; }
};

inline std::string reasoning_rubric(world::ReasoningType t) {
  switch (t) {
    case world::ReasoningType::causal: return "Phrase the edit as the consequence of a cause the viewer must infer.";
    case world::ReasoningType::spatial: return "Phrase the edit through positions and directions the viewer must picture.";
    case world::ReasoningType::temporal: return "Phrase the edit as something that unfolds over time.";
    case world::ReasoningType::commonsense: return "Phrase the edit through everyday knowledge of how scenes behave.";
  }
  return "";
}

// Sends the literal instruction and the reasoning-type rubric through the
// judge's chat-completion wire format.
class RemoteRewriter : public Rewriter {
 public:
  explicit RemoteRewriter(bench::RemoteJudgeConfig cfg) : client_(std::move(cfg)) {}

  std::string rewrite(const RewriteRequest& r) override {
    std::string system =
        "Rewrite a literal video-editing instruction into a short reasoning-informed instruction. " +
        reasoning_rubric(r.reasoning_type) + " Keep the requested outcome unchanged. Reply with the instruction only.";
    if (r.op == world::Operator::identity) system += " The instruction requests no change; the rewrite must say so.";
    std::string out = client_.complete(system, r.literal);
    const auto b = out.find_first_not_of(" \t\r\n\"");
    const auto e = out.find_last_not_of(" \t\r\n\"");
    if (b == std::string::npos) throw ValidationError("remote rewriter: empty reply");
    return out.substr(b, e - b + 1);
  }
  std::string name() const override { return "remote:" + client_.config().model; }

 private:
  bench::ChatClient client_;
};

struct RewriteRecord {
  std::string literal;
  std::string text;
  std::string rewriter;
  std::optional<std::string> warning;
};

// A failing rewriter falls back to the builtin banks and records why.
inline RewriteRecord rewrite_instruction(const RewriteRequest& r, Rewriter& rewriter) {
  RewriteRecord rec{r.literal, "", rewriter.name(), std::nullopt};
  try {
    rec.text = rewriter.rewrite(r);
  } catch (const Error& e) {
    TemplateRewriter builtin;
    rec.text = builtin.rewrite(r);
    rec.warning = rewriter.name() + " failed, used builtin: " + e.what();
    rec.rewriter = builtin.name();
  }
  return rec;
}

}  // namespace revise::curator
