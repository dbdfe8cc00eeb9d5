#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "revise/error.hpp"
#include "revise/reflector/critic.hpp"

namespace revise::critic {

struct AgreementReport {
  double decision_agreement = 0.0;
  std::optional<double> rationale_similarity;
  std::vector<std::string> ids;
  std::vector<Answer> answers_a;
  std::vector<Answer> answers_b;

  // id,answer_a,answer_b,match
  std::string csv() const {
    std::ostringstream os;
    os << "id,answer_a,answer_b,match\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      os << ids[i] << ',' << to_string(answers_a[i]) << ',' << to_string(answers_b[i]) << ','
         << (answers_a[i] == answers_b[i] ? 1 : 0) << '\n';
    }
    return os.str();
  }
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("cosine: rationale vectors of different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

// Rationale similarity is reported only when every pair carries a rationale
// vector on both sides.
inline AgreementReport agreement(const std::vector<Verdict>& a, const std::vector<Verdict>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("agreement: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " verdicts");
  }
  if (a.empty()) throw ValidationError("agreement: empty verdict lists");
  AgreementReport r;
  std::size_t match = 0;
  bool rationales = true;
  double cos_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].id != b[i].id) throw ValidationError("agreement: ids not aligned at " + std::to_string(i));
    match += a[i].answer == b[i].answer;
    r.ids.push_back(a[i].id);
    r.answers_a.push_back(a[i].answer);
    r.answers_b.push_back(b[i].answer);
    if (a[i].rationale.empty() || b[i].rationale.empty()) rationales = false;
    else if (rationales) cos_sum += cosine(a[i].rationale, b[i].rationale);
  }
  r.decision_agreement = static_cast<double>(match) / static_cast<double>(a.size());
  if (rationales) r.rationale_similarity = cos_sum / static_cast<double>(a.size());
  return r;
}

// Hard yes/no verdicts, e.g. from the oracle rubric.
inline Verdict answer_verdict(std::string id, Answer a) {
  Verdict v;
  v.id = std::move(id);
  v.answer = a;
  v.p_yes = a == Answer::yes ? 1.0 : 0.0;
  return v;
}

}  // namespace revise::critic
