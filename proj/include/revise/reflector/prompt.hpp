#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "revise/error.hpp"
#include "revise/microworld/instruction.hpp"

namespace revise::critic {

inline constexpr std::array<const char*, 4> kDimensions = {"EA", "PC", "GN", "GR"};

struct PromptTemplate {
  std::string version;
  std::map<std::string, std::string> rubrics;
  std::string body;

  void validate() const {
    if (version.empty()) throw ValidationError("prompt template: missing version");
    for (const char* d : kDimensions) {
      if (rubrics.count(d) == 0 || rubrics.at(d).empty()) {
        throw ValidationError(std::string("prompt template ") + version + ": missing rubric " + d);
      }
      if (body.find(std::string("{") + d + "}") == std::string::npos) {
        throw ValidationError(std::string("prompt template ") + version + ": body has no slot for " + d);
      }
    }
    if (body.find("{instruction}") == std::string::npos) {
      throw ValidationError("prompt template " + version + ": body has no {instruction} slot");
    }
  }
};

// Text form: "version: <id>" and "rubric <DIM>: <text>" header lines, a line
// holding only "---", then the body with {instruction} and {EA}..{GR} slots.
inline PromptTemplate parse_prompt_template(const std::string& text) {
  PromptTemplate t;
  std::istringstream is(text);
  std::string line;
  bool in_body = false;
  while (std::getline(is, line)) {
    if (in_body) {
      t.body += line;
      t.body += '\n';
      continue;
    }
    if (line == "---") {
      in_body = true;
    } else if (line.rfind("version:", 0) == 0) {
      t.version = line.substr(line.find_first_not_of(' ', 8));
    } else if (line.rfind("rubric ", 0) == 0) {
      const auto colon = line.find(':');
      if (colon == std::string::npos) throw ValidationError("prompt template: bad rubric line '" + line + "'");
      const auto start = line.find_first_not_of(' ', colon + 1);
      t.rubrics[line.substr(7, colon - 7)] = start == std::string::npos ? "" : line.substr(start);
    } else if (!line.empty()) {
      throw ValidationError("prompt template: unexpected header line '" + line + "'");
    }
  }
  if (!in_body) throw ValidationError("prompt template: missing '---' separator");
  t.validate();
  return t;
}

inline PromptTemplate load_prompt_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read prompt template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_prompt_template(ss.str());
}

// Copy of templates/judge_prompt_v1.txt so the binary works without the file.
inline const PromptTemplate& builtin_prompt_template() {
  static const PromptTemplate t = parse_prompt_template(R"(version: v1
rubric EA: Edit accuracy. Does the edited video carry out the instruction, with the change in the right place, the right amount and the right frames?
rubric PC: Preservation consistency. Are regions and frames the instruction does not touch left as they were in the source?
rubric GN: Generation naturalness. Does the motion run smoothly from frame to frame, without jumps or flicker?
rubric GR: Generation realism. Are the frames free of artifacts, speckle noise, clipped values or distorted shapes?
---
You are checking the result of a video edit.

Instruction: {instruction}

Judge the edited video against the source on each dimension:
- EA: {EA}
- PC: {PC}
- GN: {GN}
- GR: {GR}

Think it through first: write a short chain of reasoning that covers each of the four dimensions in turn.
Then answer on the last line with a single word, "yes" if all four dimensions are satisfied and "no" otherwise.
)");
  return t;
}

namespace detail {

inline void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) s.replace(pos, from.size(), to);
}

}  // namespace detail

// Rubrics are substituted before the instruction so instruction text that
// happens to contain "{EA}" is left alone.
inline std::string render_prompt(const PromptTemplate& t, const world::EditInstruction& ins) {
  t.validate();
  std::string out = t.body;
  for (const char* d : kDimensions) detail::replace_all(out, std::string("{") + d + "}", t.rubrics.at(d));
  detail::replace_all(out, "{instruction}", ins.text);
  return out;
}

}  // namespace revise::critic
