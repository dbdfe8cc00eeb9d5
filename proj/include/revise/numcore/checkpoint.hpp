#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "revise/error.hpp"
#include "revise/numcore/params.hpp"

namespace revise::num {

inline constexpr const char* kCheckpointMagic = "REVISE-CKPT-1";

namespace detail {

inline void write_values(std::ostream& os, const char* tag, const Tensor& t) {
  os << tag;
  char buf[32];
  for (double v : t.data()) {
    std::snprintf(buf, sizeof buf, " %.17g", v);
    os << buf;
  }
  os << '\n';
}

inline Tensor read_values(std::istream& is, const char* tag, const Shape& shape) {
  std::string word;
  if (!(is >> word) || word != tag) throw ValidationError(std::string("checkpoint: expected '") + tag + "'");
  Tensor t(shape);
  for (double& v : t.data()) {
    if (!(is >> word)) throw ValidationError("checkpoint: truncated values");
    v = std::stod(word);
  }
  return t;
}

}  // namespace detail

// Structured-text container: magic line, seed, attributes, then per parameter
// its name, shape, step count, values and both moment accumulators.
// Values use 17 significant digits so a save/load round trip is exact.
inline std::string serialize_checkpoint(const ParamStore& store) {
  std::ostringstream os;
  os << kCheckpointMagic << '\n';
  os << "seed " << store.seed() << '\n';
  os << "attributes " << store.attributes().size() << '\n';
  for (const auto& [k, v] : store.attributes()) {
    if (k.empty() || v.empty() || k.find_first_of(" \t\n") != std::string::npos ||
        v.find_first_of(" \t\n") != std::string::npos) {
      throw ValidationError("checkpoint: attribute '" + k + "' must be a non-empty token");
    }
    os << "attr " << k << ' ' << v << '\n';
  }
  os << "params " << store.size() << '\n';
  for (const Param& p : store.params()) {
    os << "param " << p.name << ' ' << p.value.rank();
    for (std::size_t d : p.value.shape()) os << ' ' << d;
    os << " step " << p.step << '\n';
    detail::write_values(os, "value", p.value);
    detail::write_values(os, "m", p.first_moment);
    detail::write_values(os, "v", p.second_moment);
  }
  return os.str();
}

inline ParamStore parse_checkpoint(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointMagic) {
    throw ValidationError("checkpoint: missing magic header " + std::string(kCheckpointMagic));
  }
  std::string word;
  std::uint64_t seed = 0;
  if (!(is >> word >> seed) || word != "seed") throw ValidationError("checkpoint: missing seed");
  ParamStore store(seed);
  std::size_t n_attr = 0;
  if (!(is >> word >> n_attr) || word != "attributes") throw ValidationError("checkpoint: missing attributes");
  for (std::size_t i = 0; i < n_attr; ++i) {
    std::string key, value;
    if (!(is >> word >> key >> value) || word != "attr") throw ValidationError("checkpoint: bad attribute");
    store.attributes()[key] = value;
  }
  std::size_t n_params = 0;
  if (!(is >> word >> n_params) || word != "params") throw ValidationError("checkpoint: missing params");
  for (std::size_t i = 0; i < n_params; ++i) {
    std::string name;
    std::size_t rank = 0;
    if (!(is >> word >> name >> rank) || word != "param") throw ValidationError("checkpoint: bad param header");
    Shape shape(rank);
    for (auto& d : shape) is >> d;
    std::uint64_t step = 0;
    if (!(is >> word >> step) || word != "step") throw ValidationError("checkpoint: missing step for " + name);
    Tensor value = detail::read_values(is, "value", shape);
    Tensor m = detail::read_values(is, "m", shape);
    Tensor v = detail::read_values(is, "v", shape);
    store.add(name, std::move(value));
    Param& p = store.param(name);
    p.first_moment = std::move(m);
    p.second_moment = std::move(v);
    p.step = step;
  }
  return store;
}

// Write-temp-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot write " + tmp.string());
    os << content;
    if (!os) throw ValidationError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot read " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

inline void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(store));
}

inline ParamStore load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace revise::num
