#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "revise/cli/config.hpp"
#include "revise/numcore/checkpoint.hpp"
#include "revise/rvebench/judge.hpp"

namespace revise::cli {

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// manifest.json in a run directory. Written with status "running" before any
// work and rewritten as "complete" or "failed" at the end, so a run that dies
// midway leaves an incomplete manifest behind.
class RunManifest {
 public:
  RunManifest(std::filesystem::path dir, std::string command, const nlohmann::json& config, std::uint64_t seed)
      : dir_(std::move(dir)) {
    j_["command"] = command;
    j_["run_id"] = command + "-" + bench::sha256_hex(config.dump()).substr(0, 12);
    j_["version"] = kVersion;
    j_["seed"] = seed;
    j_["config"] = config;
    j_["artifacts"] = nlohmann::json::object();
    j_["status"] = "running";
    j_["started"] = utc_now();
    write();
  }

  void artifact(const std::string& name, const std::filesystem::path& path) { j_["artifacts"][name] = path.string(); }
  void note(const std::string& key, nlohmann::json value) { j_[key] = std::move(value); }

  void finish(const std::string& status) {
    j_["status"] = status;
    j_["finished"] = utc_now();
    write();
  }

  const nlohmann::json& json() const { return j_; }
  std::filesystem::path path() const { return dir_ / "manifest.json"; }

 private:
  void write() const { num::write_file_atomic(path(), j_.dump(2) + "\n"); }

  std::filesystem::path dir_;
  nlohmann::json j_;
};

}  // namespace revise::cli
