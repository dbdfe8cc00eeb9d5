#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

#include "revise/error.hpp"
#include "revise/microworld/dataset.hpp"
#include "revise/reflector/critic.hpp"
#include "revise/reflector/prompt.hpp"
#include "revise/rvebench/scores.hpp"

namespace revise::bench {

class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgeScores judge(const world::Triplet& t, const world::Video& edited, Mode mode) = 0;
  virtual std::string name() const = 0;
};

// Scores against the triplet's reference target.
class OracleJudge : public Judge {
 public:
  JudgeScores judge(const world::Triplet& t, const world::Video& edited, Mode mode) override {
    return oracle_judge_adapter(t.source, edited, t.target, mode);
  }
  std::string name() const override { return "oracle"; }
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw ValidationError("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

struct RemoteJudgeConfig {
  std::string endpoint;  // http(s)://host[:port]/path
  std::string model = "gpt-4o";
  std::string api_key_env;  // name of the variable holding the bearer token; empty for none
  std::string cache_dir;    // empty disables the cache
  int attempts = 3;
  int backoff_ms = 200;  // doubled after each failed attempt
  int timeout_s = 60;
  std::size_t frames = 2;
};

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

inline Endpoint parse_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || (url.compare(0, scheme, "http") != 0 && url.compare(0, scheme, "https") != 0)) {
    throw ValidationError("remote client: endpoint must start with http:// or https://, got '" + url + "'");
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

// Selected frames written as rows of two-decimal values.
inline std::string describe_frames(const world::Video& v, std::size_t k) {
  std::ostringstream os;
  const auto& d = v.dims();
  char buf[16];
  for (std::size_t f : critic::frame_indices(d.frames, k)) {
    os << "frame " << f << ":\n";
    for (std::size_t r = 0; r < d.height; ++r) {
      for (std::size_t c = 0; c < d.width; ++c) {
        std::snprintf(buf, sizeof buf, "%s%.2f", c == 0 ? "" : " ", v.at(f, r, c));
        os << buf;
      }
      os << '\n';
    }
  }
  return os.str();
}

// OpenAI-style chat-completion client with bounded retries on connection
// errors, 5xx and 429.
class ChatClient {
 public:
  explicit ChatClient(RemoteJudgeConfig cfg) : cfg_(std::move(cfg)), endpoint_(parse_endpoint(cfg_.endpoint)) {
    if (cfg_.attempts < 1) throw ValidationError("remote client: attempts must be >= 1");
  }

  std::string complete(const std::string& system, const std::string& user) {
    nlohmann::json body;
    body["model"] = cfg_.model;
    body["messages"] = nlohmann::json::array({{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", user}}});
    httplib::Headers headers;
    if (!cfg_.api_key_env.empty()) {
      const char* token = std::getenv(cfg_.api_key_env.c_str());
      if (token == nullptr) throw ValidationError("remote client: environment variable " + cfg_.api_key_env + " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    std::string last_error;
    int delay = cfg_.backoff_ms;
    for (int attempt = 0; attempt < cfg_.attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        delay *= 2;
      }
      httplib::Client cli(endpoint_.scheme_host_port);
      cli.set_connection_timeout(cfg_.timeout_s);
      cli.set_read_timeout(cfg_.timeout_s);
      ++network_calls_;
      auto res = cli.Post(endpoint_.path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500 || res->status == 429) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw TransportError("remote client: HTTP " + std::to_string(res->status) + ": " + res->body);
      }
      const auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("choices") || !j.at("choices").is_array() || j.at("choices").empty() ||
          !j.at("choices")[0].contains("message") || !j.at("choices")[0].at("message").contains("content") ||
          !j.at("choices")[0].at("message").at("content").is_string()) {
        throw ValidationError("remote client: response has no choices[0].message.content: " + res->body);
      }
      return j.at("choices")[0].at("message").at("content").get<std::string>();
    }
    throw TransportError("remote client: " + cfg_.endpoint + " failed after " + std::to_string(cfg_.attempts) +
                         " attempts: " + last_error);
  }

  const RemoteJudgeConfig& config() const { return cfg_; }
  std::size_t network_calls() const { return network_calls_; }

 private:
  RemoteJudgeConfig cfg_;
  Endpoint endpoint_;
  std::atomic<std::size_t> network_calls_{0};
};

// Judge over ChatClient. Responses are cached by SHA-256 of (sample id,
// prompt, model) so a warm cache answers without touching the network.
class RemoteJudge : public Judge {
 public:
  explicit RemoteJudge(RemoteJudgeConfig cfg, critic::PromptTemplate tmpl = critic::builtin_prompt_template())
      : cfg_(cfg), tmpl_(std::move(tmpl)), client_(std::move(cfg)) {
    tmpl_.validate();
    if (!cfg_.cache_dir.empty()) std::filesystem::create_directories(cfg_.cache_dir);
  }

  std::string system_prompt(const world::Triplet& t) const { return critic::render_prompt(tmpl_, t.instruction); }

  std::string user_message(const world::Triplet& t, const world::Video& edited, Mode mode) const {
    std::ostringstream os;
    os << "Source video, selected frames:\n" << describe_frames(t.source, cfg_.frames);
    os << "\nEdited video, selected frames:\n" << describe_frames(edited, cfg_.frames);
    os << "\nReturn one JSON object: {\"SC\": {\"score\": [";
    os << (mode == Mode::editing ? "edit accuracy, preservation" : "edit accuracy, over-editing");
    os << "], \"reasoning\": \"...\"}, \"PQ\": {\"score\": [naturalness, realism], \"reasoning\": \"...\"}, "
          "\"O_score\": overall}. Scores are 0 to 10.\n";
    return os.str();
  }

  JudgeScores judge(const world::Triplet& t, const world::Video& edited, Mode mode) override {
    const std::string system = system_prompt(t), user = user_message(t, edited, mode);
    const std::string key = sha256_hex(t.id + '\0' + system + '\0' + user + '\0' + cfg_.model);
    if (auto hit = read_cache(key)) {
      ++cache_hits_;
      return parse_judge_payload(*hit);
    }
    const std::string content = client_.complete(system, user);
    JudgeScores s = parse_judge_payload(content);
    write_cache(key, content);
    return s;
  }

  std::string name() const override { return "remote:" + cfg_.model; }
  std::size_t network_calls() const { return client_.network_calls(); }
  std::size_t cache_hits() const { return cache_hits_; }

 private:
  std::optional<std::string> read_cache(const std::string& key) const {
    if (cfg_.cache_dir.empty()) return std::nullopt;
    std::ifstream in(std::filesystem::path(cfg_.cache_dir) / (key + ".txt"), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // Written to a temporary name then renamed, so readers never see a partial file.
  void write_cache(const std::string& key, const std::string& content) const {
    if (cfg_.cache_dir.empty()) return;
    const auto dir = std::filesystem::path(cfg_.cache_dir);
    std::ostringstream tid;
    tid << std::this_thread::get_id();
    const auto tmp = dir / (key + ".tmp." + tid.str());
    {
      std::ofstream out(tmp, std::ios::binary);
      out << content;
    }
    std::filesystem::rename(tmp, dir / (key + ".txt"));
  }

  RemoteJudgeConfig cfg_;
  critic::PromptTemplate tmpl_;
  ChatClient client_;
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace revise::bench
