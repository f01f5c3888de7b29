#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoflow/chat.hpp"
#include "emoflow/error.hpp"
#include "emoflow/util/sha256.hpp"

namespace emoflow {

enum class Dialect { OpenAi, Anthropic, Mock };

inline Dialect parse_dialect(const std::string& name) {
  if (name == "openai") return Dialect::OpenAi;
  if (name == "anthropic") return Dialect::Anthropic;
  if (name == "mock") return Dialect::Mock;
  raise(ErrorCode::ConfigInvalid, "unknown dialect: " + name);
}

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};  // doubles per attempt
};

/// Everything needed to talk to one backend: where, as whom, and how hard to
/// push. Credentials are named indirectly via an environment variable and
/// never stored in configs or manifests.
struct BackendConfig {
  std::string endpoint;            // e.g. https://api.openai.com
  std::string api_key_env;         // env var holding the credential
  std::string model;
  Dialect dialect = Dialect::Mock;
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
  double requests_per_second = 8.0;
  std::size_t max_in_flight = 4;
  double temperature = 0.0;
  int max_tokens = 512;
  std::size_t mock_embedding_dim = 16;
  nlohmann::json mock_script;      // optional scripted rules (mock dialect)

  void validate() const {
    if (model.empty()) raise(ErrorCode::ConfigInvalid, "backend model is empty");
    if (retry.max_attempts < 1) {
      raise(ErrorCode::ConfigInvalid, "retry max_attempts must be >= 1");
    }
    if (requests_per_second <= 0) {
      raise(ErrorCode::ConfigInvalid, "rate limit must be > 0");
    }
    if (dialect != Dialect::Mock && endpoint.empty()) {
      raise(ErrorCode::ConfigInvalid, "endpoint required for HTTP dialects");
    }
  }

  std::string resolve_api_key() const {
    if (api_key_env.empty()) return "";
    const char* v = std::getenv(api_key_env.c_str());
    if (v == nullptr || *v == '\0') {
      raise(ErrorCode::AuthFailure,
            "credential env var not set: " + api_key_env);
    }
    return v;
  }
};

inline BackendConfig backend_config_from_json(const nlohmann::json& j) {
  BackendConfig cfg;
  cfg.dialect = parse_dialect(j.value("dialect", "mock"));
  cfg.endpoint = j.value("endpoint", "");
  cfg.api_key_env = j.value("api_key_env", "");
  cfg.model = j.value("model", "");
  cfg.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
  cfg.retry.max_attempts = j.value("max_attempts", 3);
  cfg.retry.initial_backoff =
      std::chrono::milliseconds(j.value("backoff_ms", 250));
  cfg.requests_per_second = j.value("requests_per_second", 8.0);
  cfg.max_in_flight = j.value("max_in_flight", std::size_t{4});
  cfg.temperature = j.value("temperature", 0.0);
  cfg.max_tokens = j.value("max_tokens", 512);
  cfg.mock_embedding_dim = j.value("mock_embedding_dim", std::size_t{16});
  if (j.contains("script")) cfg.mock_script = j["script"];
  cfg.validate();
  return cfg;
}

inline BackendConfig load_backend_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoFailure, "cannot open backend config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ConfigInvalid, path + ": " + e.what());
  }
  return backend_config_from_json(j);
}

/// One raw exchange with a provider. Implementations perform a single attempt
/// and signal failures with typed EmoflowError codes (TransientFailure,
/// AuthFailure, Timeout); the gateway layers retries on top.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  virtual std::string complete(const ChatRequest& req) = 0;

  virtual std::vector<double> embed(const std::string& model,
                                    const std::string& text) {
    (void)model;
    (void)text;
    raise(ErrorCode::ConfigInvalid, "backend has no embedding endpoint");
  }

  /// Requests that actually reached the backend (cache hits never show here).
  std::uint64_t call_count() const { return calls_.load(); }

 protected:
  void record_call() { calls_.fetch_add(1); }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

/// Scripted offline backend. Answers the first rule whose predicate matches
/// the concatenated message content; unmatched requests get the configurable
/// default. Rules can also fail a fixed number of times or stall, which is
/// how retry and ordering contracts get exercised in tests.
class MockBackend : public ChatBackend {
 public:
  struct Rule {
    std::function<bool(const ChatRequest&)> matches;
    std::string response;
    int fail_times = 0;                       // transient errors before success
    ErrorCode fail_code = ErrorCode::TransientFailure;
    std::chrono::milliseconds delay{0};
    std::shared_ptr<std::atomic<int>> failures_left =
        std::make_shared<std::atomic<int>>(0);
  };

  MockBackend() = default;
  explicit MockBackend(std::string default_response)
      : default_response_(std::move(default_response)) {}

  /// Appends a rule matching any message whose content contains `needle`.
  MockBackend& respond_when_contains(std::string needle, std::string response) {
    Rule r;
    r.matches = [needle = std::move(needle)](const ChatRequest& req) {
      for (const auto& m : req.messages) {
        if (m.content.find(needle) != std::string::npos) return true;
      }
      return false;
    };
    r.response = std::move(response);
    add_rule(std::move(r));
    return *this;
  }

  void add_rule(Rule rule) {
    rule.failures_left->store(rule.fail_times);
    std::lock_guard<std::mutex> lock(mu_);
    rules_.push_back(std::move(rule));
  }

  void set_default_response(std::string text) {
    std::lock_guard<std::mutex> lock(mu_);
    default_response_ = std::move(text);
  }

  std::string complete(const ChatRequest& req) override {
    record_call();
    std::chrono::milliseconds delay{0};
    std::shared_ptr<std::atomic<int>> failures;
    ErrorCode fail_code = ErrorCode::TransientFailure;
    std::string response;
    {
      std::lock_guard<std::mutex> lock(mu_);
      bool matched = false;
      for (const auto& r : rules_) {
        if (r.matches(req)) {
          matched = true;
          delay = r.delay;
          failures = r.failures_left;
          fail_code = r.fail_code;
          response = r.response;
          break;
        }
      }
      if (!matched) response = default_response_;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    if (failures && failures->fetch_sub(1) > 0) {
      raise(fail_code, "scripted failure");
    }
    return response;
  }

  /// Deterministic pseudo-embedding: coordinates derived from a digest of the
  /// text, so equal texts embed equally and similar texts do not. Good enough
  /// to exercise every embedding code path offline.
  std::vector<double> embed(const std::string& model,
                            const std::string& text) override {
    record_call();
    std::vector<double> v(embedding_dim_);
    std::string material = model + "\x1f" + text;
    std::size_t i = 0;
    int block = 0;
    while (i < v.size()) {
      const std::string digest =
          util::sha256_hex(material + "#" + std::to_string(block++));
      for (std::size_t off = 0; off + 8 <= digest.size() && i < v.size();
           off += 8) {
        const std::uint64_t bits =
            std::stoull(digest.substr(off, 8), nullptr, 16);
        v[i++] = static_cast<double>(bits) / 4294967295.0 * 2.0 - 1.0;
      }
    }
    return v;
  }

  void set_embedding_dim(std::size_t dim) { embedding_dim_ = dim; }

  /// Builds rules from the `script` block of a mock backend config:
  /// {"rules":[{"contains":"...","respond":"...","fail_times":0,
  ///            "error":"transient|auth|timeout","delay_ms":0}],
  ///  "default":"..."}
  void load_script(const nlohmann::json& script) {
    if (script.is_null()) return;
    if (script.contains("default")) {
      set_default_response(script["default"].get<std::string>());
    }
    if (!script.contains("rules")) return;
    for (const auto& jr : script["rules"]) {
      Rule r;
      const std::string needle = jr.value("contains", "");
      r.matches = [needle](const ChatRequest& req) {
        if (needle.empty()) return true;
        for (const auto& m : req.messages) {
          if (m.content.find(needle) != std::string::npos) return true;
        }
        return false;
      };
      r.response = jr.value("respond", "");
      r.fail_times = jr.value("fail_times", 0);
      const std::string err = jr.value("error", "transient");
      if (err == "auth") r.fail_code = ErrorCode::AuthFailure;
      else if (err == "timeout") r.fail_code = ErrorCode::Timeout;
      else r.fail_code = ErrorCode::TransientFailure;
      r.delay = std::chrono::milliseconds(jr.value("delay_ms", 0));
      add_rule(std::move(r));
    }
  }

 private:
  mutable std::mutex mu_;
  std::vector<Rule> rules_;
  std::string default_response_;
  std::size_t embedding_dim_ = 16;
};

}  // namespace emoflow
