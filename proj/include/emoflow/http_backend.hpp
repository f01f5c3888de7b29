#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoflow/backend.hpp"
#include "emoflow/chat.hpp"
#include "emoflow/error.hpp"

namespace emoflow {

/// Chat-completion access over HTTP for the two major wire formats. Each call
/// is a single attempt; the gateway decides whether to retry.
///
/// OpenAi dialect:   POST {endpoint}/v1/chat/completions, bearer auth,
///                   messages carry the system turn inline.
/// Anthropic dialect: POST {endpoint}/v1/messages, x-api-key auth, system
///                   text travels in its own field.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.dialect == Dialect::Mock) {
      raise(ErrorCode::ConfigInvalid, "HttpBackend cannot serve the mock dialect");
    }
  }

  std::string complete(const ChatRequest& req) override {
    record_call();
    switch (cfg_.dialect) {
      case Dialect::OpenAi: return complete_openai(req);
      case Dialect::Anthropic: return complete_anthropic(req);
      case Dialect::Mock: break;
    }
    raise(ErrorCode::ConfigInvalid, "unsupported dialect");
  }

  std::vector<double> embed(const std::string& model,
                            const std::string& text) override {
    record_call();
    if (cfg_.dialect != Dialect::OpenAi) {
      raise(ErrorCode::ConfigInvalid,
            "embeddings are only available on the openai dialect");
    }
    nlohmann::json body{{"model", model}, {"input", text}};
    const nlohmann::json resp =
        post_json("/v1/embeddings", body, bearer_headers());
    try {
      return resp.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::TransientFailure,
            std::string("malformed embedding response: ") + e.what());
    }
  }

 private:
  std::string complete_openai(const ChatRequest& req) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : req.messages) {
      msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    nlohmann::json body{
        {"model", req.model},
        {"messages", std::move(msgs)},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens},
    };
    const nlohmann::json resp =
        post_json("/v1/chat/completions", body, bearer_headers());
    try {
      return resp.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::TransientFailure,
            std::string("malformed completion response: ") + e.what());
    }
  }

  std::string complete_anthropic(const ChatRequest& req) {
    std::string system_text;
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : req.messages) {
      if (m.role == Role::System) {
        if (!system_text.empty()) system_text += "\n";
        system_text += m.content;
      } else {
        msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
      }
    }
    nlohmann::json body{
        {"model", req.model},
        {"messages", std::move(msgs)},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens},
    };
    if (!system_text.empty()) body["system"] = system_text;
    httplib::Headers headers{
        {"x-api-key", cfg_.resolve_api_key()},
        {"anthropic-version", "2023-06-01"},
    };
    const nlohmann::json resp = post_json("/v1/messages", body, headers);
    try {
      return resp.at("content").at(0).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::TransientFailure,
            std::string("malformed completion response: ") + e.what());
    }
  }

  httplib::Headers bearer_headers() const {
    return {{"Authorization", "Bearer " + cfg_.resolve_api_key()}};
  }

  nlohmann::json post_json(const std::string& path, const nlohmann::json& body,
                           const httplib::Headers& headers) {
    httplib::Client client(cfg_.endpoint);
    const auto secs =
        std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    client.set_connection_timeout(secs.count(), 0);
    client.set_read_timeout(secs.count(), 0);
    client.set_write_timeout(secs.count(), 0);

    const httplib::Result res =
        client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout ||
          err == httplib::Error::Read || err == httplib::Error::Write) {
        raise(ErrorCode::Timeout, "request timed out: " + httplib::to_string(err));
      }
      raise(ErrorCode::TransientFailure,
            "transport error: " + httplib::to_string(err));
    }
    if (res->status == 401 || res->status == 403) {
      raise(ErrorCode::AuthFailure,
            "authentication rejected (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status == 408 || res->status == 429 || res->status >= 500) {
      raise(ErrorCode::TransientFailure,
            "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    if (res->status != 200) {
      raise(ErrorCode::ConfigInvalid,
            "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::TransientFailure,
            std::string("unparseable response body: ") + e.what());
    }
  }

  BackendConfig cfg_;
};

/// Backend factory keyed by the config's dialect.
inline std::shared_ptr<ChatBackend> make_backend(const BackendConfig& cfg) {
  if (cfg.dialect == Dialect::Mock) {
    auto mock = std::make_shared<MockBackend>();
    mock->set_embedding_dim(cfg.mock_embedding_dim);
    mock->load_script(cfg.mock_script);
    return mock;
  }
  return std::make_shared<HttpBackend>(cfg);
}

}  // namespace emoflow
