#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoflow/error.hpp"
#include "emoflow/util/sha256.hpp"

namespace emoflow {

enum class Role { System, User, Assistant };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

inline ChatMessage system_message(std::string content) {
  return {Role::System, std::move(content)};
}
inline ChatMessage user_message(std::string content) {
  return {Role::User, std::move(content)};
}
inline ChatMessage assistant_message(std::string content) {
  return {Role::Assistant, std::move(content)};
}

/// Provider-agnostic chat-completion request. Temperature defaults to 0:
/// decoding is pinned for determinism unless a config overrides it.
struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 512;
};

/// Canonical serialization of a request: a compact JSON document with sorted
/// keys and the message list in order. Identical requests serialize
/// identically on every platform, so digests of this string are stable cache
/// keys.
inline std::string canonical_serialization(const ChatRequest& req) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : req.messages) {
    msgs.push_back({{"content", m.content}, {"role", role_name(m.role)}});
  }
  // nlohmann::json objects are key-sorted maps, so dump() is canonical.
  nlohmann::json j{
      {"max_tokens", req.max_tokens},
      {"messages", std::move(msgs)},
      {"model", req.model},
      {"temperature", req.temperature},
  };
  return j.dump();
}

/// Content digest of the canonical serialization (SHA-256 hex).
inline std::string cache_key(const ChatRequest& req) {
  return util::sha256_hex(canonical_serialization(req));
}

/// Embedding fetches share the cache machinery; their key covers the model,
/// the input text and the request kind so they never collide with chats.
inline std::string embedding_cache_key(const std::string& model,
                                       const std::string& text) {
  nlohmann::json j{{"input", text}, {"kind", "embedding"}, {"model", model}};
  return util::sha256_hex(j.dump());
}

}  // namespace emoflow
