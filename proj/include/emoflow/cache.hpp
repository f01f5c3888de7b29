#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "emoflow/error.hpp"
#include "emoflow/manifest.hpp"

namespace emoflow {

/// Content-addressed response cache: one JSON file per entry, named by the
/// request digest. Writes go to a temp file then rename, so readers never
/// observe a partial entry and concurrent writers of the same key are safe.
class ResponseCache {
 public:
  ResponseCache() = default;

  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  bool enabled() const { return !dir_.empty(); }

  std::optional<std::string> get(const std::string& key) const {
    if (!enabled()) return std::nullopt;
    std::ifstream in(entry_path(key), std::ios::binary);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;  // treat a corrupt entry as a miss
    }
    if (!j.contains("response")) return std::nullopt;
    return j["response"].get<std::string>();
  }

  void put(const std::string& key, const std::string& response) const {
    if (!enabled()) return;
    nlohmann::json j{
        {"key", key},
        {"response", response},
        {"created", utc_timestamp()},
    };
    const std::filesystem::path final_path = entry_path(key);
    std::filesystem::path tmp = final_path;
    tmp += ".tmp." + std::to_string(
        std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) {
        raise(ErrorCode::IoFailure, "cannot write cache entry: " + tmp.string());
      }
      out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, final_path);
  }

  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& key) const {
    return dir_ / (key + ".json");
  }

  std::filesystem::path dir_;
};

}  // namespace emoflow
