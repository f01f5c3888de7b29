#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "emoflow/error.hpp"
#include "emoflow/util/sha256.hpp"

namespace emoflow {

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp =
                                     std::chrono::system_clock::now()) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
#if defined(_WIN32)
  gmtime_s(&tm, &t);
#else
  gmtime_r(&t, &tm);
#endif
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Reproducibility record written once per run: what ran, with which knobs,
/// and how often the degraded paths fired.
struct RunManifest {
  std::string run_id;
  std::string kind;             // strategy / workflow / ensemble / knn ...
  std::string backend_model;
  double temperature = 0.0;
  int max_tokens = 0;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  std::string prompt_checksum;

  struct Counts {
    std::uint64_t instances = 0;
    std::uint64_t backend_calls = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t fallbacks = 0;
    std::uint64_t flagged = 0;  // off-menu adjudications, kept stage-1 labels
  } counts;

  std::map<std::string, std::string> extra;  // tie rule, output path, ...

  /// run id = kind + start stamp + short digest of the identifying fields.
  void assign_run_id() {
    std::string stamp = started.empty() ? utc_timestamp() : started;
    std::string compact;
    for (char c : stamp) {
      if (c != '-' && c != ':') compact += c;
    }
    const std::string digest = util::sha256_hex(
        kind + "|" + backend_model + "|" + std::to_string(seed) + "|" + stamp);
    run_id = kind + "-" + compact + "-" + digest.substr(0, 8);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["run_id"] = run_id;
    j["kind"] = kind;
    j["backend_model"] = backend_model;
    j["temperature"] = temperature;
    j["max_tokens"] = max_tokens;
    j["seed"] = seed;
    j["started"] = started;
    j["finished"] = finished;
    j["prompt_checksum"] = prompt_checksum;
    j["counts"] = {
        {"instances", counts.instances},
        {"backend_calls", counts.backend_calls},
        {"cache_hits", counts.cache_hits},
        {"fallbacks", counts.fallbacks},
        {"flagged", counts.flagged},
    };
    j["extra"] = extra;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.run_id = j.value("run_id", "");
    m.kind = j.value("kind", "");
    m.backend_model = j.value("backend_model", "");
    m.temperature = j.value("temperature", 0.0);
    m.max_tokens = j.value("max_tokens", 0);
    m.seed = j.value("seed", std::uint64_t{0});
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.prompt_checksum = j.value("prompt_checksum", "");
    if (j.contains("counts")) {
      const auto& c = j["counts"];
      m.counts.instances = c.value("instances", std::uint64_t{0});
      m.counts.backend_calls = c.value("backend_calls", std::uint64_t{0});
      m.counts.cache_hits = c.value("cache_hits", std::uint64_t{0});
      m.counts.fallbacks = c.value("fallbacks", std::uint64_t{0});
      m.counts.flagged = c.value("flagged", std::uint64_t{0});
    }
    if (j.contains("extra")) {
      m.extra = j["extra"].get<std::map<std::string, std::string>>();
    }
    return m;
  }
};

inline void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot write manifest: " + path);
  out << m.to_json().dump(2) << '\n';
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoFailure, "cannot open manifest: " + path);
  nlohmann::json j;
  in >> j;
  return RunManifest::from_json(j);
}

}  // namespace emoflow
