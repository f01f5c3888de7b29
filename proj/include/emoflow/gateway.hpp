#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoflow/backend.hpp"
#include "emoflow/cache.hpp"
#include "emoflow/chat.hpp"
#include "emoflow/error.hpp"
#include "emoflow/util/parallel.hpp"

namespace emoflow {

/// Admits at most `rate` requests per second, process-wide for the owning
/// gateway. Admission times are spaced by 1/rate, so any window of w seconds
/// sees at most w*rate+1 admissions.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second)
      : interval_(per_second > 0 ? std::chrono::duration<double>(1.0 / per_second)
                                 : std::chrono::duration<double>(0)) {}

  void admit() {
    if (interval_.count() <= 0) return;
    std::chrono::steady_clock::time_point wake;
    {
      std::lock_guard<std::mutex> lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      if (next_free_ < now) next_free_ = now;
      wake = next_free_;
      next_free_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          interval_);
    }
    std::this_thread::sleep_until(wake);
  }

 private:
  std::mutex mu_;
  std::chrono::duration<double> interval_;
  std::chrono::steady_clock::time_point next_free_{};
};

/// Counters a run manifest wants to know about.
struct GatewayStats {
  std::uint64_t backend_calls = 0;  // attempts that reached the backend
  std::uint64_t cache_hits = 0;
};

/// Provider access with the operational contract strategies rely on:
/// cache-first lookup, bounded retries with exponential backoff on transient
/// failures, a process-global rate limit, and order-preserving bounded
/// parallel batches. Shareable across threads.
class Gateway {
 public:
  Gateway(BackendConfig cfg, std::shared_ptr<ChatBackend> backend,
          ResponseCache cache = ResponseCache())
      : cfg_(std::move(cfg)),
        backend_(std::move(backend)),
        cache_(std::move(cache)),
        limiter_(cfg_.requests_per_second) {
    cfg_.validate();
  }

  const BackendConfig& config() const { return cfg_; }
  ChatBackend& backend() { return *backend_; }

  /// Fills in the config's model and decoding defaults; strategies only
  /// supply messages.
  ChatRequest make_request(std::vector<ChatMessage> messages) const {
    ChatRequest req;
    req.model = cfg_.model;
    req.messages = std::move(messages);
    req.temperature = cfg_.temperature;
    req.max_tokens = cfg_.max_tokens;
    return req;
  }

  /// One completion: cache lookup, then rate-limited backend attempts under
  /// the retry policy, then cache store. Transient failures and timeouts are
  /// retried; auth failures abort immediately.
  std::string complete(const ChatRequest& req) {
    const std::string key = cache_key(req);
    if (auto hit = cache_.get(key)) {
      cache_hits_.fetch_add(1);
      return *hit;
    }
    const std::string text = attempt_with_retries([&] {
      return backend_->complete(req);
    });
    cache_.put(key, text);
    return text;
  }

  /// Batch variant: at most max_in_flight requests execute concurrently and
  /// the result vector lines up with the input vector no matter how the
  /// backend interleaves completions. Item failures stay positional; one bad
  /// request never sinks the batch.
  std::vector<Result<std::string>> complete_batch(
      const std::vector<ChatRequest>& reqs) {
    std::vector<Result<std::string>> results(
        reqs.size(), Result<std::string>::failure(ErrorCode::TransientFailure,
                                                  "not executed"));
    util::parallel_for(reqs.size(), cfg_.max_in_flight, [&](std::size_t i) {
      try {
        results[i] = complete(reqs[i]);
      } catch (const EmoflowError& e) {
        results[i] = e.error();
      } catch (const std::exception& e) {
        results[i] = Error{ErrorCode::TransientFailure, e.what()};
      }
    });
    return results;
  }

  /// Embedding fetch with the same cache/retry/rate-limit treatment as
  /// completions. Cached as the raw provider vector (JSON array).
  std::vector<double> embed(const std::string& text) {
    const std::string key = embedding_cache_key(cfg_.model, text);
    if (auto hit = cache_.get(key)) {
      cache_hits_.fetch_add(1);
      try {
        return nlohmann::json::parse(*hit).get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        // fall through to a fresh fetch on a corrupt entry
      }
    }
    const std::vector<double> vec = attempt_with_retries([&] {
      return backend_->embed(cfg_.model, text);
    });
    cache_.put(key, nlohmann::json(vec).dump());
    return vec;
  }

  GatewayStats stats() const {
    return {backend_calls_.load(), cache_hits_.load()};
  }

  std::size_t max_in_flight() const { return cfg_.max_in_flight; }

 private:
  template <class Fn>
  auto attempt_with_retries(Fn&& fn) -> decltype(fn()) {
    auto backoff = cfg_.retry.initial_backoff;
    Error last{ErrorCode::TransientFailure, "no attempts made"};
    for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
      limiter_.admit();
      backend_calls_.fetch_add(1);
      try {
        return fn();
      } catch (const EmoflowError& e) {
        if (e.code() == ErrorCode::AuthFailure ||
            e.code() == ErrorCode::ConfigInvalid) {
          throw;  // not recoverable by retrying
        }
        last = e.error();
      }
      if (attempt < cfg_.retry.max_attempts) {
        if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
    raise(ErrorCode::ExhaustedRetries,
          "gave up after " + std::to_string(cfg_.retry.max_attempts) +
              " attempts; last error " + last.to_string());
  }

  BackendConfig cfg_;
  std::shared_ptr<ChatBackend> backend_;
  ResponseCache cache_;
  RateLimiter limiter_;
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
};

}  // namespace emoflow
