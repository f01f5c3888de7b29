#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace emoflow::util {

/// Seeded RNG with portable derived draws. std::mt19937_64's raw output
/// sequence is fixed by the standard; the bounded draw and shuffle below are
/// implemented here so results are identical across platforms and standard
/// libraries (std::uniform_int_distribution and std::shuffle are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform draw in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform double in [0, 1).
  double unit() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Fisher-Yates shuffle using below(), deterministic for a given seed.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  /// Derives a per-key seed from a base seed (FNV-1a over the key, mixed with
  /// the base). Lets concurrent per-instance draws stay order-independent.
  static std::uint64_t derive(std::uint64_t base, std::string_view key) {
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : key) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h ^= base + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace emoflow::util
