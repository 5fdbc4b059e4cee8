#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctxshape::text {

// Lowercased words: maximal runs of ASCII alphanumerics. Bytes >= 0x80 are
// treated as word characters so UTF-8 words survive intact.
std::vector<std::string> words(std::string_view s);

std::string join(std::span<const std::string> parts, std::string_view sep);

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;

// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a(std::string_view s, std::uint64_t basis = kFnvOffset);

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Top 53 bits mapped to [0, 1).
double to_unit_interval(std::uint64_t bits);

// Small deterministic generator whose output sequence is identical on every
// standard library (std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  double uniform();
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[below(items.size())];
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace ctxshape::text
