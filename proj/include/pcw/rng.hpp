#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <numbers>

namespace pcw {

/// Deterministic counter-based random stream (splitmix64 core).
///
/// Distribution sampling is hand-rolled on purpose: std::uniform_real_distribution
/// and friends are implementation-defined, and datasets/checkpoints must be
/// byte-identical across toolchains. Streams are cheap value types; derive one
/// per (purpose, counter) pair instead of sharing a global generator.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform index in [0, n). Fixed-point multiply keeps it bias-free for any
  /// n that fits in 53 bits, which covers every use here.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  /// Standard normal via Box-Muller. Always consumes two uniforms and never
  /// caches the second value, so the draw count per call is fixed.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle driven by this stream.
  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(std::distance(first, last));
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = uniform_index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Stream keyed by a root seed plus a tag path, e.g. {kTagData, instance, view}.
/// Same inputs always give the same stream; distinct paths decorrelate.
inline RngStream derive_stream(std::uint64_t root, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = detail::mix64(root ^ 0x2545f4914f6cdd1dULL);
  for (std::uint64_t t : tags) s = detail::mix64(s ^ (t + 0x9e3779b97f4a7c15ULL));
  return RngStream(s);
}

// Purpose tags for derive_stream paths.
inline constexpr std::uint64_t kTagInit = 1;
inline constexpr std::uint64_t kTagData = 2;
inline constexpr std::uint64_t kTagStep = 3;
inline constexpr std::uint64_t kTagSplit = 4;
inline constexpr std::uint64_t kTagEval = 5;

}  // namespace pcw
