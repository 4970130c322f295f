#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cueforge {

/// Seeded generator with platform-independent distributions.
///
/// std::mt19937_64's output sequence is fixed by the standard, but the
/// std::*_distribution adaptors are not, so the draws below are implemented
/// here to keep generated datasets byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// k distinct values from [0, n), in draw order (Floyd's algorithm).
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// Independent stream for item `index` of a dataset seeded with `seed`.
  static Rng for_item(std::uint64_t seed, std::uint64_t index) { return Rng(seed ^ index); }

  /// Decorrelated sub-seed for pipeline stage `stream` (splitmix64 finalizer).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cueforge
