#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace kdseq {

/// Seedable generator whose outputs depend only on the seed and the call
/// sequence; no std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// Deterministic child seed for an independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace kdseq
