#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace fsc {

/// Random stream owned by the caller. All stochastic operations in the
/// library draw from one of these; nothing keeps hidden generator state.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  /// Uniform draw in [0, 1).
  double uniform() { return unit_(gen_); }

  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Samples an index from a probability vector by CDF walk.
  /// The vector must sum to ~1; the last index absorbs rounding slack.
  int sample(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("sample: empty distribution");
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  /// Bernoulli draw with success probability p.
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& raw() { return gen_; }

private:
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Per-run seed derived from a base seed and a run index. Stable across
/// versions: seed(base, r) = mix64(base ^ mix64(r)).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run_index) {
  return mix64(base ^ mix64(run_index));
}

} // namespace fsc
