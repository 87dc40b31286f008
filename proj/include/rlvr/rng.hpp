#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace rlvr {

/// Independent streams are addressed by (seed, purpose, index).
enum class StreamPurpose : std::uint32_t { training = 1, evaluation = 2, scenario_generation = 3 };

/// Seed-addressable stream over std::mt19937_64. Variates are derived from
/// raw engine output rather than <random> distributions, whose algorithms
/// are implementation-defined, so sequences are identical across toolchains.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Inverse-CDF draw; rounding slack at the top end falls to the last index.
  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return probs.size() - 1;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rlvr
