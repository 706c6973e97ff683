#pragma once

// Deterministic counter-based random number generator (SplitMix64).  Every
// draw is a pure function of (seed, counter), so streams can be forked per
// sample and replayed independently of evaluation order or thread count.

#include <cstdint>
#include <cmath>
#include <stdexcept>

#include "core.hpp"

namespace oedtomo {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Raw 64-bit draw: advances the SplitMix64 state by the golden gamma and
  // applies the finalizer mix.
  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1): top 53 bits scaled by 2^-53.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in the closed range [lo, hi].
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Standard normal via Box-Muller; consumes two uniforms per draw.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Derives an independent stream keyed by (seed, stream_id); used to give
  // each sample its own reproducible noise sequence.
  Rng fork(std::uint64_t stream_id) const {
    std::uint64_t z = state_ ^ (0xD1B54A32D192ED03ULL + stream_id * 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= (z >> 31);
    return Rng(z);
  }

 private:
  std::uint64_t state_;
};

}  // namespace oedtomo
