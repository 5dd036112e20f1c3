#pragma once

// Deterministic random streams.
//
// All stochastic pieces of the library (solver restarts, random directions,
// property sampling) draw from this generator instead of std::
// distributions, whose output is implementation-defined.  The generator is
// xoshiro256++ seeded through splitmix64, and the float conversions are
// fixed bit manipulations, so a given seed produces the same sequence on
// every platform and standard library.

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace rdmft {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64: decorrelates nearby seeds before filling the state.
    std::uint64_t x = seed;
    for (auto& word : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      word = z ^ (z >> 31);
    }
  }

  /// Derive an independent stream, e.g. one per solver restart.  Mixing the
  /// index through the seed keeps streams reproducible regardless of the
  /// order in which they are consumed (they may run on different threads).
  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    return Rng(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (the pair partner is cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = r * std::sin(angle);
    have_spare_ = true;
    return r * std::cos(angle);
  }

  /// Uniform point on the unit sphere in R^n.
  Eigen::VectorXd unit_vector(int n) {
    Eigen::VectorXd v(n);
    double norm2 = 0.0;
    do {
      for (int i = 0; i < n; ++i) v[i] = normal();
      norm2 = v.squaredNorm();
    } while (norm2 < 1e-24);
    return v / std::sqrt(norm2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4] = {};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rdmft
