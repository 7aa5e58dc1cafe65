#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace evflow {

// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// the distribution transforms below are hand-rolled because std::
// distributions are implementation-defined and would break cross-stdlib
// reproducibility of seeds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  // Standard normal via Box-Muller, one spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Inverse-transform Poisson (sum of exponential gaps). O(mean) per draw.
  std::int64_t poisson(double mean) {
    std::int64_t count = 0;
    double acc = 0.0;
    while (true) {
      double u = 0.0;
      while (u == 0.0) u = uniform();
      acc -= std::log(u);
      if (acc >= mean) break;
      ++count;
    }
    return count;
  }

  // Derive an independent stream for a sub-task.
  Rng fork(std::uint64_t salt) {
    return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL));
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace evflow
