#pragma once

#include <cidet/common.hpp>

#include <cmath>
#include <cstdint>
#include <random>

namespace cidet {

/// splitmix64 finalizer; used for seed derivation only.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derive an independent per-trial seed from a master seed.  Trials are
/// order-independent: trial i always gets the same stream no matter which
/// thread runs it.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial_index) {
  return mix64(master ^ mix64(trial_index + 1));
}

/// Deterministic Gaussian stream.  Box-Muller on top of mt19937_64 so the
/// byte-exact sequence is ours, not the standard library's.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1], u2 in [0,1)
    double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * M_PI * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  Vec next_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = next();
    return v;
  }

  /// Uniform double in [0,1).
  double next_uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

  std::uint64_t next_raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cidet
