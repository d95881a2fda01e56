#pragma once

// Hand-rolled generators for property tests. Each generator is a pure
// function of a seeded engine, so every failing case can be replayed from
// the printed seed and index.

#include <cstdint>
#include <cmath>
#include <random>

namespace drlab::testing {

struct Config {
  double m, r0, p0;
};

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  /// Log-uniform on [lo, hi], for parameters spanning several decades.
  double log_uniform(double lo, double hi);

  /// Offspring mean in [lo, hi] and an initial law away from the boundary.
  Config config(double m_lo = 1.05, double m_hi = 6.0) {
    return {uniform(m_lo, m_hi), uniform(0.01, 0.99), uniform(0.01, 0.99)};
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline double Gen::log_uniform(double lo, double hi) {
  return std::exp(uniform(std::log(lo), std::log(hi)));
}

}  // namespace drlab::testing
