#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fabsim {

// Deterministic RNG wrapper. std::mt19937_64 output is pinned by the
// standard; the gaussian below is hand-rolled (Box-Muller) because
// std::normal_distribution's sequence is implementation-defined and run
// metrics must be byte-identical for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent stream for a named noise channel.
  static Rng channel(std::uint64_t master_seed, std::uint64_t channel_id) {
    return Rng(master_seed * 0x9E3779B97F4A7C15ull + channel_id + 1ull);
  }

  double uniform01() {
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double gaussian(double sigma) { return sigma <= 0.0 ? 0.0 : sigma * gaussian(); }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fabsim
