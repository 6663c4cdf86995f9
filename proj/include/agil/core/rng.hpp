#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "agil/core/error.hpp"

namespace agil {

// Deterministic RNG with hand-rolled distributions. std::*_distribution is
// implementation-defined, so every draw here is built directly from the
// mt19937_64 bit stream: identical seeds give identical values on every
// platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(mix(seed, 0)), seed_(seed) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; the pair's second value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  // Uniform integer in [0, n). Rejection sampling keeps the draw exact.
  int randint(int n) {
    require(n > 0, "Rng::randint: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x = eng_();
    while (x >= limit) x = eng_();
    return static_cast<int>(x % un);
  }

  // Derive an independent stream (per environment, per run, ...) from the
  // base seed, unaffected by how far this engine has advanced.
  Rng split(std::uint64_t stream) const { return Rng(mix(seed_, stream + 1)); }

  // mt19937_64 state round-trips through text per the standard, which makes
  // checkpoints portable.
  std::string serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << eng_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << spare_ << ' ' << seed_;
    return os.str();
  }

  static Rng deserialize(const std::string& text) {
    Rng r(0);
    std::istringstream is(text);
    int has_spare = 0;
    is >> r.eng_ >> has_spare >> r.spare_ >> r.seed_;
    require(!is.fail(), "Rng::deserialize: malformed state");
    r.has_spare_ = has_spare != 0;
    return r;
  }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 eng_;
  std::uint64_t seed_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace agil
