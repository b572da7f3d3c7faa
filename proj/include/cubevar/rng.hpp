#pragma once

// Deterministic, platform-independent random streams. Monte Carlo paths use
// counter-based derivation: stream i of a run is seeded by mixing (seed, i),
// so paths are independent and may be generated in any order or thread.

#include <cmath>
#include <cstdint>

namespace cubevar {

struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t s) : state(s) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

// xoshiro256++ seeded through SplitMix64.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in (0, 1], 53-bit resolution; never returns 0 so log() is safe
  double uniform01() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

// Standard normal draws via Box-Muller on top of xoshiro256++.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = rng_.uniform01();
    const double u2 = rng_.uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  Xoshiro256pp& raw() { return rng_; }

 private:
  Xoshiro256pp rng_;
  bool have_cached_{false};
  double cached_{};
};

// Independent stream for path `index` of a run keyed by `seed`.
inline GaussianStream stream_for_path(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 sm(seed ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
  const std::uint64_t mixed = sm.next() ^ (sm.next() << 1);
  return GaussianStream(mixed);
}

}  // namespace cubevar
