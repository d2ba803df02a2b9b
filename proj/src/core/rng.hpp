#pragma once

#include <cmath>
#include <cstdint>

namespace audioinv {

// Deterministic PRNG (splitmix64-seeded xoshiro256**). Distributions are
// implemented from raw bits so streams are reproducible across platforms
// and standard-library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& si : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      si = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform on [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  float uniform_f(float lo, float hi) { return static_cast<float>(uniform(lo, hi)); }

  // integer uniform on [0, n)
  uint64_t next_below(uint64_t n) {
    // rejection sampling to keep the draw unbiased
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // integer uniform on [lo, hi] inclusive
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(next_below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // standard normal via Box-Muller (no cached spare: keeps the stream
  // position a pure function of call count)
  double normal() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  float normal_f(float mean, float stddev) {
    return mean + stddev * static_cast<float>(normal());
  }

  // decorrelated child stream, for per-worker determinism
  Rng fork(uint64_t stream) const {
    Rng r(s_[0] ^ (0x632be59bd9b4e019ULL * (stream + 1)));
    return r;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace audioinv
