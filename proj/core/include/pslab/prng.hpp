#pragma once

#include <cstdint>

namespace pslab {

// Counter-based deterministic generator built on the splitmix64 mixing
// function (Steele, Lea & Flood constants). Streams are keyed by folding
// arbitrary 64-bit keys into the state, so the same (seed, keys...) always
// produces the same sequence on every platform.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : state_(seed) {}

  // Derive an independent stream from this one without advancing it.
  Prng fork(std::uint64_t key) const {
    Prng p(state_ ^ (0x94D049BB133111EBull * (key + 1)));
    p.next_u64();
    return p;
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

// Stable 64-bit key for strings (FNV-1a), used to derive per-name streams.
inline std::uint64_t key_of(const char* s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (; *s; ++s) h = (h ^ static_cast<unsigned char>(*s)) * 0x100000001B3ull;
  return h;
}

}  // namespace pslab
