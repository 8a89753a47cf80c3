#pragma once
#include <cmath>
#include <cstdint>

namespace geoflow {

// splitmix64; used both as a seed mixer and as the core generator so that
// streams derived from (seed, stream, iter) are cheap and independent enough
// for sampling work.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t stream, uint64_t iter = 0) {
  uint64_t s = seed;
  uint64_t a = splitmix64(s);
  s = a ^ (stream * 0x9e3779b97f4a7c15ull + 0x165667b19e3779f9ull);
  uint64_t b = splitmix64(s);
  s = b ^ (iter * 0xd6e8feb86659fd93ull + 1);
  return splitmix64(s);
}

// Deterministic RNG with a fixed bit-level contract (the standard library's
// distributions are implementation-defined, so we roll the few we need).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bull) {}
  Rng(uint64_t seed, uint64_t stream, uint64_t iter = 0) : Rng(mix_seed(seed, stream, iter)) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  // Box-Muller; both values of the pair are used.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0;
    do { u1 = uniform(); } while (u1 <= 0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  uint64_t state_;
  double cached_ = 0;
  bool has_cached_ = false;
};

}  // namespace geoflow
