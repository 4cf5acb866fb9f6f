#pragma once

#include <cmath>
#include <cstdint>

namespace drape {

// Counter-based deterministic RNG. Every consumer derives its own stream from
// a root seed plus a handful of domain keys (iteration, pixel index, ...), so
// parallel and serial runs draw identical values regardless of scheduling.
class Prng {
 public:
  explicit Prng(uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  // Derive a child stream; order of keys matters.
  template <typename... Keys>
  static Prng keyed(uint64_t seed, Keys... keys) {
    uint64_t s = mix(seed ^ 0x9e3779b97f4a7c15ull);
    ((s = mix(s ^ static_cast<uint64_t>(keys))), ...);
    Prng p(0);
    p.state_ = s;
    return p;
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static uint64_t mix(uint64_t z) {  // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Source of uniform draws in [0,1); lets tests stub the sampler.
class UniformSource {
 public:
  virtual ~UniformSource() = default;
  virtual double draw() = 0;
};

class PrngUniformSource final : public UniformSource {
 public:
  explicit PrngUniformSource(Prng rng) : rng_(rng) {}
  double draw() override { return rng_.uniform(); }

 private:
  Prng rng_;
};

}  // namespace drape
