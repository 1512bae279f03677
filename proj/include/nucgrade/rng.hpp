#pragma once

#include <cstdint>
#include <cmath>

namespace nucgrade {

// splitmix64, used to derive independent stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s = h ^ (a * 0x9e3779b97f4a7c15ull);
  h = splitmix64(s);
  s = h ^ (b * 0xc2b2ae3d27d4eb4full);
  return splitmix64(s);
}

// Deterministic random stream. Distributions are implemented explicitly so
// results do not depend on the standard library implementation.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : s_(seed ? seed : 0x853c49e6748fea9bull) {}

  std::uint64_t next_u64() { return splitmix64(s_); }

  // uniform in [0, 1)
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) { return n ? next_u64() % n : 0; }

  int uniform_int(int lo, int hi) {  // inclusive range [lo, hi]
    return lo + int(uniform_int(std::uint64_t(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.28318530717958647692 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t s_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nucgrade
