#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fragflow::rng {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream seeds for parallel workers: (master, stream, index) -> seed.
inline uint64_t derive_seed(uint64_t master, uint64_t stream, uint64_t index) {
  return splitmix64(splitmix64(master ^ (stream * 0x9e3779b97f4a7c15ULL)) + index);
}

// mt19937_64 core with hand-rolled distributions so draws are identical
// across standard libraries.
class Engine {
 public:
  explicit Engine(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  double uniform() {  // [0,1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, one draw per call
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  int uniform_int(int n) {  // [0,n), n>0
    return static_cast<int>(next() % static_cast<uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // CDF walk; probs need not be exactly normalized.
  int categorical(const std::vector<double>& probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fragflow::rng
