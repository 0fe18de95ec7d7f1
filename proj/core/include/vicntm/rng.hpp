#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace vicntm {

// Counter-based splitmix64 stream. The whole generator state is (seed,
// counter), which makes checkpointed runs resumable bit-exactly: restoring
// those two integers reproduces the tail of the stream.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  uint64_t next_u64() {
    uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // Uniform int in [0, n). Modulo bias is negligible for n << 2^64.
  int uniform_int(int n) {
    return int(next_u64() % uint64_t(n));
  }

  // Box-Muller without caching the second value, so state stays a plain
  // counter. Uses u1 in (0, 1] to keep the log finite.
  double normal() {
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = double(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  template <typename M>
  void fill_normal(M& m) {
    for (auto& v : m.data) v = normal();
  }

  // Fisher-Yates.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(p[i], p[uniform_int(i + 1)]);
    return p;
  }

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

 private:
  uint64_t seed_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace vicntm
