#ifndef GQL_RNG_HPP_
#define GQL_RNG_HPP_

#include <cstdint>
#include <span>

namespace gql {

// Deterministic xoshiro256++ stream seeded through splitmix64.
// Every consumer of randomness takes one of these by reference, and
// independent work units get independent streams via derive(), so results
// do not depend on thread count or evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // One draw from a finite categorical distribution; probs need not be
  // exactly normalized, the walk just never leaves the support.
  int categorical(std::span<const double> probs) {
    const double u = uniform01();
    double cum = 0.0;
    int last_positive = 0;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
      if (probs[i] > 0.0) last_positive = i;
      cum += probs[i];
      if (u < cum) return i;
    }
    return last_positive;
  }

  // Child stream for work unit `id`; deterministic and independent of any
  // draws made from this stream.
  Rng derive(std::uint64_t id) const {
    std::uint64_t x = state_[0] ^ rotl(state_[2], 29);
    x ^= (id + 1) * 0x9E3779B97F4A7C15ULL;
    return Rng(splitmix64(x));
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  std::uint64_t state_[4];
};

}  // namespace gql

#endif  // GQL_RNG_HPP_
