#ifndef BLOCKGP_RNG_HPP
#define BLOCKGP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace blockgp {

// Counter-based stream: draw i is a pure function of (key, i), so results do
// not depend on evaluation order and parallel consumers can share a master
// seed via independent keys.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(derive_key(seed, 0, 0)) {}

  /// Stream keyed by (seed, stream, substream); used to give every
  /// replication / purpose its own independent sequence.
  static Rng keyed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
    Rng r(0);
    r.key_ = derive_key(seed, stream, substream);
    return r;
  }

  std::uint64_t next_u64() { return mix(key_ + (counter_++) * kGamma); }

  /// Uniform on the open interval (0,1); never returns an exact endpoint.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two counter steps.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n); n >= 1.
  int uniform_int(int n) {
    // rejection sampling on the top bits keeps the draw exactly uniform
    const std::uint64_t bound = ~std::uint64_t{0} - ~std::uint64_t{0} % static_cast<std::uint64_t>(n);
    std::uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return static_cast<int>(x % static_cast<std::uint64_t>(n));
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[uniform_int(i + 1)]);
    }
  }

  /// Random permutation of {0,...,n-1}.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
    std::uint64_t k = mix(seed + kGamma);
    k = mix(k ^ mix(stream + 2 * kGamma));
    k = mix(k ^ mix(substream + 3 * kGamma));
    return k;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace blockgp

#endif  // BLOCKGP_RNG_HPP
