#ifndef BAIM_RNG_HPP
#define BAIM_RNG_HPP

#include <cmath>
#include <cstdint>

#include "baim/tensor.hpp"
#include "baim/types.hpp"

namespace baim {

// Counter-based SplitMix64 stream. A draw is a pure function of
// (seed, counter), so identical (seed, counter) pairs replay identical
// sequences on every platform; platform-default RNGs are not used
// anywhere in the library. fork() derives statistically independent
// child streams from integer tags.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  RngStream() = default;
  explicit RngStream(std::uint64_t s) : seed(s) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    counter += 1;
    return mix(seed + counter * 0x9E3779B97F4A7C15ull);
  }

  RngStream fork(std::uint64_t tag) const {
    return RngStream(mix(seed ^ mix(tag + 0x632BE59BD9B4E019ull)));
  }

  // [0,1), 53-bit resolution; exact dyadic rationals, bitwise portable.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  long uniform_index(long n) {  // [0,n)
    return static_cast<long>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Box-Muller; consumes exactly two u64 draws per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  void fill_uniform(Tensor& t, double lo, double hi) {
    for (long i = 0; i < t.size(); ++i) t[i] = static_cast<real>(uniform(lo, hi));
  }

  void fill_normal(Tensor& t) {
    for (long i = 0; i < t.size(); ++i) t[i] = static_cast<real>(normal());
  }

  Tensor normal_vec(long n) {
    Tensor t({n});
    fill_normal(t);
    return t;
  }
};

// Seeded Fisher-Yates; used for epoch-level example ordering.
template <typename T>
inline void shuffle(std::vector<T>& items, RngStream& rng) {
  for (long i = static_cast<long>(items.size()) - 1; i > 0; --i) {
    long j = rng.uniform_index(i + 1);
    std::swap(items[static_cast<std::size_t>(i)], items[static_cast<std::size_t>(j)]);
  }
}

}  // namespace baim

#endif  // BAIM_RNG_HPP
