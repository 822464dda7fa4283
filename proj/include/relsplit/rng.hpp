#ifndef RELSPLIT_RNG_HPP
#define RELSPLIT_RNG_HPP

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace relsplit {

// std::mt19937_64 is fully specified by the standard, but the std::
// distributions and std::shuffle are not. Everything that must reproduce
// across toolchains goes through these helpers instead.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeds an engine from a base seed and a stream tag, so independent
/// consumers of one user seed do not share a sequence.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream + 0x51ed27)));
}

/// Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
inline std::uint64_t uniform_index(std::mt19937_64 &eng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do {
    v = eng();
  } while (v >= limit);
  return v % n;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform_real(std::mt19937_64 &eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(std::mt19937_64 &eng, double p) { return uniform_real(eng) < p; }

template <typename T> void shuffle(std::span<T> items, std::mt19937_64 &eng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(eng, i));
    std::swap(items[i - 1], items[j]);
  }
}

} // namespace relsplit

#endif // RELSPLIT_RNG_HPP
