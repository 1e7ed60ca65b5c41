#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace branchnet {

/// splitmix64 mixing step. Used to derive independent engine seeds from a
/// single master seed so that the split, per-tree fitting, and per-epoch
/// shuffle streams never overlap.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  split = 1,
  tree = 2,
  shuffle = 3,
  blobs = 4,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ index);
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

// Draw helpers are hand-rolled: std::uniform_*_distribution output is not
// reproducible across standard library implementations.

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double strictly inside (0, 1).
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform integer in [0, n); n > 0. Modulo rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

/// Box-Muller standard normal generator; keeps the spare value so draws come
/// in a fixed deterministic order.
struct Gaussian {
  explicit Gaussian(Rng& r) : rng(&r) {}
  double operator()() {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    const double u1 = uniform_open01(*rng);
    const double u2 = uniform01(*rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  Rng* rng;
  bool have_spare = false;
  double spare = 0.0;
};

/// round half away from zero; the rounding rule used by every sizing formula.
inline long round_half_away(double x) {
  return static_cast<long>(x >= 0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

}  // namespace branchnet
