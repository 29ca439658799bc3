#pragma once
// Deterministic RNG streams. Every consumer (scene draw, pilot draw, noise
// draw, calibration, ...) derives its own engine from (base seed, salts), so
// results are reproducible bit-for-bit regardless of evaluation order or
// thread scheduling.

#include <cstdint>
#include <random>

#include "isac/common.hpp"

namespace isac {

using Rng = std::mt19937_64;

// splitmix64 finalizer: cheap, good avalanche. Used only for seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stream tags keep independent random purposes on independent streams even
// when they share the same (seed, trial) coordinates.
enum class Stream : std::uint64_t {
  Scene = 1,
  PilotsStage1 = 2,
  NoiseStage1 = 3,
  NoiseStage2 = 4,
  Calibration = 5,
  UplinkPilots = 6,
  RandomStage2 = 7,
};

template <typename... Salts>
std::uint64_t derive_seed(std::uint64_t base, Salts... salts) {
  std::uint64_t s = splitmix64(base ^ 0xd1b54a32d192ed03ull);
  ((s = splitmix64(s ^ static_cast<std::uint64_t>(salts))), ...);
  return s;
}

template <typename... Salts>
Rng make_rng(std::uint64_t base, Salts... salts) {
  return Rng(derive_seed(base, salts...));
}

// Circularly-symmetric complex normal CN(0, var): real and imaginary parts
// are independent N(0, var/2).
inline cplx cnormal(Rng& rng, double var = 1.0) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5 * var));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline CVec cnormal_vec(Rng& rng, Eigen::Index n, double var = 1.0) {
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cnormal(rng, var);
  return v;
}

inline CMat cnormal_mat(Rng& rng, Eigen::Index r, Eigen::Index c,
                        double var = 1.0) {
  CMat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = cnormal(rng, var);
  return m;
}

}  // namespace isac
