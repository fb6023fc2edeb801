#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace stablab::rng {

// Philox4x32-10 counter-based generator (Salmon, Moraes, Dror, Shaw,
// "Parallel random numbers: as easy as 1, 2, 3", SC 2011). A draw is a pure
// function of (key, counter), so ensembles are reproducible for any thread
// count and any evaluation order.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

// SplitMix64 finalizer; derives independent stream keys from a master seed.
std::uint64_t mix64(std::uint64_t seed, std::uint64_t stream);

// Inverse of the standard normal CDF, Wichura's algorithm AS 241 (PPND16).
double inverse_normal_cdf(double p);

// Stateless stream of uniforms/normals addressed by (index, block).
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  // Two U(0,1) variates, strictly inside the open interval.
  std::pair<double, double> uniform2(std::uint64_t index, std::uint32_t block) const;

  // k-th uniform for a sample index; block = slot/2, word pair = slot%2.
  double uniform(std::uint64_t index, std::uint32_t slot) const;

  // Two independent standard normals per (index, block) address.
  std::pair<double, double> normal2(std::uint64_t index, std::uint32_t block) const;

private:
  std::array<std::uint32_t, 2> key_;
};

}  // namespace stablab::rng
