#pragma once

#include <cstdint>
#include <random>

namespace incapprox {

// std::mt19937_64 is fully specified by the standard; the distributions below
// are hand-written so that seeded traces are identical across standard libraries.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent child seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for a child stream `index` of `parent`.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

/// Uniform integer in [0, bound). bound must be > 0. Lemire's multiply-shift with rejection.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Standard normal via Box-Muller (one draw per call, second value discarded).
double standard_normal(Rng& rng);

/// Poisson(lambda) count. Exact: Knuth's product method on chunks of lambda <= 16.
std::uint64_t poisson(Rng& rng, double lambda);

}  // namespace incapprox
