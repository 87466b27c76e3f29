#pragma once

#include <cstdint>
#include <random>

namespace mixreg {

/// The one RNG engine used across the library; callers own its state.
using Rng = std::mt19937_64;

/// Seed for worker `index` of a computation seeded with `seed`.
inline std::uint64_t worker_seed(std::uint64_t seed, unsigned index) { return seed + index; }

}  // namespace mixreg
