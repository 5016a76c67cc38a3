#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mcdet {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a path of indices
/// (image, pass, round, ...) with a splitmix64 chain, so that nested randomized
/// work stays reproducible regardless of evaluation order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept;

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path = {}) {
  return Rng{derive_seed(base, path)};
}

}  // namespace mcdet
