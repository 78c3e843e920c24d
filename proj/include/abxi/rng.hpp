#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace abxi {

using Rng = std::mt19937_64;

// Deterministic seed derivation so that every (seed, user, epoch, ...) tuple
// gets its own independent stream regardless of batch composition.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) {
  return Rng(derive_seed(parts));
}

}  // namespace abxi
