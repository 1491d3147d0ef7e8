#pragma once

#include <array>
#include <cstdint>

#include "cbid/bytes.hpp"

namespace cbid {

struct Hash128 {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
};

// Keyed 128-bit hash over an arbitrary byte sequence (MurmurHash3 x64 finalizer
// family). Stable across platforms: input is consumed as little-endian words.
Hash128 keyed_hash(ByteView data, std::uint64_t seed);

inline std::uint64_t keyed_hash64(ByteView data, std::uint64_t seed) {
  return keyed_hash(data, seed).lo;
}

// SplitMix64 step: the seed-expansion primitive used everywhere a stream of
// independent 64-bit constants is derived from one master seed.
std::uint64_t splitmix64(std::uint64_t& state);

// Convenience: mix a label into a seed to carve out an independent hash domain.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t label);

}  // namespace cbid
