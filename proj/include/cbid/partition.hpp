#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cbid/bytes.hpp"

namespace cbid {

// Content-defined partitioning parameters. Block boundaries come from
// winnowing a rolling q-gram hash of the payload; blocks overlap their
// predecessor by extending overlap_o bytes back past its end boundary.
// With the defaults every emitted block has length in [6, 69].
struct PartitionConfig {
  std::uint32_t window_w = 64;
  std::uint32_t overlap_o = 4;
  std::uint32_t qgram_q = 4;
  std::uint32_t threshold_t = 40;  // downsampling threshold T, bytes
  std::uint64_t hash_seed = 0x9d1c3a75b2e04f68ULL;

  std::uint32_t min_block_len() const { return overlap_o + 2; }
  std::uint32_t max_block_len() const { return window_w + overlap_o + 1; }
  void validate() const;  // throws ConfigError

  bool operator==(const PartitionConfig&) const = default;
};

// One payload chunk. Bytes are addressed as payload[start_offset, start_offset+length).
struct Block {
  std::uint32_t start_offset = 0;
  std::uint32_t length = 0;
  bool kept = false;  // length >= T

  std::uint32_t end_offset() const { return start_offset + length; }
};

inline ByteView block_bytes(ByteView payload, const Block& b) {
  return payload.subspan(b.start_offset, b.length);
}

// One 64-bit hash per q-gram position; output size max(0, len - q + 1).
// Position i depends only on payload[i, i+q) and the seed (cyclic-polynomial
// rolling hash over a seeded byte table).
std::vector<std::uint64_t> rolling_hashes(ByteView payload, const PartitionConfig& cfg);

// Rightmost minimum of every window of `window_w` consecutive hash positions,
// duplicates merged; strictly increasing. Fewer than window_w hashes: the
// rightmost global minimum alone.
std::vector<std::uint32_t> winnow_boundaries(std::span<const std::uint64_t> hashes,
                                             std::uint32_t window_w);

struct PartitionResult {
  std::vector<Block> blocks;
  bool no_blocks = false;  // payload produced no emittable block
};

PartitionResult partition_payload(ByteView payload, const PartitionConfig& cfg);

// Pure filter: blocks with length >= T, order preserved. Second member is
// true iff the input was non-empty and nothing survived.
std::pair<std::vector<Block>, bool> downsample(const std::vector<Block>& blocks,
                                               std::uint32_t threshold_t);

}  // namespace cbid
