#include "cbid/partition.hpp"

#include <array>

#include "cbid/errors.hpp"
#include "cbid/hash.hpp"

namespace cbid {

namespace {

inline std::uint64_t rotl64(std::uint64_t x, unsigned r) {
  r &= 63;
  if (r == 0) return x;
  return (x << r) | (x >> (64 - r));
}

// 256-entry random table derived from the seed; shared by the rolling and
// direct q-gram hash routes. Cached per thread: digesting hashes millions of
// payloads under one seed.
const std::array<std::uint64_t, 256>& byte_table(std::uint64_t seed) {
  thread_local std::uint64_t cached_seed = 0;
  thread_local bool valid = false;
  thread_local std::array<std::uint64_t, 256> table;
  if (!valid || cached_seed != seed) {
    std::uint64_t s = seed;
    for (auto& v : table) v = splitmix64(s);
    cached_seed = seed;
    valid = true;
  }
  return table;
}

}  // namespace

void PartitionConfig::validate() const {
  if (window_w < 2) throw ConfigError("partition: window_w must be >= 2");
  if (qgram_q < 1 || qgram_q > 32) throw ConfigError("partition: qgram_q must be in [1, 32]");
}

std::vector<std::uint64_t> rolling_hashes(ByteView payload, const PartitionConfig& cfg) {
  cfg.validate();
  const std::size_t q = cfg.qgram_q;
  std::vector<std::uint64_t> out;
  if (payload.size() < q) return out;
  out.reserve(payload.size() - q + 1);

  const auto& table = byte_table(cfg.hash_seed);
  // H(p) = rotl(T[x_p], q-1) ^ rotl(T[x_{p+1}], q-2) ^ ... ^ T[x_{p+q-1}]
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < q; ++i) {
    h ^= rotl64(table[payload[i]], static_cast<unsigned>(q - 1 - i));
  }
  out.push_back(h);
  for (std::size_t p = 1; p + q <= payload.size(); ++p) {
    h = rotl64(h, 1) ^ rotl64(table[payload[p - 1]], static_cast<unsigned>(q)) ^
        table[payload[p + q - 1]];
    out.push_back(h);
  }
  return out;
}

std::vector<std::uint32_t> winnow_boundaries(std::span<const std::uint64_t> hashes,
                                             std::uint32_t window_w) {
  if (window_w < 2) throw ConfigError("winnow: window_w must be >= 2");
  std::vector<std::uint32_t> out;
  const std::size_t n = hashes.size();
  if (n == 0) return out;

  if (n < window_w) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (hashes[i] <= hashes[best]) best = i;  // rightmost minimum
    }
    out.push_back(static_cast<std::uint32_t>(best));
    return out;
  }

  // Monotonic queue of candidate indices with strictly increasing hash values,
  // kept in a power-of-two ring. Popping equal values on push makes the head
  // the rightmost minimum of the current window.
  std::size_t cap = 1;
  while (cap < window_w + 1u) cap <<= 1;
  const std::size_t mask = cap - 1;
  std::vector<std::uint32_t> ring(cap);
  std::size_t head = 0, tail = 0;  // [head, tail)
  out.reserve(2 * n / (window_w + 1) + 8);
  const std::uint64_t* h = hashes.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t hv = h[i];
    while (head != tail && h[ring[(tail - 1) & mask]] >= hv) --tail;
    ring[tail & mask] = static_cast<std::uint32_t>(i);
    ++tail;
    if (ring[head & mask] + window_w <= i) ++head;
    if (i + 1 >= window_w) {
      const std::uint32_t front = ring[head & mask];
      if (out.empty() || out.back() != front) out.push_back(front);
    }
  }
  return out;
}

PartitionResult partition_payload(ByteView payload, const PartitionConfig& cfg) {
  PartitionResult res;
  const auto hashes = rolling_hashes(payload, cfg);
  if (hashes.empty()) {
    res.no_blocks = true;
    return res;
  }
  const auto bounds = winnow_boundaries(hashes, cfg.window_w);
  if (bounds.empty()) {
    res.no_blocks = true;
    return res;
  }

  const std::uint32_t o = cfg.overlap_o;
  const std::uint32_t min_len = cfg.min_block_len();
  const std::uint32_t max_len = cfg.max_block_len();
  const std::uint32_t t = cfg.threshold_t;

  auto emit = [&](std::uint32_t start, std::uint32_t end_incl) {
    const std::uint32_t len = end_incl - start + 1;
    if (len < min_len || len > max_len) return;
    res.blocks.push_back(Block{start, len, len >= t});
  };

  // First block runs from the payload start to the first boundary; no
  // synthetic prefix exists to extend back into.
  emit(0, bounds[0]);
  for (std::size_t i = 1; i < bounds.size(); ++i) {
    const std::uint32_t prev = bounds[i - 1];
    const std::uint32_t start = prev >= o ? prev - o : 0;
    emit(start, bounds[i]);
  }
  // Trailing partial region after the last boundary, same bounds rule.
  const std::uint32_t last = bounds.back();
  if (last + 1 < payload.size()) {
    const std::uint32_t start = last >= o ? last - o : 0;
    emit(start, static_cast<std::uint32_t>(payload.size() - 1));
  }

  res.no_blocks = res.blocks.empty();
  return res;
}

std::pair<std::vector<Block>, bool> downsample(const std::vector<Block>& blocks,
                                               std::uint32_t threshold_t) {
  std::vector<Block> kept;
  kept.reserve(blocks.size());
  for (const Block& b : blocks) {
    if (b.length >= threshold_t) {
      Block k = b;
      k.kept = true;
      kept.push_back(k);
    }
  }
  const bool all_discarded = !blocks.empty() && kept.empty();
  return {std::move(kept), all_discarded};
}

}  // namespace cbid
