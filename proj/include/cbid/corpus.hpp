#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbid/synth.hpp"

namespace cbid {

// Length-prefixed corpus dump: magic `CBTR`, a version byte, then repeated
// `flowkey | u32 payload_len | payload` records, little-endian. Timestamps are
// not stored; the reader assigns fresh monotone ones.
void write_corpus(const Corpus& corpus, const std::string& path);
Corpus read_corpus(const std::string& path);
bool looks_like_corpus(const std::string& path);

struct LabeledExcerpt {
  Bytes bytes;
  FlowKey carrier;
};

struct ExcerptExtraction {
  std::vector<LabeledExcerpt> excerpts;
  std::uint32_t shortfall = 0;  // requested minus found
};

// Draws `count` contiguous single-packet substrings of the given length that
// occur exactly once across the whole corpus (verified by exhaustive substring
// scan), each paired with its carrier flow. Deterministic under `seed`.
ExcerptExtraction extract_unique_excerpts(const Corpus& corpus, std::uint32_t length,
                                          std::uint32_t count, std::uint64_t seed);

// Number of occurrences of `needle` across all payloads (overlaps included),
// stopping at `limit`. This is the scan extract_unique_excerpts relies on.
std::uint64_t count_occurrences(const Corpus& corpus, ByteView needle,
                                std::uint64_t limit = 2);

}  // namespace cbid
