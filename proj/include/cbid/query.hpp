#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cbid/bytes.hpp"
#include "cbid/digest.hpp"

namespace cbid {

struct ExcerptQuery {
  Bytes bytes;
  std::optional<std::uint64_t> from_ts;  // restrict to segments overlapping the range
  std::optional<std::uint64_t> to_ts;
};

// Excerpts shorter than this are likely to produce zero kept interior blocks
// and degrade to assumed-positive answers.
std::uint32_t min_reliable_excerpt_len(const PartitionConfig& cfg);

// Partition the excerpt with the segment's own config and drop edge blocks
// whose boundaries lack context: anything starting within window_w + qgram_q
// bytes of the excerpt start or ending within the same margin of the excerpt
// end. Surviving blocks are guaranteed to be blocks of any digested payload
// containing the excerpt, which is what keeps queries free of false negatives.
std::vector<Block> excerpt_blocks(ByteView excerpt, const PartitionConfig& cfg);

struct SegmentAppearance {
  bool matched = false;
  bool assumed_positive = false;        // no kept query block existed
  std::vector<std::uint32_t> sections;  // sections of positive kept blocks, dedup+sorted
  std::uint32_t blocks_queried = 0;
};

SegmentAppearance appearance_check(ByteView excerpt, const ArchiveSegment& seg);

struct FlowHit {
  FlowKey flow;
  std::uint32_t blocks_confirmed = 0;
};

struct FlowDetermination {
  std::vector<FlowHit> flows;
  std::uint64_t candidates_examined = 0;
  std::uint64_t type2_queries = 0;
};

struct QueryOptions {
  bool use_index = true;  // false: skip candidate pruning (exhaustive flow queries)
};

FlowDetermination flow_determination(ByteView excerpt, const ArchiveSegment& seg,
                                     const std::vector<std::uint32_t>& sections,
                                     const QueryOptions& opts = {});

struct SegmentReport {
  std::size_t segment_index = 0;
  std::uint64_t interval_start_us = 0;
  std::uint64_t interval_end_us = 0;
  bool matched = false;
  bool assumed_positive = false;
  std::uint32_t blocks_queried = 0;
  std::vector<FlowHit> flows;
  std::uint64_t candidates_examined = 0;
  std::uint64_t type2_queries = 0;
};

struct AttributionReport {
  std::vector<SegmentReport> segments;  // one entry per matched segment
  std::uint64_t segments_checked = 0;
  std::uint64_t candidates_total = 0;
  std::uint64_t type2_queries_total = 0;

  bool contains_flow(const FlowKey& flow) const;
};

AttributionReport investigate(const ExcerptQuery& q,
                              std::span<const ArchiveSegment> archive,
                              const QueryOptions& opts = {});

}  // namespace cbid
