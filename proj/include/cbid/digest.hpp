#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cbid/bloom.hpp"
#include "cbid/bytes.hpp"
#include "cbid/flow.hpp"
#include "cbid/flow_index.hpp"
#include "cbid/partition.hpp"

namespace cbid {

// Domain tags keeping appearance-check and flow-determination elements in
// disjoint hash domains within one filter.
inline constexpr std::uint8_t kTypeOneTag = 0x01;
inline constexpr std::uint8_t kTypeTwoTag = 0x02;

Bytes make_type1(ByteView block);
// pre: the block passed downsampling. Layout: tag | block bytes | flow key.
Bytes make_type2(ByteView block, const FlowKey& flow);

struct DigestConfig {
  PartitionConfig partition;
  std::uint32_t sections_j = 2048;
  std::uint32_t hashes_k = 4;
  double target_dr = 100.0;        // raw bytes per digest byte
  double rotation_fp = 0.01;       // rotate when per-section expected FP reaches this
  std::uint64_t interval_raw_budget = 256ull << 20;
  bool index_enabled = true;       // false: conventional-filter mode, no index table
  bool downsample_type2 = true;    // false: type-II elements for discarded blocks too

  std::uint64_t filter_total_bits() const {
    return static_cast<std::uint64_t>(8.0 * static_cast<double>(interval_raw_budget) /
                                      target_dr);
  }
  std::uint64_t section_seed() const;
  std::uint64_t bit_seed() const;
  void validate() const;

  bool operator==(const DigestConfig&) const = default;
};

struct SegmentCounters {
  std::uint64_t raw_bytes = 0;
  std::uint64_t packets = 0;
  std::uint64_t blocks_total = 0;
  std::uint64_t blocks_kept = 0;

  bool operator==(const SegmentCounters&) const = default;
};

// One finalized time interval: filter + flow list + compressed index table +
// the config snapshot needed to replay partitioning at query time.
class ArchiveSegment {
 public:
  std::uint64_t interval_start_us = 0;
  std::uint64_t interval_end_us = 0;
  DigestConfig cfg;
  MultiSectionBloomFilter msbf;
  FlowList flows;
  CompressedTable table;
  SegmentCounters counters;

  ArchiveSegment();
  ~ArchiveSegment();
  ArchiveSegment(ArchiveSegment&&) noexcept;
  ArchiveSegment& operator=(ArchiveSegment&&) noexcept;

  // Decompresses on first use and caches; counts actual decompression events.
  const BitmapIndexTable& index_table() const;
  std::uint64_t table_decompressions() const;
  // Installs an already materialized table (used at finalization; no event).
  void prime_table_cache(BitmapIndexTable table);

  std::uint64_t digest_bytes() const { return msbf.byte_size() + table.payload.size(); }
  double achieved_dr() const;

  bool equal_contents(const ArchiveSegment& other) const;

 private:
  struct LazyTable;
  mutable std::unique_ptr<LazyTable> lazy_;
};

struct SegmentMetrics {
  std::uint64_t packets = 0;
  std::uint64_t raw_bytes = 0;
  std::uint64_t blocks_total = 0;
  std::uint64_t blocks_kept = 0;
  double block_reduction_d = 0.0;  // blocks_total / blocks_kept
  std::uint64_t digest_bytes = 0;
  double achieved_dr = 0.0;
};

enum class ExecMode { serial, parallel };

struct EngineOptions {
  ExecMode mode = ExecMode::parallel;
  std::uint32_t batch_packets = 256;
  std::function<void(const SegmentMetrics&)> on_segment;  // optional metrics sink
};

// Open segment being digested. Single writer; queries never see it.
class DigestState {
 public:
  explicit DigestState(const DigestConfig& cfg);

  void add_packet(const PacketRecord& pkt);  // serial reference path
  bool rotation_due() const;
  ArchiveSegment finalize();                 // compresses the table; resets nothing
  bool empty() const { return counters_.packets == 0; }
  const SegmentCounters& counters() const { return counters_; }
  const MultiSectionBloomFilter& filter() const { return msbf_; }
  const BitmapIndexTable& table() const { return table_; }
  const FlowList& flow_list() const { return flows_; }

  // Batch path: hashing and partitioning precomputed out of order, application
  // strictly in packet order so rotation points match the serial path.
  struct PreparedInsert {
    std::uint32_t section;
    std::uint64_t h1, h2;
  };
  struct PreparedPacket {
    FlowKey flow;
    std::uint64_t timestamp_us = 0;
    std::uint32_t payload_len = 0;
    std::uint32_t blocks_total = 0;
    std::vector<PreparedInsert> type1;
    std::vector<PreparedInsert> type2;
  };
  static PreparedPacket prepare_packet(const PacketRecord& pkt, const DigestConfig& cfg);
  void apply_prepared(const PreparedPacket& prep);

 private:
  void note_timestamp(std::uint64_t ts);
  DigestConfig cfg_;
  MultiSectionBloomFilter msbf_;
  FlowList flows_;
  BitmapIndexTable table_;
  SegmentCounters counters_;
  std::uint64_t start_ts_ = 0;
  std::uint64_t end_ts_ = 0;
  bool have_ts_ = false;
};

// digest_packet / maybe_rotate expressed over DigestState.
void digest_packet(DigestState& state, const PacketRecord& pkt);
std::optional<ArchiveSegment> maybe_rotate(DigestState& state, const DigestConfig& cfg);

// Digest an ordered packet stream into finalized segments. Deterministic in
// (packets, cfg); the execution mode never changes the output bytes.
std::vector<ArchiveSegment> digest_stream(std::span<const PacketRecord> packets,
                                          const DigestConfig& cfg,
                                          const EngineOptions& opts = {});

}  // namespace cbid
