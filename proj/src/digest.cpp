#include "cbid/digest.hpp"

#include <atomic>
#include <mutex>

#include "cbid/errors.hpp"
#include "cbid/hash.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cbid {

namespace {
constexpr std::uint64_t kSectionSeedLabel = 0x5ec710aULL;
constexpr std::uint64_t kBitSeedLabel = 0xb1753e7ULL;
}  // namespace

Bytes make_type1(ByteView block) {
  Bytes out;
  out.reserve(1 + block.size());
  out.push_back(kTypeOneTag);
  out.insert(out.end(), block.begin(), block.end());
  return out;
}

Bytes make_type2(ByteView block, const FlowKey& flow) {
  const Bytes key = flow.serialize();
  Bytes out;
  out.reserve(1 + block.size() + key.size());
  out.push_back(kTypeTwoTag);
  out.insert(out.end(), block.begin(), block.end());
  out.insert(out.end(), key.begin(), key.end());
  return out;
}

std::uint64_t DigestConfig::section_seed() const {
  return derive_seed(partition.hash_seed, kSectionSeedLabel);
}

std::uint64_t DigestConfig::bit_seed() const {
  return derive_seed(partition.hash_seed, kBitSeedLabel);
}

void DigestConfig::validate() const {
  partition.validate();
  if (sections_j < 1) throw ConfigError("digest: sections_j must be >= 1");
  if (hashes_k < 1) throw ConfigError("digest: hashes_k must be >= 1");
  if (!(target_dr > 1.0)) throw ConfigError("digest: target_dr must be > 1");
  if (!(rotation_fp > 0.0 && rotation_fp < 1.0)) {
    throw ConfigError("digest: rotation_fp must be in (0, 1)");
  }
  if (filter_total_bits() < std::uint64_t(sections_j) * 64) {
    throw ConfigError("digest: derived filter size below sections_j * 64 bits; "
                      "raise interval_raw_budget or lower target_dr/sections_j");
  }
}

struct ArchiveSegment::LazyTable {
  std::once_flag once;
  std::optional<BitmapIndexTable> cache;
  std::atomic<std::uint64_t> events{0};
};

ArchiveSegment::ArchiveSegment() : lazy_(std::make_unique<LazyTable>()) {}
ArchiveSegment::~ArchiveSegment() = default;
ArchiveSegment::ArchiveSegment(ArchiveSegment&&) noexcept = default;
ArchiveSegment& ArchiveSegment::operator=(ArchiveSegment&&) noexcept = default;

const BitmapIndexTable& ArchiveSegment::index_table() const {
  std::call_once(lazy_->once, [this] {
    if (!lazy_->cache.has_value()) {
      lazy_->cache = decompress_table(table);
      lazy_->events.fetch_add(1, std::memory_order_relaxed);
    }
  });
  return *lazy_->cache;
}

std::uint64_t ArchiveSegment::table_decompressions() const {
  return lazy_->events.load(std::memory_order_relaxed);
}

void ArchiveSegment::prime_table_cache(BitmapIndexTable t) {
  std::call_once(lazy_->once, [&] { lazy_->cache = std::move(t); });
}

double ArchiveSegment::achieved_dr() const {
  const std::uint64_t d = digest_bytes();
  return d == 0 ? 0.0 : static_cast<double>(counters.raw_bytes) / static_cast<double>(d);
}

bool ArchiveSegment::equal_contents(const ArchiveSegment& other) const {
  return interval_start_us == other.interval_start_us &&
         interval_end_us == other.interval_end_us && cfg == other.cfg &&
         msbf == other.msbf && flows == other.flows && table == other.table &&
         counters == other.counters;
}

DigestState::DigestState(const DigestConfig& cfg)
    : cfg_(cfg),
      msbf_(cfg.filter_total_bits(), cfg.sections_j, cfg.hashes_k, cfg.section_seed(),
            cfg.bit_seed()),
      table_(cfg.sections_j) {
  cfg.validate();
}

void DigestState::note_timestamp(std::uint64_t ts) {
  if (!have_ts_) {
    start_ts_ = ts;
    have_ts_ = true;
  }
  end_ts_ = ts;
}

DigestState::PreparedPacket DigestState::prepare_packet(const PacketRecord& pkt,
                                                        const DigestConfig& cfg) {
  PreparedPacket prep;
  prep.flow = pkt.flow;
  prep.timestamp_us = pkt.timestamp_us;
  prep.payload_len = static_cast<std::uint32_t>(pkt.payload.size());

  const ByteView payload(pkt.payload);
  const PartitionResult part = partition_payload(payload, cfg.partition);
  prep.blocks_total = static_cast<std::uint32_t>(part.blocks.size());
  if (part.blocks.empty()) return prep;

  const std::uint64_t sseed = cfg.section_seed();
  const std::uint64_t bseed = cfg.bit_seed();
  const std::uint32_t j = cfg.sections_j;
  auto probe_of = [&](ByteView elem) {
    PreparedInsert p;
    p.section = static_cast<std::uint32_t>(keyed_hash64(elem, sseed) % j);
    const Hash128 bh = keyed_hash(elem, bseed);
    p.h1 = bh.lo;
    p.h2 = bh.hi;
    return p;
  };

  // Scratch element buffers, reused across blocks of the packet. Type-II
  // layout is tag | block | flow key with the key at a per-block offset.
  const std::uint32_t max_len = cfg.partition.max_block_len();
  const Bytes key = pkt.flow.serialize();
  Bytes scratch1(1 + max_len);
  Bytes scratch2(1 + max_len + key.size());
  scratch1[0] = kTypeOneTag;
  scratch2[0] = kTypeTwoTag;

  for (const Block& b : part.blocks) {
    if (!b.kept) continue;
    std::copy_n(payload.data() + b.start_offset, b.length, scratch1.data() + 1);
    prep.type1.push_back(probe_of(ByteView(scratch1.data(), 1 + b.length)));
  }
  for (const Block& b : part.blocks) {
    if (cfg.downsample_type2 && !b.kept) continue;
    std::copy_n(payload.data() + b.start_offset, b.length, scratch2.data() + 1);
    std::copy_n(key.data(), key.size(), scratch2.data() + 1 + b.length);
    prep.type2.push_back(probe_of(ByteView(scratch2.data(), 1 + b.length + key.size())));
  }
  return prep;
}

void DigestState::apply_prepared(const PreparedPacket& prep) {
  note_timestamp(prep.timestamp_us);
  const std::uint32_t row = flows_.register_flow(prep.flow);
  while (table_.rows() <= row) table_.add_row();

  for (const PreparedInsert& p : prep.type1) {
    msbf_.insert_prepared({p.section, p.h1, p.h2});
    if (cfg_.index_enabled) table_.set(row, p.section);
  }
  for (const PreparedInsert& p : prep.type2) {
    msbf_.insert_prepared({p.section, p.h1, p.h2});
  }

  counters_.raw_bytes += prep.payload_len;
  counters_.packets += 1;
  counters_.blocks_total += prep.blocks_total;
  counters_.blocks_kept += prep.type1.size();
}

void DigestState::add_packet(const PacketRecord& pkt) {
  apply_prepared(prepare_packet(pkt, cfg_));
}

bool DigestState::rotation_due() const {
  if (counters_.packets == 0) return false;
  if (counters_.raw_bytes >= cfg_.interval_raw_budget) return true;
  const double fp = expected_fp(static_cast<double>(msbf_.section_bits()),
                                static_cast<double>(msbf_.max_section_n()),
                                static_cast<double>(cfg_.hashes_k));
  return fp >= cfg_.rotation_fp;
}

ArchiveSegment DigestState::finalize() {
  ArchiveSegment seg;
  seg.interval_start_us = start_ts_;
  seg.interval_end_us = end_ts_;
  seg.cfg = cfg_;
  seg.msbf = std::move(msbf_);
  seg.flows = std::move(flows_);
  seg.counters = counters_;
  if (cfg_.index_enabled) {
    seg.table = compress_table(table_, TableCodec::lzma);
    seg.prime_table_cache(std::move(table_));
  } else {
    seg.table = CompressedTable{TableCodec::none, 0, cfg_.sections_j, {}};
  }
  return seg;
}

void digest_packet(DigestState& state, const PacketRecord& pkt) {
  state.add_packet(pkt);
}

std::optional<ArchiveSegment> maybe_rotate(DigestState& state, const DigestConfig& cfg) {
  if (!state.rotation_due()) return std::nullopt;
  ArchiveSegment seg = state.finalize();
  state = DigestState(cfg);
  return seg;
}

std::vector<ArchiveSegment> digest_stream(std::span<const PacketRecord> packets,
                                          const DigestConfig& cfg,
                                          const EngineOptions& opts) {
  cfg.validate();
  std::vector<ArchiveSegment> out;
  DigestState state(cfg);

  auto emit_metrics = [&](const ArchiveSegment& seg) {
    if (!opts.on_segment) return;
    SegmentMetrics m;
    m.packets = seg.counters.packets;
    m.raw_bytes = seg.counters.raw_bytes;
    m.blocks_total = seg.counters.blocks_total;
    m.blocks_kept = seg.counters.blocks_kept;
    m.block_reduction_d = seg.counters.blocks_kept
                              ? static_cast<double>(seg.counters.blocks_total) /
                                    static_cast<double>(seg.counters.blocks_kept)
                              : 0.0;
    m.digest_bytes = seg.digest_bytes();
    m.achieved_dr = seg.achieved_dr();
    opts.on_segment(m);
  };

  std::uint64_t prev_ts = 0;
  bool have_prev = false;
  auto check_order = [&](std::uint64_t ts) {
    if (have_prev && ts < prev_ts) {
      throw InvariantViolation("digest_stream: decreasing timestamp in input stream");
    }
    prev_ts = ts;
    have_prev = true;
  };

  if (opts.mode == ExecMode::serial) {
    for (const PacketRecord& pkt : packets) {
      check_order(pkt.timestamp_us);
      digest_packet(state, pkt);
      if (auto seg = maybe_rotate(state, cfg)) {
        emit_metrics(*seg);
        out.push_back(std::move(*seg));
      }
    }
  } else {
    const std::size_t batch = std::max<std::uint32_t>(1, opts.batch_packets);
    std::vector<DigestState::PreparedPacket> prepared;
    for (std::size_t base = 0; base < packets.size(); base += batch) {
      const std::size_t n = std::min(batch, packets.size() - base);
      prepared.assign(n, {});
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8)
#endif
      for (std::size_t i = 0; i < n; ++i) {
        prepared[i] = DigestState::prepare_packet(packets[base + i], cfg);
      }
      for (std::size_t i = 0; i < n; ++i) {
        check_order(prepared[i].timestamp_us);
        state.apply_prepared(prepared[i]);
        if (auto seg = maybe_rotate(state, cfg)) {
          emit_metrics(*seg);
          out.push_back(std::move(*seg));
        }
      }
    }
  }

  if (!state.empty()) {
    ArchiveSegment seg = state.finalize();
    emit_metrics(seg);
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace cbid
