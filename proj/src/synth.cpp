#include "cbid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "cbid/errors.hpp"
#include "cbid/hash.hpp"
#include "cbid/prng.hpp"

namespace cbid {

namespace {

constexpr std::uint32_t kPacketChunk = 1400;
constexpr double kZeroFlowFraction = 0.10;
constexpr std::uint64_t kMaxZeroRun = 96;
constexpr double kTcpFraction = 0.81;

struct FlowPlan {
  FlowKey key;
  std::uint64_t size = 0;
  std::uint64_t zero_run_len = 0;
  std::uint64_t zero_run_at = 0;  // offset within the flow byte stream
  std::uint64_t payload_seed = 0;
};

std::uint64_t sample_size(Prng& rng, const SizeDistribution& d) {
  const auto lo = static_cast<std::uint64_t>(d.scale);
  const auto hi = static_cast<std::uint64_t>(d.max);
  if (lo >= hi) return lo;
  // Inverse CDF of the bounded Pareto.
  const double u = rng.next_double();
  const double ratio_pow = std::pow(d.scale / d.max, d.shape);
  const double x = d.scale / std::pow(1.0 - u * (1.0 - ratio_pow), 1.0 / d.shape);
  const auto s = static_cast<std::uint64_t>(x);
  return std::clamp<std::uint64_t>(s, lo, hi);
}

FlowKey sample_flow_key(Prng& rng) {
  FlowKey k;
  k.version = 4;
  const std::uint64_t a = rng.next_u64();
  const std::uint64_t b = rng.next_u64();
  for (int i = 0; i < 4; ++i) {
    k.src_addr[i] = static_cast<std::uint8_t>(a >> (8 * i));
    k.dst_addr[i] = static_cast<std::uint8_t>(a >> (32 + 8 * i));
  }
  k.src_port = static_cast<std::uint16_t>(b);
  k.dst_port = static_cast<std::uint16_t>(b >> 16);
  k.protocol = rng.next_double() < kTcpFraction ? IpProto::tcp : IpProto::udp;
  return k;
}

}  // namespace

void SynthConfig::validate() const {
  if (flow_count == 0) throw ConfigError("synth: flow_count must be > 0");
  if (!(size.shape > 0.0)) throw ConfigError("synth: shape must be > 0");
  if (!(size.scale > 0.0)) throw ConfigError("synth: scale must be > 0");
  if (size.max < size.scale) throw ConfigError("synth: max must be >= scale");
}

Corpus synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Prng rng(derive_seed(cfg.seed, 0xc0a5e7));

  // Plan all flows first; packet emission interleaves them afterwards.
  std::vector<FlowPlan> plans(cfg.flow_count);
  std::unordered_set<std::uint64_t> seen_keys;
  for (std::uint64_t i = 0; i < cfg.flow_count; ++i) {
    FlowPlan& p = plans[i];
    do {
      p.key = sample_flow_key(rng);
    } while (!seen_keys.insert(keyed_hash64(p.key.serialize(), 0)).second);
    p.size = sample_size(rng, cfg.size);
    p.payload_seed = derive_seed(cfg.seed, 0xf10a000000ULL + i);

    if (cfg.entropy == PayloadEntropy::mixed_zero_runs && rng.next_double() < kZeroFlowFraction) {
      const std::uint64_t run = std::min<std::uint64_t>(kMaxZeroRun, p.size / 2);
      if (run >= 12) {
        p.zero_run_len = run;
        // Keep the run inside one packet chunk so partitioning sees it whole.
        const std::uint64_t n_packets = (p.size + kPacketChunk - 1) / kPacketChunk;
        const std::uint64_t pkt = rng.next_below(n_packets);
        const std::uint64_t pkt_len =
            std::min<std::uint64_t>(kPacketChunk, p.size - pkt * kPacketChunk);
        if (pkt_len >= run) {
          p.zero_run_at = pkt * kPacketChunk + rng.next_below(pkt_len - run + 1);
        } else {
          p.zero_run_len = 0;
        }
      }
    }
  }

  // Interleave: repeatedly pick a random flow with bytes remaining and emit
  // its next chunk.
  Corpus corpus;
  corpus.distinct_flows = cfg.flow_count;
  std::vector<std::uint64_t> emitted(cfg.flow_count, 0);
  std::vector<std::uint32_t> active(cfg.flow_count);
  for (std::uint32_t i = 0; i < cfg.flow_count; ++i) active[i] = i;

  std::uint64_t ts = 1;
  while (!active.empty()) {
    const std::size_t slot = rng.next_below(active.size());
    const std::uint32_t fi = active[slot];
    FlowPlan& plan = plans[fi];

    const std::uint64_t off = emitted[fi];
    const auto len = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(kPacketChunk, plan.size - off));

    PacketRecord pkt;
    pkt.flow = plan.key;
    pkt.timestamp_us = ts;
    pkt.payload.resize(len);
    // Per-flow byte stream is position-addressed so chunking cannot change it.
    Prng chunk_rng(derive_seed(plan.payload_seed, off));
    chunk_rng.fill(pkt.payload.data(), len);
    if (plan.zero_run_len > 0) {
      const std::uint64_t run_begin = plan.zero_run_at;
      const std::uint64_t run_end = run_begin + plan.zero_run_len;
      if (run_begin < off + len && run_end > off) {
        const std::uint64_t a = std::max(run_begin, off) - off;
        const std::uint64_t b = std::min<std::uint64_t>(run_end, off + len) - off;
        std::fill(pkt.payload.begin() + static_cast<std::ptrdiff_t>(a),
                  pkt.payload.begin() + static_cast<std::ptrdiff_t>(b), 0);
      }
    }

    corpus.total_payload_bytes += len;
    corpus.packets.push_back(std::move(pkt));
    ts += 1 + rng.next_below(40);

    emitted[fi] += len;
    if (emitted[fi] >= plan.size) {
      active[slot] = active.back();
      active.pop_back();
    }
  }
  return corpus;
}

double flow_fraction_below(const Corpus& corpus, std::uint64_t below_bytes) {
  std::unordered_map<FlowKey, std::uint64_t, FlowKeyHash> totals;
  for (const PacketRecord& p : corpus.packets) {
    totals[p.flow] += p.payload.size();
  }
  if (totals.empty()) return 0.0;
  std::size_t small = 0;
  for (const auto& [flow, total] : totals) {
    if (total < below_bytes) ++small;
  }
  return static_cast<double>(small) / static_cast<double>(totals.size());
}

}  // namespace cbid
