#pragma once

#include <cstdint>
#include <vector>

#include "cbid/flow.hpp"

namespace cbid {

// Discrete bounded Pareto over [scale, max]; scale == max degenerates to a
// fixed size. Calibrated so well over 60% of flows stay under 2000 payload
// bytes while a thin tail of large flows carries most of the bytes.
struct SizeDistribution {
  double shape = 1.1;
  double scale = 400.0;
  double max = 2'000'000.0;
};

enum class PayloadEntropy : std::uint8_t {
  random = 0,            // uniform random payload bytes
  mixed_zero_runs = 1,   // 10% of flows carry one zero run (low-entropy content)
};

struct SynthConfig {
  std::uint64_t flow_count = 1000;
  SizeDistribution size;
  PayloadEntropy entropy = PayloadEntropy::mixed_zero_runs;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError on degenerate parameters
};

struct Corpus {
  std::vector<PacketRecord> packets;
  std::uint64_t total_payload_bytes = 0;
  std::uint64_t distinct_flows = 0;
};

// Pure function of the config: identical SynthConfig (seed included) yields a
// byte-identical corpus on every platform. Packets of different flows are
// interleaved; timestamps strictly increase.
Corpus synth_generate(const SynthConfig& cfg);

// Fraction of flows whose total payload is below `below_bytes`.
double flow_fraction_below(const Corpus& corpus, std::uint64_t below_bytes);

}  // namespace cbid
