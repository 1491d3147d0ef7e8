#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbid/corpus.hpp"
#include "cbid/digest.hpp"
#include "cbid/query.hpp"
#include "cbid/synth.hpp"

namespace cbid {

enum class EvalMode : std::uint8_t { cbid = 0, baseline = 1 };

struct ExcerptSpec {
  std::uint32_t length = 200;
  std::uint32_t count = 100;
  std::uint64_t seed = 1;
};

// A fully reproducible experiment: corpus source, digest parameters, excerpt
// draw and mode. Serializes to/from JSON.
struct EvalRun {
  std::optional<SynthConfig> synth;
  std::string corpus_file;  // used when synth is absent
  DigestConfig digest;
  ExcerptSpec excerpts;
  EvalMode mode = EvalMode::cbid;

  std::string to_json() const;
  static EvalRun from_json(const std::string& text);
};

// The baseline keeps the partitioner and hash family but drops sections,
// downsampling and the index table, and answers flow determination by
// exhaustive queries. Filter size is derived from `dr` so comparisons run at
// matched overall data reduction.
DigestConfig baseline_config(const DigestConfig& like, double dr,
                             std::uint64_t raw_budget);

double dr_overall(double raw_bytes, double filter_bytes, double compressed_table_bytes);
std::string format_dr(double ratio);  // "93.9:1"

// Archive-level accounting over all segments.
struct ArchiveTotals {
  std::uint64_t raw_bytes = 0;
  std::uint64_t filter_bytes = 0;
  std::uint64_t table_bytes = 0;
  double dr0 = 0.0;
};
ArchiveTotals archive_totals(std::span<const ArchiveSegment> segments);

struct FpOutcome {
  double fp_rate = 0.0;               // falsely reported flows / distinct flows, averaged
  std::uint64_t distinct_flows = 0;
  std::uint64_t excerpts = 0;
  std::uint64_t assumed_positive_excerpts = 0;
  std::vector<double> per_excerpt;    // per-excerpt false fraction, for bootstrap CIs
  std::uint64_t candidates_total = 0;
  std::uint64_t type2_queries_total = 0;
  std::uint64_t blocks_total = 0;
  std::uint64_t blocks_kept = 0;
  double dr0 = 0.0;
};

// Digest the corpus and measure the attribution false-positive rate over the
// given excerpts. Every excerpt's true carrier must be reported, otherwise the
// run aborts with InvariantViolation.
FpOutcome eval_fp_rate(const Corpus& corpus, std::span<const LabeledExcerpt> excerpts,
                       const DigestConfig& cfg, EvalMode mode,
                       const EngineOptions& engine = {});

struct SweepRow {
  std::uint32_t threshold = 0;
  double fp_rate = 0.0;
  double block_reduction_d = 0.0;  // blocks_total / blocks_kept
};

// Downsampling threshold sweep at a fixed data reduction ratio: conventional
// single-section filter, no index table, exhaustive flow determination, one
// digest per threshold over identical corpus and excerpts.
std::vector<SweepRow> threshold_sweep(const Corpus& corpus,
                                      std::span<const LabeledExcerpt> excerpts,
                                      const DigestConfig& base,
                                      const std::vector<std::uint32_t>& thresholds,
                                      const EngineOptions& engine = {});

struct TableReportRow {
  std::uint32_t sections_j = 0;
  double ones_percent = 0.0;
  std::vector<std::uint32_t> symbol_sizes;
  std::vector<double> entropy_bits;
  std::vector<double> best_ratio;
  std::uint64_t raw_table_bytes = 0;
  std::uint64_t compressed_table_bytes = 0;
  double dr0 = 0.0;
};

// Digests the corpus once per section count and reports index-table
// statistics (ones %, entropy at several symbol sizes, compressed size, DR0).
std::vector<TableReportRow> table_report(const Corpus& corpus, const DigestConfig& base,
                                         const std::vector<std::uint32_t>& section_counts,
                                         const std::vector<std::uint32_t>& symbol_sizes,
                                         const EngineOptions& engine = {});

struct HistogramReport {
  std::array<std::uint64_t, 70> block_length_counts{};  // index = length, 6..69 used
  std::vector<std::pair<std::uint64_t, double>> flow_size_cdf;  // (size, fraction <= size)
  // true-negative probe results per block length: queried / negative
  std::array<std::uint64_t, 70> tn_queried{};
  std::array<std::uint64_t, 70> tn_negative{};
};

HistogramReport histogram_report(const Corpus& corpus, const DigestConfig& cfg,
                                 std::uint32_t probe_excerpts, std::uint64_t probe_seed,
                                 const EngineOptions& engine = {});

struct BenchResult {
  double serial_mb_per_s = 0.0;
  double parallel_mb_per_s = 0.0;
  double mean_query_ms = 0.0;
  std::uint64_t bytes_digested = 0;
};

// Rough throughput numbers; asserts nothing about absolutes.
BenchResult bench(const Corpus& corpus, const DigestConfig& cfg,
                  std::uint32_t query_count = 32);

// Percentile bootstrap confidence interval for the mean of `values`.
std::pair<double, double> bootstrap_ci(std::span<const double> values, double confidence,
                                       std::uint64_t seed, std::uint32_t resamples = 2000);

std::string eval_mode_name(EvalMode mode);

}  // namespace cbid
