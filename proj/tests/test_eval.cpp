#include <doctest.h>

#include <cmath>

#include "cbid/errors.hpp"
#include "cbid/eval.hpp"
#include "test_util.hpp"

using namespace cbid;

TEST_CASE("dr_overall: worked ratios") {
  // 100 GB raw, 1 GB filter, 65 MB compressed tables
  const double r = dr_overall(100e9, 1e9, 65e6);
  CHECK(format_dr(r) == "93.9:1");
  CHECK(std::lround(r) == 94);
  CHECK(dr_overall(100e9, 1e9, 0) == doctest::Approx(100.0));
  CHECK_THROWS_AS(dr_overall(100e9, 0, 0), ConfigError);

  // the published table's four columns round to 96, 94, 91, 87
  const double tables_mb[] = {44, 65, 98, 154};
  const long want[] = {96, 94, 91, 87};
  for (int i = 0; i < 4; ++i) {
    CHECK(std::lround(dr_overall(100e9, 1e9, tables_mb[i] * 1e6)) == want[i]);
  }
}

TEST_CASE("eval run: JSON spec round-trips") {
  EvalRun run;
  run.synth = SynthConfig{};
  run.synth->flow_count = 1234;
  run.synth->seed = 99;
  run.digest.sections_j = 512;
  run.digest.target_dr = 50.0;
  run.excerpts = {300, 42, 7};
  run.mode = EvalMode::baseline;

  const EvalRun back = EvalRun::from_json(run.to_json());
  REQUIRE(back.synth.has_value());
  CHECK(back.synth->flow_count == 1234);
  CHECK(back.synth->seed == 99);
  CHECK(back.digest.sections_j == 512);
  CHECK(back.digest.target_dr == 50.0);
  CHECK(back.excerpts.length == 300);
  CHECK(back.excerpts.count == 42);
  CHECK(back.mode == EvalMode::baseline);
  CHECK_THROWS_AS(EvalRun::from_json("{not json"), FormatError);
}

TEST_CASE("eval_fp_rate: generous filter reports only true carriers") {
  SynthConfig synth;
  synth.flow_count = 60;
  synth.seed = 1001;
  const Corpus corpus = synth_generate(synth);
  DigestConfig cfg;
  cfg.sections_j = 64;
  cfg.target_dr = 4.0;  // oversized filter: false positives vanish
  cfg.rotation_fp = 0.999;
  cfg.interval_raw_budget = 64 << 20;

  const auto got = extract_unique_excerpts(corpus, 400, 25, 9);
  REQUIRE(got.excerpts.size() == 25);
  const FpOutcome out = eval_fp_rate(corpus, got.excerpts, cfg, EvalMode::cbid);
  CHECK(out.fp_rate == 0.0);
  CHECK(out.distinct_flows == 60);
  CHECK(out.excerpts == 25);
  CHECK(out.dr0 > 0.0);
}

TEST_CASE("eval_fp_rate: an all-flows report counts (F-1)/F") {
  // one packet per flow; the probe excerpt is a full periodic payload, so the
  // answer degrades to assumed-positive and every flow is reported
  SynthConfig synth;
  synth.flow_count = 9;
  synth.seed = 77;
  synth.entropy = PayloadEntropy::random;
  Corpus corpus = synth_generate(synth);

  const Bytes motif = test::random_bytes(5, 16);
  Bytes periodic;
  for (int i = 0; i < 25; ++i) periodic.insert(periodic.end(), motif.begin(), motif.end());
  PacketRecord extra;
  extra.flow.src_addr = {1, 2, 3, 4};
  extra.flow.src_port = 9999;
  extra.flow.dst_port = 1;
  extra.payload = periodic;
  extra.timestamp_us = corpus.packets.back().timestamp_us + 1;
  corpus.packets.push_back(extra);
  corpus.total_payload_bytes += periodic.size();

  DigestConfig cfg;
  cfg.sections_j = 16;
  cfg.target_dr = 8.0;
  cfg.rotation_fp = 0.999;
  cfg.interval_raw_budget = 64 << 20;

  std::vector<LabeledExcerpt> excerpts{{periodic, extra.flow}};
  const FpOutcome out = eval_fp_rate(corpus, excerpts, cfg, EvalMode::cbid);
  const double f = static_cast<double>(out.distinct_flows);
  CHECK(out.fp_rate == doctest::Approx((f - 1.0) / f));
  CHECK(out.assumed_positive_excerpts == 1);
}

TEST_CASE("eval_fp_rate: baseline mode forces the WBS-style configuration") {
  SynthConfig synth;
  synth.flow_count = 30;
  synth.seed = 55;
  const Corpus corpus = synth_generate(synth);
  DigestConfig cfg;
  cfg.sections_j = 512;
  cfg.partition.threshold_t = 40;
  cfg.target_dr = 8.0;
  cfg.rotation_fp = 0.999;
  cfg.interval_raw_budget = 64 << 20;

  const auto got = extract_unique_excerpts(corpus, 400, 10, 2);
  const FpOutcome base = eval_fp_rate(corpus, got.excerpts, cfg, EvalMode::baseline);
  CHECK(base.fp_rate == 0.0);  // roomy filter
  // baseline digests everything: kept == total blocks
  CHECK(base.blocks_kept == base.blocks_total);
}

TEST_CASE("threshold sweep: the zero row reproduces the baseline exactly") {
  SynthConfig synth;
  synth.flow_count = 40;
  synth.seed = 31;
  const Corpus corpus = synth_generate(synth);
  DigestConfig cfg;
  cfg.target_dr = 30.0;
  cfg.interval_raw_budget = 64 << 20;

  const auto got = extract_unique_excerpts(corpus, 400, 12, 4);
  const auto rows = threshold_sweep(corpus, got.excerpts, cfg, {0, 40});
  REQUIRE(rows.size() == 2);
  const FpOutcome base = eval_fp_rate(corpus, got.excerpts, cfg, EvalMode::baseline);
  CHECK(rows[0].threshold == 0);
  CHECK(rows[0].fp_rate == doctest::Approx(base.fp_rate));
  CHECK(rows[0].block_reduction_d == doctest::Approx(1.0));
  CHECK(rows[1].block_reduction_d > 1.5);
  CHECK_THROWS_AS(threshold_sweep(corpus, got.excerpts, cfg, {70}), ConfigError);
}

TEST_CASE("table report: ones fraction falls as sections multiply") {
  SynthConfig synth;
  synth.flow_count = 400;
  synth.seed = 12;
  const Corpus corpus = synth_generate(synth);
  DigestConfig cfg;
  cfg.target_dr = 50.0;
  cfg.rotation_fp = 0.999;
  cfg.interval_raw_budget = 64 << 20;

  const auto rows = table_report(corpus, cfg, {64, 128, 256}, {1, 2});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].ones_percent > rows[1].ones_percent);
  CHECK(rows[1].ones_percent > rows[2].ones_percent);
  for (const auto& r : rows) {
    CHECK(r.compressed_table_bytes > 0);
    CHECK(r.compressed_table_bytes < r.raw_table_bytes);
    CHECK(r.entropy_bits.size() == 2);
    CHECK(r.dr0 > 0.0);
  }
}

TEST_CASE("histograms: block sizes, spike on zero runs, flow CDF") {
  SynthConfig synth;
  synth.flow_count = 200;
  synth.seed = 21;
  const Corpus corpus = synth_generate(synth);
  DigestConfig cfg;
  cfg.sections_j = 64;
  cfg.target_dr = 30.0;
  cfg.rotation_fp = 0.999;
  cfg.interval_raw_budget = 64 << 20;

  const HistogramReport rep = histogram_report(corpus, cfg, 200, 99);
  std::uint64_t bulk = 0;
  for (int len = 7; len <= 69; ++len) bulk += rep.block_length_counts[len];
  CHECK(bulk > 0);
  for (int len = 0; len < 6; ++len) CHECK(rep.block_length_counts[len] == 0);
  // zero runs in the corpus concentrate extra mass at the minimum length
  const double mean_bin = static_cast<double>(bulk) / 63.0;
  CHECK(static_cast<double>(rep.block_length_counts[6]) > 2.0 * mean_bin);

  REQUIRE(!rep.flow_size_cdf.empty());
  CHECK(rep.flow_size_cdf.back().second == doctest::Approx(1.0));
  double prev = 0.0;
  for (const auto& [size, frac] : rep.flow_size_cdf) {
    CHECK(frac >= prev);
    prev = frac;
  }

  // true negatives: zero-run probe blocks at the minimum length are found in
  // the filter, larger random blocks almost never are
  const std::uint64_t q6 = rep.tn_queried[6], n6 = rep.tn_negative[6];
  std::uint64_t q_large = 0, n_large = 0;
  for (int len = 40; len <= 69; ++len) {
    q_large += rep.tn_queried[len];
    n_large += rep.tn_negative[len];
  }
  REQUIRE(q6 > 0);
  REQUIRE(q_large > 0);
  const double tn6 = static_cast<double>(n6) / q6;
  const double tn_large = static_cast<double>(n_large) / q_large;
  CHECK(tn6 < tn_large);
  CHECK(tn_large > 0.9);
}

TEST_CASE("bench: empty corpus does not divide by zero") {
  Corpus corpus;
  DigestConfig cfg;
  cfg.interval_raw_budget = 4 << 20;
  const BenchResult res = bench(corpus, cfg, 4);
  CHECK(res.bytes_digested == 0);
  CHECK(res.serial_mb_per_s == 0.0);
}

TEST_CASE("bench: runs on a small corpus and reports sane numbers") {
  SynthConfig synth;
  synth.flow_count = 80;
  synth.seed = 6;
  const Corpus corpus = synth_generate(synth);
  DigestConfig cfg;
  cfg.sections_j = 64;
  cfg.target_dr = 50.0;
  cfg.rotation_fp = 0.999;
  cfg.interval_raw_budget = 64 << 20;
  const BenchResult res = bench(corpus, cfg, 4);
  CHECK(res.serial_mb_per_s > 0.0);
  CHECK(res.parallel_mb_per_s > 0.0);
  CHECK(res.bytes_digested == corpus.total_payload_bytes);
}

TEST_CASE("bootstrap CI brackets the mean") {
  std::vector<double> values(200);
  Prng rng(15);
  double sum = 0.0;
  for (auto& v : values) {
    v = rng.next_double();
    sum += v;
  }
  const double mean = sum / values.size();
  const auto [lo, hi] = bootstrap_ci(values, 0.95, 77);
  CHECK(lo < mean);
  CHECK(hi > mean);
  CHECK(hi - lo < 0.2);
}
