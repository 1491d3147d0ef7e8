#include "cbid/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "cbid/errors.hpp"
#include "cbid/prng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cbid {

using nlohmann::json;

namespace {

json synth_to_json(const SynthConfig& s) {
  return json{{"flow_count", s.flow_count},
              {"shape", s.size.shape},
              {"scale", s.size.scale},
              {"max", s.size.max},
              {"entropy", s.entropy == PayloadEntropy::random ? "random" : "mixed-with-zero-runs"},
              {"seed", s.seed}};
}

SynthConfig synth_from_json(const json& j) {
  SynthConfig s;
  s.flow_count = j.at("flow_count").get<std::uint64_t>();
  s.size.shape = j.at("shape").get<double>();
  s.size.scale = j.at("scale").get<double>();
  s.size.max = j.at("max").get<double>();
  const std::string e = j.value("entropy", "mixed-with-zero-runs");
  if (e == "random") s.entropy = PayloadEntropy::random;
  else if (e == "mixed-with-zero-runs") s.entropy = PayloadEntropy::mixed_zero_runs;
  else throw ConfigError("eval spec: unknown entropy mode " + e);
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

json digest_to_json(const DigestConfig& d) {
  return json{{"window", d.partition.window_w},
              {"overlap", d.partition.overlap_o},
              {"qgram", d.partition.qgram_q},
              {"threshold", d.partition.threshold_t},
              {"hash_seed", d.partition.hash_seed},
              {"sections", d.sections_j},
              {"hashes", d.hashes_k},
              {"dr", d.target_dr},
              {"rotation_fp", d.rotation_fp},
              {"raw_budget", d.interval_raw_budget},
              {"index", d.index_enabled},
              {"downsample_type2", d.downsample_type2}};
}

DigestConfig digest_from_json(const json& j) {
  DigestConfig d;
  d.partition.window_w = j.value("window", d.partition.window_w);
  d.partition.overlap_o = j.value("overlap", d.partition.overlap_o);
  d.partition.qgram_q = j.value("qgram", d.partition.qgram_q);
  d.partition.threshold_t = j.value("threshold", d.partition.threshold_t);
  d.partition.hash_seed = j.value("hash_seed", d.partition.hash_seed);
  d.sections_j = j.value("sections", d.sections_j);
  d.hashes_k = j.value("hashes", d.hashes_k);
  d.target_dr = j.value("dr", d.target_dr);
  d.rotation_fp = j.value("rotation_fp", d.rotation_fp);
  d.interval_raw_budget = j.value("raw_budget", d.interval_raw_budget);
  d.index_enabled = j.value("index", d.index_enabled);
  d.downsample_type2 = j.value("downsample_type2", d.downsample_type2);
  return d;
}

}  // namespace

std::string eval_mode_name(EvalMode mode) {
  return mode == EvalMode::cbid ? "cbid" : "baseline";
}

std::string EvalRun::to_json() const {
  json j;
  if (synth) j["corpus"] = json{{"synth", synth_to_json(*synth)}};
  else j["corpus"] = json{{"file", corpus_file}};
  j["digest"] = digest_to_json(digest);
  j["excerpts"] = json{{"length", excerpts.length}, {"count", excerpts.count},
                       {"seed", excerpts.seed}};
  j["mode"] = eval_mode_name(mode);
  return j.dump(2);
}

EvalRun EvalRun::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("eval spec: ") + e.what());
  }
  EvalRun run;
  const json& corpus = j.at("corpus");
  if (corpus.contains("synth")) run.synth = synth_from_json(corpus.at("synth"));
  else run.corpus_file = corpus.at("file").get<std::string>();
  if (j.contains("digest")) run.digest = digest_from_json(j.at("digest"));
  if (j.contains("excerpts")) {
    const json& e = j.at("excerpts");
    run.excerpts.length = e.value("length", run.excerpts.length);
    run.excerpts.count = e.value("count", run.excerpts.count);
    run.excerpts.seed = e.value("seed", run.excerpts.seed);
  }
  const std::string m = j.value("mode", "cbid");
  if (m == "cbid") run.mode = EvalMode::cbid;
  else if (m == "baseline") run.mode = EvalMode::baseline;
  else throw ConfigError("eval spec: unknown mode " + m);
  return run;
}

DigestConfig baseline_config(const DigestConfig& like, double dr, std::uint64_t raw_budget) {
  DigestConfig b = like;
  b.sections_j = 1;
  b.index_enabled = false;
  b.partition.threshold_t = 0;
  b.target_dr = dr;
  b.interval_raw_budget = raw_budget;
  // The budget rule alone decides rotation so matched-size comparisons hold.
  b.rotation_fp = 0.999999;
  return b;
}

double dr_overall(double raw_bytes, double filter_bytes, double compressed_table_bytes) {
  const double denom = filter_bytes + compressed_table_bytes;
  if (!(denom > 0.0)) throw ConfigError("dr_overall: zero digest size");
  return raw_bytes / denom;
}

std::string format_dr(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f:1", ratio);
  return buf;
}

ArchiveTotals archive_totals(std::span<const ArchiveSegment> segments) {
  ArchiveTotals t;
  for (const ArchiveSegment& s : segments) {
    t.raw_bytes += s.counters.raw_bytes;
    t.filter_bytes += s.msbf.byte_size();
    t.table_bytes += s.table.payload.size();
  }
  if (t.filter_bytes + t.table_bytes > 0) {
    t.dr0 = dr_overall(static_cast<double>(t.raw_bytes), static_cast<double>(t.filter_bytes),
                       static_cast<double>(t.table_bytes));
  }
  return t;
}

FpOutcome eval_fp_rate(const Corpus& corpus, std::span<const LabeledExcerpt> excerpts,
                       const DigestConfig& cfg, EvalMode mode, const EngineOptions& engine) {
  DigestConfig effective = cfg;
  if (mode == EvalMode::baseline) {
    effective = baseline_config(cfg, cfg.target_dr, cfg.interval_raw_budget);
  }
  const std::vector<ArchiveSegment> segments =
      digest_stream(corpus.packets, effective, engine);
  const ArchiveTotals totals = archive_totals(segments);

  // Count distinct flows over the whole corpus (the FP-rate denominator).
  std::unordered_map<FlowKey, bool, FlowKeyHash> flows;
  for (const PacketRecord& p : corpus.packets) flows.emplace(p.flow, true);
  const std::uint64_t distinct = flows.size();
  if (distinct == 0) throw ConfigError("eval_fp_rate: empty corpus");

  FpOutcome out;
  out.distinct_flows = distinct;
  out.excerpts = excerpts.size();
  out.dr0 = totals.dr0;
  for (const ArchiveSegment& s : segments) {
    out.blocks_total += s.counters.blocks_total;
    out.blocks_kept += s.counters.blocks_kept;
  }
  out.per_excerpt.assign(excerpts.size(), 0.0);

  // Tables are materialized up front so the per-excerpt loop is read-only.
  for (const ArchiveSegment& s : segments) {
    if (s.cfg.index_enabled) (void)s.index_table();
  }

  std::vector<std::uint64_t> false_counts(excerpts.size(), 0);
  std::vector<std::uint8_t> carrier_seen(excerpts.size(), 0);
  std::vector<std::uint8_t> assumed(excerpts.size(), 0);
  std::vector<std::uint64_t> cand(excerpts.size(), 0), t2(excerpts.size(), 0);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (std::size_t i = 0; i < excerpts.size(); ++i) {
    ExcerptQuery q;
    q.bytes = excerpts[i].bytes;
    const AttributionReport report = investigate(q, segments);
    std::unordered_map<FlowKey, bool, FlowKeyHash> reported;
    bool any_assumed = false;
    for (const SegmentReport& sr : report.segments) {
      if (sr.assumed_positive) any_assumed = true;
      for (const FlowHit& hit : sr.flows) reported.emplace(hit.flow, true);
    }
    carrier_seen[i] = reported.count(excerpts[i].carrier) ? 1 : 0;
    false_counts[i] = reported.size() - (carrier_seen[i] ? 1 : 0);
    assumed[i] = any_assumed ? 1 : 0;
    cand[i] = report.candidates_total;
    t2[i] = report.type2_queries_total;
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < excerpts.size(); ++i) {
    if (!carrier_seen[i]) {
      throw InvariantViolation(
          "eval_fp_rate: true carrier missing from report for excerpt " + std::to_string(i) +
          " (no-false-negative contract broken)");
    }
    out.per_excerpt[i] =
        static_cast<double>(false_counts[i]) / static_cast<double>(distinct);
    sum += out.per_excerpt[i];
    out.assumed_positive_excerpts += assumed[i];
    out.candidates_total += cand[i];
    out.type2_queries_total += t2[i];
  }
  out.fp_rate = excerpts.empty() ? 0.0 : sum / static_cast<double>(excerpts.size());
  return out;
}

std::vector<SweepRow> threshold_sweep(const Corpus& corpus,
                                      std::span<const LabeledExcerpt> excerpts,
                                      const DigestConfig& base,
                                      const std::vector<std::uint32_t>& thresholds,
                                      const EngineOptions& engine) {
  std::vector<SweepRow> rows;
  for (std::uint32_t t : thresholds) {
    if (t > base.partition.max_block_len()) {
      throw ConfigError("sweep: threshold " + std::to_string(t) + " above max block length");
    }
    DigestConfig cfg = baseline_config(base, base.target_dr, base.interval_raw_budget);
    cfg.partition.threshold_t = t;

    const FpOutcome fp = eval_fp_rate(corpus, excerpts, cfg, EvalMode::cbid, engine);

    SweepRow row;
    row.threshold = t;
    row.fp_rate = fp.fp_rate;
    row.block_reduction_d =
        fp.blocks_kept ? static_cast<double>(fp.blocks_total) /
                             static_cast<double>(fp.blocks_kept)
                       : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<TableReportRow> table_report(const Corpus& corpus, const DigestConfig& base,
                                         const std::vector<std::uint32_t>& section_counts,
                                         const std::vector<std::uint32_t>& symbol_sizes,
                                         const EngineOptions& engine) {
  std::vector<TableReportRow> rows;
  for (std::uint32_t j : section_counts) {
    DigestConfig cfg = base;
    cfg.sections_j = j;
    cfg.index_enabled = true;
    const auto segments = digest_stream(corpus.packets, cfg, engine);
    const ArchiveTotals totals = archive_totals(segments);

    TableReportRow row;
    row.sections_j = j;
    row.dr0 = totals.dr0;
    row.symbol_sizes = symbol_sizes;

    // Aggregate over segments (weighted by table size).
    std::uint64_t ones = 0, bits = 0;
    for (const auto& s : segments) {
      const BitmapIndexTable& t = s.index_table();
      ones += t.ones();
      bits += std::uint64_t(t.rows()) * t.columns();
      row.raw_table_bytes += t.raw().size();
      row.compressed_table_bytes += s.table.payload.size();
    }
    row.ones_percent = bits ? 100.0 * static_cast<double>(ones) / static_cast<double>(bits) : 0.0;

    for (std::uint32_t sym : symbol_sizes) {
      // Entropy over the concatenated segment tables.
      double entropy = 0.0;
      std::uint64_t symbols = 0;
      std::unordered_map<std::string, std::uint64_t> freq;
      for (const auto& s : segments) {
        const Bytes& raw = s.index_table().raw();
        const std::size_t n = raw.size() / sym;
        for (std::size_t i = 0; i < n; ++i) {
          freq[std::string(reinterpret_cast<const char*>(raw.data()) + i * sym, sym)]++;
        }
        symbols += n;
      }
      if (symbols > 0) {
        for (const auto& [s, c] : freq) {
          const double p = static_cast<double>(c) / static_cast<double>(symbols);
          entropy -= p * std::log2(p);
        }
      }
      row.entropy_bits.push_back(entropy);
      row.best_ratio.push_back(entropy > 0 ? 8.0 * sym / entropy
                                           : std::numeric_limits<double>::infinity());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

HistogramReport histogram_report(const Corpus& corpus, const DigestConfig& cfg,
                                 std::uint32_t probe_excerpts, std::uint64_t probe_seed,
                                 const EngineOptions& engine) {
  HistogramReport rep;

  for (const PacketRecord& p : corpus.packets) {
    const PartitionResult part = partition_payload(p.payload, cfg.partition);
    for (const Block& b : part.blocks) {
      if (b.length < rep.block_length_counts.size()) rep.block_length_counts[b.length]++;
    }
  }

  {
    std::map<std::uint64_t, std::uint64_t> flow_sizes;
    std::unordered_map<FlowKey, std::uint64_t, FlowKeyHash> totals;
    for (const PacketRecord& p : corpus.packets) totals[p.flow] += p.payload.size();
    for (const auto& [flow, sz] : totals) flow_sizes[sz]++;
    std::uint64_t seen = 0;
    for (const auto& [sz, n] : flow_sizes) {
      seen += n;
      rep.flow_size_cdf.emplace_back(sz, static_cast<double>(seen) /
                                             static_cast<double>(totals.size()));
    }
  }

  if (probe_excerpts > 0) {
    // True-negative distribution: digest without downsampling, then probe with
    // excerpts that never appeared in the traffic. Half of the probes carry a
    // zero run so the low-entropy effect at the smallest block size shows.
    DigestConfig tn_cfg = cfg;
    tn_cfg.partition.threshold_t = 0;
    const auto segments = digest_stream(corpus.packets, tn_cfg, engine);
    if (!segments.empty()) {
      const ArchiveSegment& seg = segments.front();
      Prng rng(derive_seed(probe_seed, 0x7eb));
      for (std::uint32_t i = 0; i < probe_excerpts; ++i) {
        Bytes probe(200);
        rng.fill(probe.data(), probe.size());
        if (i % 2 == 1) {
          std::fill(probe.begin() + 40, probe.begin() + 140, 0);
        }
        const PartitionResult part = partition_payload(probe, tn_cfg.partition);
        for (const Block& b : part.blocks) {
          if (b.length >= rep.tn_queried.size()) continue;
          rep.tn_queried[b.length]++;
          if (!seg.msbf.query(make_type1(block_bytes(probe, b)))) {
            rep.tn_negative[b.length]++;
          }
        }
      }
    }
  }
  return rep;
}

BenchResult bench(const Corpus& corpus, const DigestConfig& cfg, std::uint32_t query_count) {
  BenchResult res;
  res.bytes_digested = corpus.total_payload_bytes;
  if (corpus.packets.empty()) return res;

  using clock = std::chrono::steady_clock;
  auto mbps = [&](double seconds) {
    return seconds > 0.0
               ? static_cast<double>(corpus.total_payload_bytes) / 1.0e6 / seconds
               : 0.0;
  };

  EngineOptions serial;
  serial.mode = ExecMode::serial;
  const auto t0 = clock::now();
  auto segs_serial = digest_stream(corpus.packets, cfg, serial);
  const auto t1 = clock::now();
  EngineOptions parallel;
  parallel.mode = ExecMode::parallel;
  auto segs_parallel = digest_stream(corpus.packets, cfg, parallel);
  const auto t2 = clock::now();

  res.serial_mb_per_s = mbps(std::chrono::duration<double>(t1 - t0).count());
  res.parallel_mb_per_s = mbps(std::chrono::duration<double>(t2 - t1).count());

  const auto ex = extract_unique_excerpts(corpus, 300, query_count, 7);
  if (!ex.excerpts.empty()) {
    for (const auto& s : segs_parallel) {
      if (s.cfg.index_enabled) (void)s.index_table();
    }
    const auto q0 = clock::now();
    for (const auto& e : ex.excerpts) {
      ExcerptQuery q;
      q.bytes = e.bytes;
      (void)investigate(q, segs_parallel);
    }
    const auto q1 = clock::now();
    res.mean_query_ms = std::chrono::duration<double, std::milli>(q1 - q0).count() /
                        static_cast<double>(ex.excerpts.size());
  }
  return res;
}

std::pair<double, double> bootstrap_ci(std::span<const double> values, double confidence,
                                       std::uint64_t seed, std::uint32_t resamples) {
  if (values.empty()) return {0.0, 0.0};
  Prng rng(derive_seed(seed, 0xb0075ULL));
  std::vector<double> means(resamples);
  for (std::uint32_t r = 0; r < resamples; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum += values[rng.next_below(values.size())];
    }
    means[r] = sum / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - confidence) / 2.0;
  const auto lo_idx = static_cast<std::size_t>(alpha * (resamples - 1));
  const auto hi_idx = static_cast<std::size_t>((1.0 - alpha) * (resamples - 1));
  return {means[lo_idx], means[hi_idx]};
}

}  // namespace cbid
