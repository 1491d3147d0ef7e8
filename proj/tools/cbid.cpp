// cbid — payload attribution engine CLI.
//
//   cbid digest --in traffic.pcap --out day.cbid --dr 100 --sections 2048
//   cbid query  --archive day.cbid --excerpt evidence.bin --json
//   cbid eval fp --spec run.json
//   cbid inspect --archive day.cbid

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cbid/archive_io.hpp"
#include "cbid/corpus.hpp"
#include "cbid/errors.hpp"
#include "cbid/eval.hpp"
#include "cbid/pcap.hpp"
#include "cbid/query.hpp"
#include "cbid/synth.hpp"

using json = nlohmann::json;
using namespace cbid;

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Corpus load_input(const std::string& path, CaptureStats* stats) {
  if (looks_like_capture(path)) return read_capture(path, stats);
  if (looks_like_corpus(path)) return read_corpus(path);
  // otherwise: a JSON synth spec, either bare or under a "synth" key
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception&) {
    throw FormatError(path + ": not a capture, corpus dump or synth spec");
  }
  const json& s = j.contains("synth") ? j.at("synth") : j;
  SynthConfig cfg;
  cfg.flow_count = s.value("flow_count", cfg.flow_count);
  cfg.size.shape = s.value("shape", cfg.size.shape);
  cfg.size.scale = s.value("scale", cfg.size.scale);
  cfg.size.max = s.value("max", cfg.size.max);
  cfg.seed = s.value("seed", cfg.seed);
  const std::string entropy = s.value("entropy", "mixed-with-zero-runs");
  cfg.entropy = entropy == "random" ? PayloadEntropy::random : PayloadEntropy::mixed_zero_runs;
  return synth_generate(cfg);
}

Bytes load_excerpt(const std::string& arg) {
  if (std::filesystem::exists(arg)) {
    std::ifstream in(arg, std::ios::binary);
    if (!in) throw IoError("cannot open excerpt file " + arg);
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  return from_hex(arg);
}

json report_to_json(const AttributionReport& report) {
  json segs = json::array();
  for (const auto& sr : report.segments) {
    json flows = json::array();
    for (const auto& hit : sr.flows) {
      flows.push_back({{"flow", hit.flow.to_string()},
                       {"blocks_confirmed", hit.blocks_confirmed}});
    }
    segs.push_back({{"segment", sr.segment_index},
                    {"interval_start_us", sr.interval_start_us},
                    {"interval_end_us", sr.interval_end_us},
                    {"matched", sr.matched},
                    {"assumed_positive", sr.assumed_positive},
                    {"blocks_queried", sr.blocks_queried},
                    {"candidates_examined", sr.candidates_examined},
                    {"type2_queries", sr.type2_queries},
                    {"flows", flows}});
  }
  return json{{"segments", segs},
              {"segments_checked", report.segments_checked},
              {"candidates_total", report.candidates_total},
              {"type2_queries_total", report.type2_queries_total}};
}

void print_report_table(const AttributionReport& report) {
  if (report.segments.empty()) {
    std::printf("no segment matched (%llu checked)\n",
                static_cast<unsigned long long>(report.segments_checked));
    return;
  }
  for (const auto& sr : report.segments) {
    std::printf("segment %zu  [%llu, %llu]  %s  blocks=%u candidates=%llu\n",
                sr.segment_index, static_cast<unsigned long long>(sr.interval_start_us),
                static_cast<unsigned long long>(sr.interval_end_us),
                sr.assumed_positive ? "ASSUMED-POSITIVE" : "matched", sr.blocks_queried,
                static_cast<unsigned long long>(sr.candidates_examined));
    for (const auto& hit : sr.flows) {
      std::printf("  %-55s confirmed=%u\n", hit.flow.to_string().c_str(),
                  hit.blocks_confirmed);
    }
  }
}

Corpus corpus_for_run(const EvalRun& run) {
  if (run.synth) return synth_generate(*run.synth);
  if (looks_like_capture(run.corpus_file)) return read_capture(run.corpus_file);
  return read_corpus(run.corpus_file);
}

std::vector<LabeledExcerpt> excerpts_for_run(const EvalRun& run, const Corpus& corpus) {
  const auto got = extract_unique_excerpts(corpus, run.excerpts.length, run.excerpts.count,
                                           run.excerpts.seed);
  if (got.shortfall > 0) {
    std::fprintf(stderr, "warning: only %zu of %u requested unique excerpts found\n",
                 got.excerpts.size(), run.excerpts.count);
  }
  return got.excerpts;
}

int cmd_digest(const std::string& in, const std::string& out, DigestConfig cfg,
               std::uint64_t budget, bool baseline, bool serial) {
  CaptureStats stats;
  const Corpus corpus = load_input(in, &stats);
  if (budget == 0) {
    cfg.interval_raw_budget = std::max<std::uint64_t>(corpus.total_payload_bytes, 1);
  } else {
    cfg.interval_raw_budget = budget;
  }
  if (baseline) {
    cfg = baseline_config(cfg, cfg.target_dr, cfg.interval_raw_budget);
  }

  EngineOptions opts;
  opts.mode = serial ? ExecMode::serial : ExecMode::parallel;
  opts.on_segment = [](const SegmentMetrics& m) {
    json line = {{"event", "segment_finalized"},
                 {"packets", m.packets},
                 {"raw_bytes", m.raw_bytes},
                 {"blocks_total", m.blocks_total},
                 {"blocks_kept", m.blocks_kept},
                 {"block_reduction_d", m.block_reduction_d},
                 {"digest_bytes", m.digest_bytes},
                 {"achieved_dr", m.achieved_dr}};
    std::fprintf(stderr, "%s\n", line.dump().c_str());
  };

  const auto segments = digest_stream(corpus.packets, cfg, opts);
  write_archive(segments, out);

  const ArchiveTotals totals = archive_totals(segments);
  json summary = {{"event", "archive_written"},
                  {"path", out},
                  {"segments", segments.size()},
                  {"packets", corpus.packets.size()},
                  {"raw_bytes", totals.raw_bytes},
                  {"filter_bytes", totals.filter_bytes},
                  {"table_bytes", totals.table_bytes},
                  {"dr0", totals.dr0},
                  {"skipped_non_tcpudp", stats.skipped_non_tcpudp},
                  {"malformed", stats.malformed}};
  std::printf("%s\n", summary.dump(2).c_str());
  return 0;
}

int cmd_query(const std::string& archive_path, const std::string& excerpt_arg,
              std::optional<std::uint64_t> from, std::optional<std::uint64_t> to,
              bool as_json, bool no_index) {
  const auto segments = read_archive(archive_path);
  ExcerptQuery q;
  q.bytes = load_excerpt(excerpt_arg);
  q.from_ts = from;
  q.to_ts = to;
  if (!segments.empty() &&
      q.bytes.size() < min_reliable_excerpt_len(segments[0].cfg.partition)) {
    std::fprintf(stderr,
                 "warning: excerpt shorter than %u bytes; expect assumed-positive, "
                 "low-confidence results\n",
                 min_reliable_excerpt_len(segments[0].cfg.partition));
  }
  QueryOptions opts;
  opts.use_index = !no_index;
  const AttributionReport report = investigate(q, segments, opts);
  if (as_json) {
    std::printf("%s\n", report_to_json(report).dump(2).c_str());
  } else {
    print_report_table(report);
  }
  return 0;
}

int cmd_inspect(const std::string& archive_path, bool as_json) {
  const auto segments = read_archive(archive_path);
  const ArchiveTotals totals = archive_totals(segments);
  json j;
  j["segments"] = json::array();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    const double section_fp =
        expected_fp(static_cast<double>(s.msbf.section_bits()),
                    static_cast<double>(s.msbf.max_section_n()),
                    static_cast<double>(s.msbf.hash_count()));
    j["segments"].push_back(
        {{"index", i},
         {"interval_start_us", s.interval_start_us},
         {"interval_end_us", s.interval_end_us},
         {"flows", s.flows.size()},
         {"sections_j", s.msbf.sections()},
         {"hashes_k", s.msbf.hash_count()},
         {"section_bits", s.msbf.section_bits()},
         {"filter_bytes", s.msbf.byte_size()},
         {"inserted", s.msbf.inserted_total()},
         {"worst_section_expected_fp", section_fp},
         {"threshold_t", s.cfg.partition.threshold_t},
         {"index_enabled", s.cfg.index_enabled},
         {"table_codec", static_cast<int>(s.table.codec)},
         {"table_bytes", s.table.payload.size()},
         {"raw_bytes", s.counters.raw_bytes},
         {"packets", s.counters.packets},
         {"blocks_total", s.counters.blocks_total},
         {"blocks_kept", s.counters.blocks_kept},
         {"achieved_dr", s.achieved_dr()}});
  }
  j["totals"] = {{"raw_bytes", totals.raw_bytes},
                 {"filter_bytes", totals.filter_bytes},
                 {"table_bytes", totals.table_bytes},
                 {"dr0", totals.dr0},
                 {"dr0_formatted", format_dr(totals.dr0)}};
  if (as_json) {
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    std::printf("%zu segment(s), raw %llu bytes, digest %llu bytes, DR0 %s\n",
                segments.size(), static_cast<unsigned long long>(totals.raw_bytes),
                static_cast<unsigned long long>(totals.filter_bytes + totals.table_bytes),
                format_dr(totals.dr0).c_str());
    for (const auto& seg : j["segments"]) {
      std::printf(
          "  #%llu flows=%llu j=%llu inserted=%llu filter=%lluB table=%lluB dr=%.1f\n",
          seg["index"].get<unsigned long long>(), seg["flows"].get<unsigned long long>(),
          seg["sections_j"].get<unsigned long long>(),
          seg["inserted"].get<unsigned long long>(),
          seg["filter_bytes"].get<unsigned long long>(),
          seg["table_bytes"].get<unsigned long long>(), seg["achieved_dr"].get<double>());
    }
  }
  return 0;
}

int cmd_eval_fp(const EvalRun& run) {
  const Corpus corpus = corpus_for_run(run);
  const auto excerpts = excerpts_for_run(run, corpus);
  const FpOutcome out = eval_fp_rate(corpus, excerpts, run.digest, run.mode);
  const auto [lo, hi] = bootstrap_ci(out.per_excerpt, 0.95, run.excerpts.seed);
  json j = {{"mode", eval_mode_name(run.mode)},
            {"fp_rate", out.fp_rate},
            {"fp_rate_ci95", {lo, hi}},
            {"dr0", out.dr0},
            {"dr0_formatted", format_dr(out.dr0)},
            {"distinct_flows", out.distinct_flows},
            {"excerpts", out.excerpts},
            {"assumed_positive_excerpts", out.assumed_positive_excerpts},
            {"candidates_total", out.candidates_total},
            {"type2_queries_total", out.type2_queries_total},
            {"blocks_total", out.blocks_total},
            {"blocks_kept", out.blocks_kept}};
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int cmd_eval_sweep(const EvalRun& run, const std::vector<std::uint32_t>& thresholds) {
  const Corpus corpus = corpus_for_run(run);
  const auto excerpts = excerpts_for_run(run, corpus);
  const auto rows = threshold_sweep(corpus, excerpts, run.digest, thresholds);
  std::printf("threshold,fp_rate,block_reduction_d\n");
  for (const auto& r : rows) {
    std::printf("%u,%.6g,%.4g\n", r.threshold, r.fp_rate, r.block_reduction_d);
  }
  return 0;
}

int cmd_eval_tables(const EvalRun& run, const std::vector<std::uint32_t>& sections,
                    const std::vector<std::uint32_t>& symbols) {
  const Corpus corpus = corpus_for_run(run);
  const auto rows = table_report(corpus, run.digest, sections, symbols);
  std::printf("sections,ones_percent,raw_table_bytes,compressed_table_bytes,dr0");
  for (const auto s : symbols) std::printf(",entropy_sym%u,best_ratio_sym%u", s, s);
  std::printf("\n");
  for (const auto& r : rows) {
    std::printf("%u,%.4f,%llu,%llu,%.2f", r.sections_j, r.ones_percent,
                static_cast<unsigned long long>(r.raw_table_bytes),
                static_cast<unsigned long long>(r.compressed_table_bytes), r.dr0);
    for (std::size_t i = 0; i < r.entropy_bits.size(); ++i) {
      std::printf(",%.4f,%.3f", r.entropy_bits[i], r.best_ratio[i]);
    }
    std::printf("\n");
  }
  return 0;
}

int cmd_eval_hist(const EvalRun& run, const std::string& out_dir) {
  const Corpus corpus = corpus_for_run(run);
  const HistogramReport rep =
      histogram_report(corpus, run.digest, 2000, run.excerpts.seed);
  std::filesystem::create_directories(out_dir);

  {
    std::ofstream f(out_dir + "/block_sizes.csv");
    f << "length,count\n";
    for (std::size_t len = 6; len < rep.block_length_counts.size(); ++len) {
      f << len << "," << rep.block_length_counts[len] << "\n";
    }
  }
  {
    std::ofstream f(out_dir + "/tn_by_block_size.csv");
    f << "length,queried,true_negative\n";
    for (std::size_t len = 6; len < rep.tn_queried.size(); ++len) {
      f << len << "," << rep.tn_queried[len] << "," << rep.tn_negative[len] << "\n";
    }
  }
  {
    std::ofstream f(out_dir + "/flow_cdf.csv");
    f << "payload_bytes,cdf\n";
    for (const auto& [size, frac] : rep.flow_size_cdf) f << size << "," << frac << "\n";
  }
  std::printf("wrote block_sizes.csv, tn_by_block_size.csv, flow_cdf.csv under %s\n",
              out_dir.c_str());
  return 0;
}

int cmd_eval_bench(const EvalRun& run) {
  const Corpus corpus = corpus_for_run(run);
  const BenchResult res = bench(corpus, run.digest);
  json j = {{"bytes_digested", res.bytes_digested},
            {"serial_mb_per_s", res.serial_mb_per_s},
            {"parallel_mb_per_s", res.parallel_mb_per_s},
            {"mean_query_ms", res.mean_query_ms}};
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cbid — traffic digesting and payload attribution"};
  app.require_subcommand(1);

  // ---- digest ----
  auto* digest = app.add_subcommand("digest", "digest traffic into an archive");
  std::string in_path, out_path = "out.cbid";
  DigestConfig dcfg;
  std::uint64_t budget = 0;
  bool baseline = false, serial = false;
  digest->add_option("--in", in_path, "pcap/pcapng, CBTR corpus, or synth spec JSON")
      ->required();
  digest->add_option("--out", out_path, "archive path");
  digest->add_option("--dr", dcfg.target_dr, "target data reduction ratio");
  digest->add_option("--sections", dcfg.sections_j, "filter sections (j)");
  digest->add_option("--hashes", dcfg.hashes_k, "hash functions per section (k)");
  digest->add_option("--threshold", dcfg.partition.threshold_t, "downsampling threshold T");
  digest->add_option("--window", dcfg.partition.window_w, "winnowing window");
  digest->add_option("--overlap", dcfg.partition.overlap_o, "shingling overlap");
  digest->add_option("--seed", dcfg.partition.hash_seed, "hash seed");
  digest->add_option("--budget", budget, "interval raw-byte budget (default: whole input)");
  digest->add_option("--rotation-fp", dcfg.rotation_fp, "rotate at this per-section FP");
  digest->add_flag("--baseline", baseline, "conventional filter, T=0, no index table");
  digest->add_flag("--serial", serial, "single-threaded reference pipeline");

  // ---- query ----
  auto* query = app.add_subcommand("query", "investigate an excerpt");
  std::string archive_path, excerpt_arg;
  std::uint64_t from_ts = 0, to_ts = 0;
  bool q_json = false, q_noindex = false;
  query->add_option("--archive", archive_path, "CBID archive")->required();
  query->add_option("--excerpt", excerpt_arg, "file path or hex string")->required();
  auto* fopt = query->add_option("--from", from_ts, "interval filter, microseconds");
  auto* topt = query->add_option("--to", to_ts, "interval filter, microseconds");
  query->add_flag("--json", q_json, "JSON report");
  query->add_flag("--no-index", q_noindex, "skip index pruning (exhaustive)");

  // ---- inspect ----
  auto* inspect = app.add_subcommand("inspect", "describe an archive");
  std::string inspect_path;
  bool i_json = false;
  inspect->add_option("--archive", inspect_path, "CBID archive")->required();
  inspect->add_flag("--json", i_json, "JSON output");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "experiment harness");
  eval->require_subcommand(1);
  std::string spec_path, hist_out = "hist_out";
  std::vector<std::uint32_t> thresholds = {0, 10, 20, 30, 40, 45, 50, 60};
  std::vector<std::uint32_t> sections = {1024, 2048, 4096};
  std::vector<std::uint32_t> symbols = {1, 2, 4, 8};
  auto add_spec = [&](CLI::App* sub) {
    sub->add_option("--spec", spec_path, "EvalRun spec JSON")->required();
  };
  auto* efp = eval->add_subcommand("fp", "false-positive rate for one run");
  add_spec(efp);
  auto* esweep = eval->add_subcommand("sweep", "downsampling threshold sweep (CSV)");
  add_spec(esweep);
  esweep->add_option("--thresholds", thresholds, "thresholds to test");
  auto* etables = eval->add_subcommand("tables", "index-table statistics (CSV)");
  add_spec(etables);
  etables->add_option("--sections", sections, "section counts to test");
  etables->add_option("--symbols", symbols, "entropy symbol sizes, bytes");
  auto* ehist = eval->add_subcommand("hist", "block/flow/true-negative histograms (CSV)");
  add_spec(ehist);
  ehist->add_option("--out", hist_out, "output directory");
  auto* ebench = eval->add_subcommand("bench", "digest and query throughput");
  add_spec(ebench);

  CLI11_PARSE(app, argc, argv);

  try {
    if (digest->parsed()) {
      return cmd_digest(in_path, out_path, dcfg, budget, baseline, serial);
    }
    if (query->parsed()) {
      return cmd_query(archive_path, excerpt_arg,
                       fopt->count() ? std::optional<std::uint64_t>(from_ts) : std::nullopt,
                       topt->count() ? std::optional<std::uint64_t>(to_ts) : std::nullopt,
                       q_json, q_noindex);
    }
    if (inspect->parsed()) {
      return cmd_inspect(inspect_path, i_json);
    }
    if (eval->parsed()) {
      const EvalRun run = EvalRun::from_json(read_text_file(spec_path));
      if (efp->parsed()) return cmd_eval_fp(run);
      if (esweep->parsed()) return cmd_eval_sweep(run, thresholds);
      if (etables->parsed()) return cmd_eval_tables(run, sections, symbols);
      if (ehist->parsed()) return cmd_eval_hist(run, hist_out);
      if (ebench->parsed()) return cmd_eval_bench(run);
    }
  } catch (const InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
