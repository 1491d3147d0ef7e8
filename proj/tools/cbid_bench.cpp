// Digest throughput comparison: single-threaded reference pipeline vs the
// OpenMP batch pipeline, plus mean query latency. Output equality between the
// two pipelines is asserted here as well, so the benchmark doubles as a
// cheap consistency check.
//
//   cbid_bench [--mb 64] [--flows N] [--seed S] [--queries Q]

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>

#include "cbid/archive_io.hpp"
#include "cbid/corpus.hpp"
#include "cbid/digest.hpp"
#include "cbid/eval.hpp"
#include "cbid/query.hpp"
#include "cbid/synth.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace cbid;
using clock_type = std::chrono::steady_clock;

int main(int argc, char** argv) {
  CLI::App app{"cbid_bench — serial vs OpenMP digest pipeline"};
  double target_mb = 64.0;
  std::uint64_t flows = 0;
  std::uint64_t seed = 1;
  std::uint32_t queries = 64;
  std::uint32_t repeats = 1;
  app.add_option("--mb", target_mb, "approximate corpus size in MB");
  app.add_option("--flows", flows, "flow count (overrides --mb)");
  app.add_option("--seed", seed, "corpus seed");
  app.add_option("--queries", queries, "query sample size");
  app.add_option("--repeats", repeats, "measurement repetitions");
  CLI11_PARSE(app, argc, argv);

  SynthConfig synth;
  synth.seed = seed;
  synth.flow_count = flows ? flows : static_cast<std::uint64_t>(target_mb * 1e6 / 2500.0);
  std::printf("generating corpus: %llu flows, seed %llu\n",
              static_cast<unsigned long long>(synth.flow_count),
              static_cast<unsigned long long>(seed));
  const Corpus corpus = synth_generate(synth);
  std::printf("corpus: %zu packets, %.1f MB payload\n", corpus.packets.size(),
              static_cast<double>(corpus.total_payload_bytes) / 1e6);

  DigestConfig cfg;
  cfg.interval_raw_budget = corpus.total_payload_bytes + 1;
  cfg.rotation_fp = 0.999999;

  const double mb = static_cast<double>(corpus.total_payload_bytes) / 1e6;
  std::vector<ArchiveSegment> serial_out, parallel_out;
  double best_serial = 0.0, best_parallel = 0.0;
  for (std::uint32_t r = 0; r < repeats; ++r) {
    EngineOptions serial;
    serial.mode = ExecMode::serial;
    auto t0 = clock_type::now();
    serial_out = digest_stream(corpus.packets, cfg, serial);
    auto t1 = clock_type::now();
    EngineOptions parallel;
    parallel.mode = ExecMode::parallel;
    parallel_out = digest_stream(corpus.packets, cfg, parallel);
    auto t2 = clock_type::now();
    best_serial = std::max(best_serial, mb / std::chrono::duration<double>(t1 - t0).count());
    best_parallel = std::max(best_parallel, mb / std::chrono::duration<double>(t2 - t1).count());
  }

  // both pipelines must produce identical archives
  bool identical = serial_out.size() == parallel_out.size();
  for (std::size_t i = 0; identical && i < serial_out.size(); ++i) {
    identical = encode_segment(serial_out[i]) == encode_segment(parallel_out[i]);
  }

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("serial digest:   %8.1f MB/s\n", best_serial);
  std::printf("parallel digest: %8.1f MB/s  (%d thread%s)\n", best_parallel, threads,
              threads == 1 ? "" : "s");
  std::printf("outputs identical: %s\n", identical ? "yes" : "NO");

  const auto ex = extract_unique_excerpts(corpus, 300, queries, seed + 1);
  if (!ex.excerpts.empty()) {
    for (const auto& s : parallel_out) {
      if (s.cfg.index_enabled) (void)s.index_table();
    }
    const auto q0 = clock_type::now();
    for (const auto& e : ex.excerpts) {
      ExcerptQuery q;
      q.bytes = e.bytes;
      (void)investigate(q, parallel_out);
    }
    const auto q1 = clock_type::now();
    std::printf("mean query:      %8.3f ms over %zu excerpts\n",
                std::chrono::duration<double, std::milli>(q1 - q0).count() /
                    static_cast<double>(ex.excerpts.size()),
                ex.excerpts.size());
  }
  return identical ? 0 : 1;
}
