#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cbid/archive_io.hpp"
#include "cbid/errors.hpp"
#include "cbid/corpus.hpp"
#include "cbid/query.hpp"
#include "cbid/synth.hpp"
#include "test_util.hpp"

using namespace cbid;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Bytes slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const Bytes& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

std::vector<ArchiveSegment> sample_segments(std::uint64_t seed, std::uint32_t flows = 30) {
  SynthConfig synth;
  synth.flow_count = flows;
  synth.seed = seed;
  const Corpus corpus = synth_generate(synth);
  DigestConfig cfg;
  cfg.sections_j = 16;
  cfg.target_dr = 16.0;
  cfg.rotation_fp = 0.999;
  cfg.interval_raw_budget = corpus.total_payload_bytes / 3 + 1;
  return digest_stream(corpus.packets, cfg);
}

}  // namespace

TEST_CASE("archive: empty list round-trips at a fixed size") {
  const std::string path = temp_path("empty.cbid");
  write_archive({}, path);
  CHECK(std::filesystem::file_size(path) == 16);
  CHECK(read_archive(path).empty());
}

TEST_CASE("archive: segments survive a round trip field by field") {
  const auto segments = sample_segments(42);
  REQUIRE(segments.size() >= 2);
  const std::string path = temp_path("roundtrip.cbid");
  write_archive(segments, path);
  const auto back = read_archive(path);
  REQUIRE(back.size() == segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    CHECK(back[i].equal_contents(segments[i]));
    CHECK(encode_segment(back[i]) == encode_segment(segments[i]));
  }
  // writing the same segments twice produces identical files
  const std::string path2 = temp_path("roundtrip2.cbid");
  write_archive(segments, path2);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("archive: query answers identical before and after persistence") {
  SynthConfig synth;
  synth.flow_count = 40;
  synth.seed = 4242;
  const Corpus corpus = synth_generate(synth);
  DigestConfig cfg;
  cfg.sections_j = 32;
  cfg.target_dr = 64.0;
  cfg.rotation_fp = 0.999;
  cfg.interval_raw_budget = 64 << 20;
  const auto before = digest_stream(corpus.packets, cfg);

  const std::string path = temp_path("behave.cbid");
  write_archive(before, path);
  const auto after = read_archive(path);

  const auto got = extract_unique_excerpts(corpus, 250, 20, 5);
  for (const auto& e : got.excerpts) {
    ExcerptQuery q;
    q.bytes = e.bytes;
    const auto ra = investigate(q, before);
    const auto rb = investigate(q, after);
    REQUIRE(ra.segments.size() == rb.segments.size());
    for (std::size_t s = 0; s < ra.segments.size(); ++s) {
      CHECK(ra.segments[s].matched == rb.segments[s].matched);
      CHECK(ra.segments[s].assumed_positive == rb.segments[s].assumed_positive);
      REQUIRE(ra.segments[s].flows.size() == rb.segments[s].flows.size());
      for (std::size_t f = 0; f < ra.segments[s].flows.size(); ++f) {
        CHECK(ra.segments[s].flows[f].flow == rb.segments[s].flows[f].flow);
        CHECK(ra.segments[s].flows[f].blocks_confirmed ==
              rb.segments[s].flows[f].blocks_confirmed);
      }
    }
  }
}

TEST_CASE("archive: corrupted files are rejected with descriptive errors") {
  const auto segments = sample_segments(7, 10);
  const std::string path = temp_path("corrupt.cbid");
  write_archive(segments, path);
  const Bytes good = slurp(path);

  SUBCASE("bad magic") {
    Bytes bad = good;
    bad[0] = 'X';
    spit(path, bad);
    CHECK_THROWS_WITH_AS(static_cast<void>(read_archive(path)),
                         doctest::Contains("magic"), FormatError);
  }
  SUBCASE("unsupported future version") {
    Bytes bad = good;
    bad[4] = 9;
    spit(path, bad);
    CHECK_THROWS_WITH_AS(static_cast<void>(read_archive(path)),
                         doctest::Contains("version"), FormatError);
  }
  SUBCASE("payload byte flip names the segment") {
    Bytes bad = good;
    bad[bad.size() - 10] ^= 0x40;  // inside the last segment body
    spit(path, bad);
    try {
      (void)read_archive(path);
      FAIL("expected a checksum error");
    } catch (const FormatError& e) {
      const std::string what = e.what();
      CHECK(what.find("checksum") != std::string::npos);
      CHECK(what.find(std::to_string(segments.size() - 1)) != std::string::npos);
    }
  }
  SUBCASE("truncation") {
    Bytes bad(good.begin(), good.end() - 25);
    spit(path, bad);
    CHECK_THROWS_AS(static_cast<void>(read_archive(path)), FormatError);
  }
  SUBCASE("every single-byte flip is detected") {
    int detected = 0, total = 0;
    for (std::size_t pos = 0; pos < good.size(); pos += 1) {
      Bytes bad = good;
      bad[pos] ^= 0x01;
      spit(path, bad);
      ++total;
      try {
        (void)read_archive(path);
      } catch (const std::exception&) {
        ++detected;
      }
    }
    CHECK(detected == total);
  }
}

TEST_CASE("archive: lazy table decompression, one event per touched segment") {
  SynthConfig synth;
  synth.flow_count = 36;
  synth.seed = 11;
  const Corpus corpus = synth_generate(synth);
  DigestConfig cfg;
  cfg.sections_j = 16;
  cfg.target_dr = 16.0;
  cfg.rotation_fp = 0.999;
  cfg.interval_raw_budget = corpus.total_payload_bytes / 4 + 1;
  const auto segments = digest_stream(corpus.packets, cfg);
  REQUIRE(segments.size() >= 3);

  const std::string path = temp_path("lazy.cbid");
  write_archive(segments, path);
  const auto archive = read_archive(path);

  auto events = [&] {
    std::uint64_t n = 0;
    for (const auto& s : archive) n += s.table_decompressions();
    return n;
  };
  CHECK(events() == 0);

  // find an excerpt carried by exactly one segment's packets
  const auto got = extract_unique_excerpts(corpus, 300, 5, 3);
  REQUIRE(!got.excerpts.empty());
  ExcerptQuery q;
  q.bytes = got.excerpts[0].bytes;
  const auto report = investigate(q, archive);
  std::uint64_t matched = report.segments.size();
  CHECK(events() == matched);
  // repeated queries reuse the cache
  (void)investigate(q, archive);
  CHECK(events() == matched);
}

TEST_CASE("archive: write failure leaves no partial file") {
  const auto segments = sample_segments(3, 5);
  const std::string path = "/nonexistent-dir/x.cbid";
  CHECK_THROWS_AS(write_archive(segments, path), IoError);
  CHECK(!std::filesystem::exists(path));
}
