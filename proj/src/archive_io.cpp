#include "cbid/archive_io.hpp"

#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "cbid/errors.hpp"
#include "cbid/hash.hpp"
#include "wire.hpp"

namespace cbid {

namespace {

constexpr char kMagic[4] = {'C', 'B', 'I', 'D'};
constexpr std::uint64_t kChecksumSeed = 0xcb1dc8ec5eedULL;
constexpr std::size_t kHeaderSize = 16;
constexpr std::size_t kDirEntrySize = 24;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const char* what) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end == s.c_str() || *end != '\0') {
    throw FormatError(std::string("archive: bad numeric value for ") + what);
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  char* end = nullptr;
  errno = 0;
  const std::uint64_t v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || end == s.c_str() || *end != '\0') {
    throw FormatError(std::string("archive: bad integer value for ") + what);
  }
  return v;
}

void encode_config(Bytes& out, const DigestConfig& cfg) {
  const std::vector<std::pair<std::string, std::string>> kv = {
      {"window_w", std::to_string(cfg.partition.window_w)},
      {"overlap_o", std::to_string(cfg.partition.overlap_o)},
      {"qgram_q", std::to_string(cfg.partition.qgram_q)},
      {"threshold_t", std::to_string(cfg.partition.threshold_t)},
      {"hash_seed", std::to_string(cfg.partition.hash_seed)},
      {"sections_j", std::to_string(cfg.sections_j)},
      {"hashes_k", std::to_string(cfg.hashes_k)},
      {"target_dr", fmt_double(cfg.target_dr)},
      {"rotation_fp", fmt_double(cfg.rotation_fp)},
      {"interval_raw_budget", std::to_string(cfg.interval_raw_budget)},
      {"index_enabled", cfg.index_enabled ? "1" : "0"},
      {"downsample_type2", cfg.downsample_type2 ? "1" : "0"},
  };
  wire::put_u32(out, static_cast<std::uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    wire::put_string(out, k);
    wire::put_string(out, v);
  }
}

DigestConfig decode_config(wire::Reader& r) {
  const std::uint32_t n = r.u32();
  if (n > 64) throw FormatError("archive: config block too large");
  DigestConfig cfg;
  bool seen_index = false;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string k = r.str();
    const std::string v = r.str();
    if (k == "window_w") cfg.partition.window_w = static_cast<std::uint32_t>(parse_u64(v, "window_w"));
    else if (k == "overlap_o") cfg.partition.overlap_o = static_cast<std::uint32_t>(parse_u64(v, "overlap_o"));
    else if (k == "qgram_q") cfg.partition.qgram_q = static_cast<std::uint32_t>(parse_u64(v, "qgram_q"));
    else if (k == "threshold_t") cfg.partition.threshold_t = static_cast<std::uint32_t>(parse_u64(v, "threshold_t"));
    else if (k == "hash_seed") cfg.partition.hash_seed = parse_u64(v, "hash_seed");
    else if (k == "sections_j") cfg.sections_j = static_cast<std::uint32_t>(parse_u64(v, "sections_j"));
    else if (k == "hashes_k") cfg.hashes_k = static_cast<std::uint32_t>(parse_u64(v, "hashes_k"));
    else if (k == "target_dr") cfg.target_dr = parse_double(v, "target_dr");
    else if (k == "rotation_fp") cfg.rotation_fp = parse_double(v, "rotation_fp");
    else if (k == "interval_raw_budget") cfg.interval_raw_budget = parse_u64(v, "interval_raw_budget");
    else if (k == "index_enabled") { cfg.index_enabled = v == "1"; seen_index = true; }
    else if (k == "downsample_type2") cfg.downsample_type2 = v == "1";
    // Unknown keys are allowed: later writers may add informational entries.
  }
  if (!seen_index) throw FormatError("archive: config block missing required keys");
  return cfg;
}

}  // namespace

Bytes encode_segment(const ArchiveSegment& seg) {
  Bytes out;
  encode_config(out, seg.cfg);
  wire::put_u64(out, seg.interval_start_us);
  wire::put_u64(out, seg.interval_end_us);

  wire::put_u32(out, seg.flows.size());
  for (const FlowKey& f : seg.flows.flows()) {
    const auto rec = f.wide_record();
    wire::put_bytes(out, ByteView(rec.data(), rec.size()));
  }

  const MultiSectionBloomFilter& m = seg.msbf;
  wire::put_u32(out, m.sections());
  wire::put_u32(out, m.hash_count());
  wire::put_u64(out, m.section_seed());
  wire::put_u64(out, m.bit_seed());
  wire::put_u64(out, m.section_bits());
  wire::put_u64(out, m.inserted_total());
  for (std::uint32_t c : m.section_counts()) wire::put_u32(out, c);
  for (std::uint64_t w : m.words()) wire::put_u64(out, w);

  wire::put_u8(out, static_cast<std::uint8_t>(seg.table.codec));
  wire::put_u32(out, seg.table.rows);
  wire::put_u32(out, seg.table.columns);
  wire::put_u64(out, seg.table.payload.size());
  wire::put_bytes(out, seg.table.payload);

  wire::put_u64(out, seg.counters.raw_bytes);
  wire::put_u64(out, seg.counters.packets);
  wire::put_u64(out, seg.counters.blocks_total);
  wire::put_u64(out, seg.counters.blocks_kept);
  return out;
}

ArchiveSegment decode_segment(ByteView body) {
  wire::Reader r(body, "archive segment");
  ArchiveSegment seg;
  seg.cfg = decode_config(r);
  seg.interval_start_us = r.u64();
  seg.interval_end_us = r.u64();

  const std::uint32_t flow_count = r.u32();
  for (std::uint32_t i = 0; i < flow_count; ++i) {
    seg.flows.register_flow(FlowKey::from_wide_record(r.take(38)));
  }
  if (seg.flows.size() != flow_count) {
    throw FormatError("archive: duplicate flow in flow list");
  }

  const std::uint32_t j = r.u32();
  const std::uint32_t k = r.u32();
  const std::uint64_t section_seed = r.u64();
  const std::uint64_t bit_seed = r.u64();
  const std::uint64_t section_bits = r.u64();
  const std::uint64_t inserted_total = r.u64();
  if (j == 0 || section_bits == 0 || section_bits % 64 != 0 ||
      section_bits / 64 > (std::uint64_t(1) << 40) / std::max(1u, j)) {
    throw FormatError("archive: implausible filter geometry");
  }
  std::vector<std::uint32_t> section_n(j);
  for (auto& c : section_n) c = r.u32();
  std::vector<std::uint64_t> words(std::size_t(j) * (section_bits / 64));
  for (auto& w : words) w = r.u64();
  seg.msbf = MultiSectionBloomFilter::from_parts(j, section_bits, k, section_seed, bit_seed,
                                                 inserted_total, std::move(section_n),
                                                 std::move(words));

  const std::uint8_t codec = r.u8();
  if (codec > 2) throw FormatError("archive: unknown table codec");
  seg.table.codec = static_cast<TableCodec>(codec);
  seg.table.rows = r.u32();
  seg.table.columns = r.u32();
  const std::uint64_t comp_len = r.u64();
  const ByteView payload = r.take(comp_len);
  seg.table.payload.assign(payload.begin(), payload.end());

  seg.counters.raw_bytes = r.u64();
  seg.counters.packets = r.u64();
  seg.counters.blocks_total = r.u64();
  seg.counters.blocks_kept = r.u64();
  r.expect_end();
  return seg;
}

void write_archive(const std::vector<ArchiveSegment>& segments, const std::string& path) {
  Bytes header;
  wire::put_bytes(header, ByteView(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  wire::put_u16(header, kArchiveVersion);
  wire::put_u16(header, 0);  // reserved
  wire::put_u32(header, 0);  // flags (none defined in v1)
  wire::put_u32(header, static_cast<std::uint32_t>(segments.size()));

  std::vector<Bytes> bodies;
  bodies.reserve(segments.size());
  for (const ArchiveSegment& seg : segments) bodies.push_back(encode_segment(seg));

  Bytes directory;
  std::uint64_t offset = kHeaderSize + kDirEntrySize * segments.size();
  for (const Bytes& body : bodies) {
    wire::put_u64(directory, offset);
    wire::put_u64(directory, body.size());
    wire::put_u64(directory, keyed_hash64(body, kChecksumSeed));
    offset += body.size();
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("archive: cannot open " + tmp + " for writing");
    auto write_all = [&](const Bytes& b) {
      out.write(reinterpret_cast<const char*>(b.data()),
                static_cast<std::streamsize>(b.size()));
    };
    write_all(header);
    write_all(directory);
    for (const Bytes& body : bodies) write_all(body);
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("archive: write failed for " + path);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("archive: cannot rename into place: " + path);
  }
}

std::vector<ArchiveSegment> read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("archive: cannot open " + path);
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("archive: read failed for " + path);

  if (data.size() < kHeaderSize) throw FormatError("archive: file shorter than header");
  if (std::memcmp(data.data(), kMagic, 4) != 0) {
    throw FormatError("archive: bad magic (not a CBID file)");
  }
  wire::Reader hr(ByteView(data.data() + 4, kHeaderSize - 4), "archive header");
  const std::uint16_t version = hr.u16();
  if (version != kArchiveVersion) {
    throw FormatError("archive: unsupported format version " + std::to_string(version));
  }
  const std::uint16_t reserved = hr.u16();
  const std::uint32_t flags = hr.u32();
  if (reserved != 0 || flags != 0) {
    throw FormatError("archive: nonzero reserved/flags field in a v1 file");
  }
  const std::uint32_t count = hr.u32();

  const std::uint64_t dir_end = kHeaderSize + std::uint64_t(kDirEntrySize) * count;
  if (dir_end > data.size()) throw FormatError("archive: directory exceeds file size");

  std::vector<ArchiveSegment> segments;
  segments.reserve(count);
  std::uint64_t expect_offset = dir_end;
  for (std::uint32_t i = 0; i < count; ++i) {
    wire::Reader dr(ByteView(data.data() + kHeaderSize + kDirEntrySize * i, kDirEntrySize),
                    "archive directory");
    const std::uint64_t off = dr.u64();
    const std::uint64_t len = dr.u64();
    const std::uint64_t checksum = dr.u64();
    if (off != expect_offset) {
      throw FormatError("archive: segment " + std::to_string(i) + " offset out of place");
    }
    if (off + len > data.size()) {
      throw FormatError("archive: segment " + std::to_string(i) + " exceeds file size");
    }
    const ByteView body(data.data() + off, len);
    if (keyed_hash64(body, kChecksumSeed) != checksum) {
      throw FormatError("archive: checksum mismatch in segment " + std::to_string(i));
    }
    segments.push_back(decode_segment(body));
    expect_offset = off + len;
  }
  if (expect_offset != data.size()) {
    throw FormatError("archive: trailing bytes after last segment");
  }
  return segments;
}

}  // namespace cbid
