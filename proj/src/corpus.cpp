#include "cbid/corpus.hpp"

#include <cstring>
#include <fstream>

#include "cbid/errors.hpp"
#include "cbid/prng.hpp"
#include "wire.hpp"

namespace cbid {

namespace {
constexpr char kMagic[4] = {'C', 'B', 'T', 'R'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("corpus: cannot open " + path + " for writing");
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  Bytes buf;
  for (const PacketRecord& p : corpus.packets) {
    buf.clear();
    wire::put_bytes(buf, p.flow.serialize());
    wire::put_u32(buf, static_cast<std::uint32_t>(p.payload.size()));
    wire::put_bytes(buf, p.payload);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("corpus: write failed for " + path);
}

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("corpus: cannot open " + path);
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("corpus: read failed for " + path);
  if (data.size() < 5 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw FormatError("corpus: bad magic (not a CBTR file)");
  }
  if (data[4] != kVersion) {
    throw FormatError("corpus: unsupported version " + std::to_string(data[4]));
  }

  Corpus corpus;
  wire::Reader r(ByteView(data.data() + 5, data.size() - 5), "corpus");
  std::uint64_t ts = 1;
  while (r.remaining() > 0) {
    PacketRecord p;
    const std::uint8_t version = r.u8();
    const std::size_t key_len = version == 4 ? kFlowKeyV4Size : kFlowKeyV6Size;
    Bytes key_bytes;
    key_bytes.push_back(version);
    const ByteView rest = r.take(key_len - 1);
    key_bytes.insert(key_bytes.end(), rest.begin(), rest.end());
    p.flow = FlowKey::deserialize(key_bytes);
    const std::uint32_t len = r.u32();
    const ByteView payload = r.take(len);
    p.payload.assign(payload.begin(), payload.end());
    p.timestamp_us = ts;
    ts += 20;
    corpus.total_payload_bytes += len;
    corpus.packets.push_back(std::move(p));
  }
  return corpus;
}

bool looks_like_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[4] = {};
  in.read(magic, 4);
  return in && std::memcmp(magic, kMagic, 4) == 0;
}

std::uint64_t count_occurrences(const Corpus& corpus, ByteView needle, std::uint64_t limit) {
  if (needle.empty()) return limit;
  std::uint64_t n = 0;
  for (const PacketRecord& p : corpus.packets) {
    if (p.payload.size() < needle.size()) continue;
    const std::uint8_t* base = p.payload.data();
    std::size_t remain = p.payload.size();
    while (remain >= needle.size()) {
      const void* hit = memmem(base, remain, needle.data(), needle.size());
      if (!hit) break;
      if (++n >= limit) return n;
      const auto* h = static_cast<const std::uint8_t*>(hit);
      remain -= static_cast<std::size_t>(h - base) + 1;
      base = h + 1;
    }
  }
  return n;
}

ExcerptExtraction extract_unique_excerpts(const Corpus& corpus, std::uint32_t length,
                                          std::uint32_t count, std::uint64_t seed) {
  if (length < 1) throw ConfigError("excerpts: length must be >= 1");
  ExcerptExtraction out;

  // Cumulative count of candidate start positions, for uniform draws.
  std::vector<std::uint64_t> cum;
  cum.reserve(corpus.packets.size() + 1);
  cum.push_back(0);
  for (const PacketRecord& p : corpus.packets) {
    const std::uint64_t starts =
        p.payload.size() >= length ? p.payload.size() - length + 1 : 0;
    cum.push_back(cum.back() + starts);
  }
  const std::uint64_t total = cum.back();
  if (total == 0) {
    out.shortfall = count;
    return out;
  }

  Prng rng(derive_seed(seed, 0xecce5));
  std::vector<Bytes> chosen;
  const std::uint64_t max_attempts = std::uint64_t(count) * 64 + 256;
  for (std::uint64_t attempt = 0;
       attempt < max_attempts && out.excerpts.size() < count; ++attempt) {
    const std::uint64_t pos = rng.next_below(total);
    const auto it = std::upper_bound(cum.begin(), cum.end(), pos);
    const std::size_t pkt_idx = static_cast<std::size_t>(it - cum.begin()) - 1;
    const std::uint64_t off = pos - cum[pkt_idx];
    const PacketRecord& pkt = corpus.packets[pkt_idx];
    Bytes candidate(pkt.payload.begin() + static_cast<std::ptrdiff_t>(off),
                    pkt.payload.begin() + static_cast<std::ptrdiff_t>(off + length));
    bool dup = false;
    for (const Bytes& c : chosen) {
      if (c == candidate) {
        dup = true;
        break;
      }
    }
    if (dup) continue;
    if (count_occurrences(corpus, candidate, 2) != 1) continue;
    chosen.push_back(candidate);
    out.excerpts.push_back(LabeledExcerpt{std::move(candidate), pkt.flow});
  }
  out.shortfall = count - static_cast<std::uint32_t>(out.excerpts.size());
  return out;
}

}  // namespace cbid
