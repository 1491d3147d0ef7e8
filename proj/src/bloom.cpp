#include "cbid/bloom.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "cbid/errors.hpp"
#include "cbid/hash.hpp"

namespace cbid {

double expected_fp(double m_bits, double n_inserted, double k_hashes) {
  if (m_bits < 1 || k_hashes < 1 || n_inserted < 0) {
    throw ConfigError("expected_fp: need m >= 1, k >= 1, n >= 0");
  }
  if (n_inserted == 0) return 0.0;
  if (m_bits == 1) return 1.0;
  // (1 - 1/m)^(kn) via exp/log1p to stay accurate for large m.
  const double zero_frac = std::exp(k_hashes * n_inserted * std::log1p(-1.0 / m_bits));
  return std::pow(1.0 - zero_frac, k_hashes);
}

BloomFilter::BloomFilter(std::uint64_t m_bits, std::uint32_t k_hashes, std::uint64_t seed)
    : m_bits_(m_bits), k_(k_hashes), seed_(seed) {
  if (m_bits_ < 1) throw ConfigError("bloom: m must be >= 1");
  if (k_ < 1) throw ConfigError("bloom: k must be >= 1");
  words_.assign((m_bits_ + 63) / 64, 0);
}

void BloomFilter::insert(ByteView element) {
  const Hash128 h = keyed_hash(element, seed_);
  std::uint64_t idx = h.lo % m_bits_;
  const std::uint64_t step = h.hi % m_bits_;
  for (std::uint32_t i = 0; i < k_; ++i) {
    words_[idx >> 6] |= 1ULL << (idx & 63);
    idx += step;
    if (idx >= m_bits_) idx -= m_bits_;
  }
  ++inserted_n_;
}

bool BloomFilter::query(ByteView element) const {
  const Hash128 h = keyed_hash(element, seed_);
  std::uint64_t idx = h.lo % m_bits_;
  const std::uint64_t step = h.hi % m_bits_;
  for (std::uint32_t i = 0; i < k_; ++i) {
    if (!(words_[idx >> 6] & (1ULL << (idx & 63)))) return false;
    idx += step;
    if (idx >= m_bits_) idx -= m_bits_;
  }
  return true;
}

std::uint64_t BloomFilter::popcount() const {
  std::uint64_t n = 0;
  for (std::uint64_t w : words_) n += std::popcount(w);
  return n;
}

namespace {
void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint32_t get_u32(ByteView in, std::size_t& off) {
  if (off + 4 > in.size()) throw FormatError("bloom: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[off + i]) << (8 * i);
  off += 4;
  return v;
}
std::uint64_t get_u64(ByteView in, std::size_t& off) {
  if (off + 8 > in.size()) throw FormatError("bloom: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(in[off + i]) << (8 * i);
  off += 8;
  return v;
}
}  // namespace

Bytes BloomFilter::serialize() const {
  Bytes out;
  put_u64(out, m_bits_);
  put_u32(out, k_);
  put_u64(out, seed_);
  put_u64(out, inserted_n_);
  put_u64(out, words_.size());
  for (std::uint64_t w : words_) put_u64(out, w);
  return out;
}

BloomFilter BloomFilter::deserialize(ByteView data) {
  std::size_t off = 0;
  const std::uint64_t m = get_u64(data, off);
  const std::uint32_t k = get_u32(data, off);
  const std::uint64_t seed = get_u64(data, off);
  const std::uint64_t n = get_u64(data, off);
  const std::uint64_t nwords = get_u64(data, off);
  BloomFilter f(m, k, seed);
  if (nwords != f.words_.size()) throw FormatError("bloom: word count mismatch");
  for (auto& w : f.words_) w = get_u64(data, off);
  f.inserted_n_ = n;
  return f;
}

MultiSectionBloomFilter::MultiSectionBloomFilter(std::uint64_t total_m_bits,
                                                 std::uint32_t sections_j,
                                                 std::uint32_t k_hashes,
                                                 std::uint64_t section_seed,
                                                 std::uint64_t bit_seed)
    : j_(sections_j), k_(k_hashes), section_seed_(section_seed), bit_seed_(bit_seed) {
  if (j_ < 1) throw ConfigError("msbf: j must be >= 1");
  if (k_ < 1) throw ConfigError("msbf: k must be >= 1");
  section_bits_ = (total_m_bits / j_) / 64 * 64;
  if (section_bits_ == 0) {
    throw ConfigError("msbf: total size too small for " + std::to_string(j_) + " sections");
  }
  section_n_.assign(j_, 0);
  words_.assign(j_ * (section_bits_ / 64), 0);
}

MultiSectionBloomFilter::Probe MultiSectionBloomFilter::prepare(ByteView element) const {
  const std::uint64_t sh = keyed_hash64(element, section_seed_);
  const Hash128 bh = keyed_hash(element, bit_seed_);
  return Probe{static_cast<std::uint32_t>(sh % j_), bh.lo, bh.hi};
}

std::uint32_t MultiSectionBloomFilter::section_of(ByteView element) const {
  return static_cast<std::uint32_t>(keyed_hash64(element, section_seed_) % j_);
}

void MultiSectionBloomFilter::insert_prepared(const Probe& p) {
  const std::uint64_t base = std::uint64_t(p.section) * (section_bits_ / 64);
  std::uint64_t idx = p.h1 % section_bits_;
  const std::uint64_t step = p.h2 % section_bits_;
  for (std::uint32_t i = 0; i < k_; ++i) {
    words_[base + (idx >> 6)] |= 1ULL << (idx & 63);
    idx += step;
    if (idx >= section_bits_) idx -= section_bits_;
  }
  max_section_n_ = std::max(max_section_n_, ++section_n_[p.section]);
  ++inserted_total_;
}

bool MultiSectionBloomFilter::query_prepared(const Probe& p) const {
  const std::uint64_t base = std::uint64_t(p.section) * (section_bits_ / 64);
  std::uint64_t idx = p.h1 % section_bits_;
  const std::uint64_t step = p.h2 % section_bits_;
  for (std::uint32_t i = 0; i < k_; ++i) {
    if (!(words_[base + (idx >> 6)] & (1ULL << (idx & 63)))) return false;
    idx += step;
    if (idx >= section_bits_) idx -= section_bits_;
  }
  return true;
}

std::uint32_t MultiSectionBloomFilter::insert(ByteView element) {
  const Probe p = prepare(element);
  insert_prepared(p);
  return p.section;
}

std::optional<std::uint32_t> MultiSectionBloomFilter::query(ByteView element) const {
  const Probe p = prepare(element);
  if (!query_prepared(p)) return std::nullopt;
  return p.section;
}


std::uint64_t MultiSectionBloomFilter::popcount() const {
  std::uint64_t n = 0;
  for (std::uint64_t w : words_) n += std::popcount(w);
  return n;
}

MultiSectionBloomFilter MultiSectionBloomFilter::from_parts(
    std::uint32_t j, std::uint64_t section_bits, std::uint32_t k, std::uint64_t section_seed,
    std::uint64_t bit_seed, std::uint64_t inserted_total, std::vector<std::uint32_t> section_n,
    std::vector<std::uint64_t> words) {
  if (j < 1 || k < 1 || section_bits == 0 || section_bits % 64 != 0) {
    throw FormatError("msbf: bad geometry");
  }
  if (section_n.size() != j || words.size() != j * (section_bits / 64)) {
    throw FormatError("msbf: size mismatch");
  }
  MultiSectionBloomFilter f;
  f.j_ = j;
  f.section_bits_ = section_bits;
  f.k_ = k;
  f.section_seed_ = section_seed;
  f.bit_seed_ = bit_seed;
  f.inserted_total_ = inserted_total;
  f.section_n_ = std::move(section_n);
  f.words_ = std::move(words);
  for (std::uint32_t n : f.section_n_) f.max_section_n_ = std::max(f.max_section_n_, n);
  return f;
}

}  // namespace cbid
