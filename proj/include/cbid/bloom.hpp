#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cbid/bytes.hpp"

namespace cbid {

// Expected false-positive probability of an m-bit Bloom filter with k hash
// functions after n insertions: (1 - (1 - 1/m)^(kn))^k, exact form.
double expected_fp(double m_bits, double n_inserted, double k_hashes);

// Conventional Bloom filter. Element bits are derived from one keyed 128-bit
// digest via double hashing: index_i = (h_lo + i*h_hi) mod m.
class BloomFilter {
 public:
  BloomFilter() = default;
  BloomFilter(std::uint64_t m_bits, std::uint32_t k_hashes, std::uint64_t seed);

  void insert(ByteView element);
  bool query(ByteView element) const;

  std::uint64_t bit_count() const { return m_bits_; }
  std::uint32_t hash_count() const { return k_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t inserted_n() const { return inserted_n_; }
  std::uint64_t popcount() const;
  std::uint64_t byte_size() const { return words_.size() * 8; }

  Bytes serialize() const;
  static BloomFilter deserialize(ByteView data);

  bool operator==(const BloomFilter&) const = default;

 private:
  std::uint64_t m_bits_ = 0;
  std::uint32_t k_ = 0;
  std::uint64_t seed_ = 0;
  std::uint64_t inserted_n_ = 0;
  std::vector<std::uint64_t> words_;
};

// Multi-section Bloom filter: j equal sub-filters over one bit array. One
// extra hash picks the section, k hashes probe inside it. The section index
// is the feature consumed by the bitmap index table.
class MultiSectionBloomFilter {
 public:
  MultiSectionBloomFilter() = default;
  // total_m_bits is split evenly; the per-section size is rounded down to a
  // multiple of 64 bits and the remainder is unused.
  MultiSectionBloomFilter(std::uint64_t total_m_bits, std::uint32_t sections_j,
                          std::uint32_t k_hashes, std::uint64_t section_seed,
                          std::uint64_t bit_seed);

  std::uint32_t section_of(ByteView element) const;
  std::uint32_t insert(ByteView element);               // returns the section used
  std::optional<std::uint32_t> query(ByteView element) const;

  // Precomputed probe, for pipelines that hash out-of-band (batch digesting).
  // insert(e) and insert_prepared(prepare(e)) set identical bits.
  struct Probe {
    std::uint32_t section;
    std::uint64_t h1, h2;
  };
  Probe prepare(ByteView element) const;
  void insert_prepared(const Probe& p);
  bool query_prepared(const Probe& p) const;

  std::uint32_t sections() const { return j_; }
  std::uint64_t section_bits() const { return section_bits_; }
  std::uint64_t total_bits() const { return section_bits_ * j_; }
  std::uint32_t hash_count() const { return k_; }
  std::uint64_t section_seed() const { return section_seed_; }
  std::uint64_t bit_seed() const { return bit_seed_; }
  std::uint64_t inserted_total() const { return inserted_total_; }
  std::uint32_t section_n(std::uint32_t s) const { return section_n_[s]; }
  std::uint32_t max_section_n() const { return max_section_n_; }
  std::uint64_t byte_size() const { return words_.size() * 8; }
  std::uint64_t popcount() const;

  // Raw accessors for the archive codec.
  const std::vector<std::uint64_t>& words() const { return words_; }
  const std::vector<std::uint32_t>& section_counts() const { return section_n_; }
  static MultiSectionBloomFilter from_parts(std::uint32_t j, std::uint64_t section_bits,
                                            std::uint32_t k, std::uint64_t section_seed,
                                            std::uint64_t bit_seed, std::uint64_t inserted_total,
                                            std::vector<std::uint32_t> section_n,
                                            std::vector<std::uint64_t> words);

  bool operator==(const MultiSectionBloomFilter&) const = default;

 private:
  std::uint32_t j_ = 0;
  std::uint64_t section_bits_ = 0;
  std::uint32_t k_ = 0;
  std::uint64_t section_seed_ = 0;
  std::uint64_t bit_seed_ = 0;
  std::uint64_t inserted_total_ = 0;
  std::uint32_t max_section_n_ = 0;
  std::vector<std::uint32_t> section_n_;
  std::vector<std::uint64_t> words_;
};

}  // namespace cbid
