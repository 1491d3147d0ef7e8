#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "cbid/bytes.hpp"
#include "cbid/flow.hpp"

namespace cbid {

// Per-interval flow list: dense row ids in first-seen order.
class FlowList {
 public:
  std::uint32_t register_flow(const FlowKey& flow);  // idempotent
  std::optional<std::uint32_t> row_of(const FlowKey& flow) const;
  const FlowKey& flow_at(std::uint32_t row) const { return flows_.at(row); }
  std::uint32_t size() const { return static_cast<std::uint32_t>(flows_.size()); }
  const std::vector<FlowKey>& flows() const { return flows_; }

  bool operator==(const FlowList& other) const { return flows_ == other.flows_; }

 private:
  std::vector<FlowKey> flows_;
  std::unordered_map<FlowKey, std::uint32_t, FlowKeyHash> index_;
};

// rows x columns bit matrix, row-major, each row padded to a byte boundary.
// Bit (r, c) records that some kept type-I block of flow r went to section c.
class BitmapIndexTable {
 public:
  BitmapIndexTable() = default;
  explicit BitmapIndexTable(std::uint32_t columns) : columns_(columns) {}

  std::uint32_t add_row();  // returns new row id, all bits zero
  void set(std::uint32_t row, std::uint32_t column);
  bool get(std::uint32_t row, std::uint32_t column) const;

  std::uint32_t rows() const { return rows_; }
  std::uint32_t columns() const { return columns_; }
  std::size_t row_stride() const { return (columns_ + 7) / 8; }
  const Bytes& raw() const { return bits_; }
  std::uint64_t ones() const;
  double ones_fraction() const;

  // Rows having a 1 in every listed column. An empty section set returns
  // every row: with no evidence to prune on, candidates must stay complete.
  std::vector<std::uint32_t> candidate_rows(const std::vector<std::uint32_t>& sections) const;

  static BitmapIndexTable from_raw(std::uint32_t rows, std::uint32_t columns, Bytes bits);

  bool operator==(const BitmapIndexTable&) const = default;

 private:
  std::uint32_t rows_ = 0;
  std::uint32_t columns_ = 0;
  Bytes bits_;
};

std::vector<FlowKey> candidate_flows(const BitmapIndexTable& table, const FlowList& list,
                                     const std::vector<std::uint32_t>& sections);

enum class TableCodec : std::uint8_t { none = 0, lzma = 1, deflate = 2 };

struct CompressedTable {
  TableCodec codec = TableCodec::lzma;
  std::uint32_t rows = 0;
  std::uint32_t columns = 0;
  Bytes payload;

  std::size_t raw_size() const { return std::size_t(rows) * ((columns + 7) / 8); }

  bool operator==(const CompressedTable&) const = default;
};

CompressedTable compress_table(const BitmapIndexTable& table,
                               TableCodec codec = TableCodec::lzma);
BitmapIndexTable decompress_table(const CompressedTable& ct);

struct TableStats {
  double ones_fraction = 0.0;
  double entropy_bits = 0.0;           // empirical Shannon entropy per symbol
  double best_theoretical_ratio = 0.0;  // 8*symbol_size / entropy_bits
};

// Entropy of the raw table bytes read as consecutive symbol_size-byte symbols.
TableStats table_stats(const BitmapIndexTable& table, std::uint32_t symbol_size);

}  // namespace cbid
