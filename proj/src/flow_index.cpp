#include "cbid/flow_index.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "cbid/errors.hpp"

#include <lzma.h>
#include <zlib.h>

namespace cbid {

std::uint32_t FlowList::register_flow(const FlowKey& flow) {
  auto it = index_.find(flow);
  if (it != index_.end()) return it->second;
  const auto row = static_cast<std::uint32_t>(flows_.size());
  flows_.push_back(flow);
  index_.emplace(flow, row);
  return row;
}

std::optional<std::uint32_t> FlowList::row_of(const FlowKey& flow) const {
  auto it = index_.find(flow);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t BitmapIndexTable::add_row() {
  bits_.resize(bits_.size() + row_stride(), 0);
  return rows_++;
}

void BitmapIndexTable::set(std::uint32_t row, std::uint32_t column) {
  if (row >= rows_ || column >= columns_) {
    throw std::logic_error("index table: bit (" + std::to_string(row) + ", " +
                           std::to_string(column) + ") out of range");
  }
  bits_[std::size_t(row) * row_stride() + column / 8] |=
      static_cast<std::uint8_t>(1u << (column % 8));
}

bool BitmapIndexTable::get(std::uint32_t row, std::uint32_t column) const {
  if (row >= rows_ || column >= columns_) {
    throw std::logic_error("index table: bit out of range");
  }
  return bits_[std::size_t(row) * row_stride() + column / 8] & (1u << (column % 8));
}

std::uint64_t BitmapIndexTable::ones() const {
  std::uint64_t n = 0;
  for (std::uint8_t b : bits_) n += std::popcount(b);
  return n;
}

double BitmapIndexTable::ones_fraction() const {
  const std::uint64_t total = std::uint64_t(rows_) * columns_;
  return total == 0 ? 0.0 : static_cast<double>(ones()) / static_cast<double>(total);
}

std::vector<std::uint32_t> BitmapIndexTable::candidate_rows(
    const std::vector<std::uint32_t>& sections) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t c : sections) {
    if (c >= columns_) throw std::logic_error("index table: section out of range");
  }
  for (std::uint32_t r = 0; r < rows_; ++r) {
    bool all = true;
    const std::uint8_t* row = bits_.data() + std::size_t(r) * row_stride();
    for (std::uint32_t c : sections) {
      if (!(row[c / 8] & (1u << (c % 8)))) {
        all = false;
        break;
      }
    }
    if (all) out.push_back(r);
  }
  return out;
}

BitmapIndexTable BitmapIndexTable::from_raw(std::uint32_t rows, std::uint32_t columns,
                                            Bytes bits) {
  BitmapIndexTable t(columns);
  if (bits.size() != std::size_t(rows) * t.row_stride()) {
    throw FormatError("index table: raw size mismatch");
  }
  t.rows_ = rows;
  t.bits_ = std::move(bits);
  return t;
}

std::vector<FlowKey> candidate_flows(const BitmapIndexTable& table, const FlowList& list,
                                     const std::vector<std::uint32_t>& sections) {
  std::vector<FlowKey> out;
  for (std::uint32_t row : table.candidate_rows(sections)) {
    out.push_back(list.flow_at(row));
  }
  return out;
}

namespace {

Bytes lzma_compress(ByteView raw) {
  const std::size_t bound = lzma_stream_buffer_bound(raw.size());
  Bytes out(bound);
  std::size_t out_pos = 0;
  // Preset 2: index tables are dominated by zero runs, higher presets only
  // cost digesting time.
  const lzma_ret rc =
      lzma_easy_buffer_encode(2, LZMA_CHECK_CRC64, nullptr, raw.data(), raw.size(),
                              out.data(), &out_pos, out.size());
  if (rc != LZMA_OK) throw FormatError("lzma encode failed, rc=" + std::to_string(rc));
  out.resize(out_pos);
  return out;
}

Bytes lzma_decompress(ByteView comp, std::size_t raw_size) {
  Bytes out(raw_size);
  std::uint64_t memlimit = std::numeric_limits<std::uint64_t>::max();
  std::size_t in_pos = 0, out_pos = 0;
  const lzma_ret rc = lzma_stream_buffer_decode(&memlimit, 0, nullptr, comp.data(), &in_pos,
                                                comp.size(), out.data(), &out_pos, out.size());
  if (rc != LZMA_OK || out_pos != raw_size) {
    throw FormatError("lzma decode failed");
  }
  return out;
}

Bytes deflate_compress(ByteView raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  Bytes out(bound);
  const int rc = compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6);
  if (rc != Z_OK) throw FormatError("deflate encode failed");
  out.resize(bound);
  return out;
}

Bytes deflate_decompress(ByteView comp, std::size_t raw_size) {
  Bytes out(raw_size);
  uLongf out_len = static_cast<uLongf>(raw_size);
  const int rc = uncompress(out.data(), &out_len, comp.data(), static_cast<uLong>(comp.size()));
  if (rc != Z_OK || out_len != raw_size) throw FormatError("deflate decode failed");
  return out;
}

}  // namespace

CompressedTable compress_table(const BitmapIndexTable& table, TableCodec codec) {
  CompressedTable ct;
  ct.codec = codec;
  ct.rows = table.rows();
  ct.columns = table.columns();
  switch (codec) {
    case TableCodec::none:
      ct.payload = table.raw();
      break;
    case TableCodec::lzma:
      ct.payload = lzma_compress(table.raw());
      break;
    case TableCodec::deflate:
      ct.payload = deflate_compress(table.raw());
      break;
  }
  return ct;
}

BitmapIndexTable decompress_table(const CompressedTable& ct) {
  Bytes raw;
  switch (ct.codec) {
    case TableCodec::none:
      raw = ct.payload;
      break;
    case TableCodec::lzma:
      raw = lzma_decompress(ct.payload, ct.raw_size());
      break;
    case TableCodec::deflate:
      raw = deflate_decompress(ct.payload, ct.raw_size());
      break;
    default:
      throw FormatError("unknown table codec id " +
                        std::to_string(static_cast<int>(ct.codec)));
  }
  return BitmapIndexTable::from_raw(ct.rows, ct.columns, std::move(raw));
}

TableStats table_stats(const BitmapIndexTable& table, std::uint32_t symbol_size) {
  if (symbol_size < 1) throw ConfigError("table_stats: symbol_size must be >= 1");
  const Bytes& raw = table.raw();
  if (raw.size() < symbol_size) {
    throw ConfigError("table_stats: table smaller than one symbol");
  }
  TableStats st;
  st.ones_fraction = table.ones_fraction();

  std::unordered_map<std::string, std::uint64_t> freq;
  const std::size_t n_symbols = raw.size() / symbol_size;
  for (std::size_t i = 0; i < n_symbols; ++i) {
    freq[std::string(reinterpret_cast<const char*>(raw.data()) + i * symbol_size,
                     symbol_size)]++;
  }
  double h = 0.0;
  for (const auto& [sym, count] : freq) {
    const double p = static_cast<double>(count) / static_cast<double>(n_symbols);
    h -= p * std::log2(p);
  }
  st.entropy_bits = h;
  st.best_theoretical_ratio =
      h > 0.0 ? (8.0 * symbol_size) / h : std::numeric_limits<double>::infinity();
  return st;
}

}  // namespace cbid
