#pragma once

// Little-endian wire helpers shared by the archive and corpus codecs.

#include <cstdint>
#include <string>

#include "cbid/bytes.hpp"
#include "cbid/errors.hpp"

namespace cbid::wire {

inline void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

inline void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_bytes(Bytes& out, ByteView v) { out.insert(out.end(), v.begin(), v.end()); }

inline void put_string(Bytes& out, const std::string& s) {
  if (s.size() > 0xffff) throw FormatError("wire: string too long");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(ByteView data, std::string what) : data_(data), what_(std::move(what)) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
  }
  std::string str() {
    const std::uint16_t n = u16();
    auto b = take(n);
    return std::string(b.begin(), b.end());
  }
  ByteView take(std::size_t n) {
    if (off_ + n > data_.size()) throw FormatError(what_ + ": truncated");
    ByteView v = data_.subspan(off_, n);
    off_ += n;
    return v;
  }
  std::size_t remaining() const { return data_.size() - off_; }
  void expect_end() const {
    if (off_ != data_.size()) throw FormatError(what_ + ": trailing bytes");
  }

 private:
  ByteView data_;
  std::size_t off_ = 0;
  std::string what_;
};

}  // namespace cbid::wire
