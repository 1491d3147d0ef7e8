#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>

#include "cbid/bytes.hpp"

namespace cbid {

enum class IpProto : std::uint8_t { tcp = 6, udp = 17 };

// Unidirectional transport 5-tuple. Addresses are stored in network byte
// order; IPv4 uses the first 4 bytes of `addr`, IPv6 all 16.
struct FlowKey {
  std::uint8_t version = 4;  // 4 or 6
  std::array<std::uint8_t, 16> src_addr{};
  std::array<std::uint8_t, 16> dst_addr{};
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  IpProto protocol = IpProto::tcp;

  auto operator<=>(const FlowKey&) const = default;

  // Canonical byte form: `version | src | dst | src_port | dst_port | proto`,
  // ports little-endian. Fixed length per address version (14 bytes for v4,
  // 38 for v6); equal keys serialize identically.
  Bytes serialize() const;
  static FlowKey deserialize(ByteView data);  // throws FormatError

  // Fixed-width 38-byte record used in archive flow lists (v4 zero-padded).
  std::array<std::uint8_t, 38> wide_record() const;
  static FlowKey from_wide_record(ByteView rec);

  std::string to_string() const;
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const;
};

struct PacketRecord {
  FlowKey flow;
  Bytes payload;                  // transport payload only, may be empty
  std::uint64_t timestamp_us = 0;
};

inline constexpr std::size_t kFlowKeyV4Size = 14;
inline constexpr std::size_t kFlowKeyV6Size = 38;

}  // namespace cbid
