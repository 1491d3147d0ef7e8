#pragma once

#include <string>
#include <vector>

#include "cbid/bytes.hpp"
#include "cbid/digest.hpp"

namespace cbid {

// `CBID` archive container: header, segment directory with per-segment 64-bit
// checksums, then segment bodies. Little-endian throughout; encoding is a pure
// function of the segment contents. The full byte layout is documented in the
// project README.
inline constexpr std::uint16_t kArchiveVersion = 1;

Bytes encode_segment(const ArchiveSegment& seg);
ArchiveSegment decode_segment(ByteView body);

// Deterministic: identical segments produce identical file bytes. A partial
// file is removed if writing fails.
void write_archive(const std::vector<ArchiveSegment>& segments, const std::string& path);

// Validates magic, version, directory geometry and every segment checksum.
// Index tables stay compressed until a query first touches them.
std::vector<ArchiveSegment> read_archive(const std::string& path);

}  // namespace cbid
