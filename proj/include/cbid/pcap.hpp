#pragma once

#include <cstdint>
#include <string>

#include "cbid/synth.hpp"

namespace cbid {

struct CaptureStats {
  std::uint64_t packets = 0;           // TCP/UDP packets yielded
  std::uint64_t skipped_non_tcpudp = 0;
  std::uint64_t malformed = 0;         // truncated or undecodable packets
};

// Reads a classic pcap or a pcapng capture and extracts TCP/UDP transport
// payloads (which may be empty). Everything else is skipped and counted.
// Supported link types: Ethernet (optionally VLAN-tagged) and raw IP.
Corpus read_capture(const std::string& path, CaptureStats* stats = nullptr);

bool looks_like_capture(const std::string& path);

}  // namespace cbid
