#include "cbid/pcap.hpp"

#include <cstring>
#include <fstream>

#include "cbid/errors.hpp"

namespace cbid {

namespace {

constexpr std::uint32_t kPcapMagicLe = 0xa1b2c3d4;      // usec, written LE
constexpr std::uint32_t kPcapMagicBe = 0xd4c3b2a1;      // usec, opposite order
constexpr std::uint32_t kPcapMagicNsLe = 0xa1b23c4d;    // nsec
constexpr std::uint32_t kPcapMagicNsBe = 0x4d3cb2a1;
constexpr std::uint32_t kPcapngShb = 0x0a0d0d0a;
constexpr std::uint32_t kByteOrderMagic = 0x1a2b3c4d;

constexpr std::uint16_t kLinkEthernet = 1;
constexpr std::uint16_t kLinkRawIp = 101;

struct Cursor {
  const std::uint8_t* p;
  std::size_t n;
  bool swap;  // capture byte order differs from little-endian

  bool need(std::size_t k) const { return n >= k; }
  std::uint16_t u16_at(std::size_t off) const {
    std::uint16_t v;
    std::memcpy(&v, p + off, 2);
    if (swap) v = __builtin_bswap16(v);
    return v;
  }
  std::uint32_t u32_at(std::size_t off) const {
    std::uint32_t v;
    std::memcpy(&v, p + off, 4);
    if (swap) v = __builtin_bswap32(v);
    return v;
  }
};

inline std::uint16_t be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

struct Decoded {
  bool ok = false;
  bool transport = false;  // true when TCP/UDP with an intact header
  FlowKey flow;
  const std::uint8_t* payload = nullptr;
  std::size_t payload_len = 0;
};

// IPv4/IPv6 + TCP/UDP decode; foreign protocols flagged as !transport.
Decoded decode_ip(const std::uint8_t* p, std::size_t n, bool v6_expected);

Decoded decode_l4(const std::uint8_t* p, std::size_t n, FlowKey flow, std::uint8_t proto) {
  Decoded d;
  if (proto == 6) {  // TCP
    if (n < 20) return d;
    const std::size_t hdr = std::size_t(p[12] >> 4) * 4;
    if (hdr < 20 || hdr > n) return d;
    flow.src_port = be16(p);
    flow.dst_port = be16(p + 2);
    flow.protocol = IpProto::tcp;
    d.ok = d.transport = true;
    d.flow = flow;
    d.payload = p + hdr;
    d.payload_len = n - hdr;
    return d;
  }
  if (proto == 17) {  // UDP
    if (n < 8) return d;
    flow.src_port = be16(p);
    flow.dst_port = be16(p + 2);
    flow.protocol = IpProto::udp;
    const std::size_t ulen = be16(p + 4);
    if (ulen < 8 || ulen > n) return d;
    d.ok = d.transport = true;
    d.flow = flow;
    d.payload = p + 8;
    d.payload_len = ulen - 8;
    return d;
  }
  d.ok = true;  // decodable, just not TCP/UDP
  return d;
}

Decoded decode_ipv4(const std::uint8_t* p, std::size_t n) {
  Decoded d;
  if (n < 20) return d;
  if ((p[0] >> 4) != 4) return d;
  const std::size_t ihl = std::size_t(p[0] & 0xf) * 4;
  if (ihl < 20 || ihl > n) return d;
  const std::size_t total = be16(p + 2);
  if (total < ihl || total > n) return d;
  const std::uint16_t frag = be16(p + 6);
  if ((frag & 0x1fff) != 0) {  // non-initial fragment: no transport header
    d.ok = true;
    return d;
  }
  FlowKey flow;
  flow.version = 4;
  std::memcpy(flow.src_addr.data(), p + 12, 4);
  std::memcpy(flow.dst_addr.data(), p + 16, 4);
  return decode_l4(p + ihl, total - ihl, flow, p[9]);
}

Decoded decode_ipv6(const std::uint8_t* p, std::size_t n) {
  Decoded d;
  if (n < 40) return d;
  if ((p[0] >> 4) != 6) return d;
  const std::size_t plen = be16(p + 4);
  if (40 + plen > n) return d;
  FlowKey flow;
  flow.version = 6;
  std::memcpy(flow.src_addr.data(), p + 8, 16);
  std::memcpy(flow.dst_addr.data(), p + 24, 16);

  std::uint8_t next = p[6];
  std::size_t off = 40;
  const std::size_t end = 40 + plen;
  // Walk the common extension header chain.
  for (int hops = 0; hops < 8; ++hops) {
    if (next == 6 || next == 17) {
      return decode_l4(p + off, end - off, flow, next);
    }
    if (next == 0 || next == 43 || next == 60) {  // hop-by-hop, routing, dest opts
      if (off + 8 > end) return d;
      const std::size_t ext = 8 + std::size_t(p[off + 1]) * 8;
      if (off + ext > end) return d;
      next = p[off];
      off += ext;
      continue;
    }
    if (next == 44) {  // fragment header: only the first fragment caries L4
      if (off + 8 > end) return d;
      const std::uint16_t frag_off = be16(p + off + 2) & 0xfff8;
      if (frag_off != 0) {
        d.ok = true;
        return d;
      }
      next = p[off];
      off += 8;
      continue;
    }
    d.ok = true;  // some other protocol
    return d;
  }
  return d;
}

Decoded decode_ip(const std::uint8_t* p, std::size_t n, bool /*unused*/) {
  if (n >= 1 && (p[0] >> 4) == 4) return decode_ipv4(p, n);
  if (n >= 1 && (p[0] >> 4) == 6) return decode_ipv6(p, n);
  return {};
}

Decoded decode_frame(const std::uint8_t* p, std::size_t n, std::uint16_t linktype) {
  if (linktype == kLinkRawIp) return decode_ip(p, n, false);
  if (linktype != kLinkEthernet) return {};
  if (n < 14) return {};
  std::size_t off = 12;
  std::uint16_t ether = be16(p + off);
  off += 2;
  while (ether == 0x8100 || ether == 0x88a8) {  // VLAN tags
    if (off + 4 > n) return {};
    ether = be16(p + off + 2);
    off += 4;
  }
  if (ether == 0x0800) return decode_ipv4(p + off, n - off);
  if (ether == 0x86dd) return decode_ipv6(p + off, n - off);
  Decoded d;
  d.ok = true;  // ARP and friends
  return d;
}

void account(Corpus& corpus, CaptureStats& stats, const Decoded& d, std::uint64_t ts_us) {
  if (!d.ok) {
    ++stats.malformed;
    return;
  }
  if (!d.transport) {
    ++stats.skipped_non_tcpudp;
    return;
  }
  PacketRecord rec;
  rec.flow = d.flow;
  rec.timestamp_us = ts_us;
  rec.payload.assign(d.payload, d.payload + d.payload_len);
  corpus.total_payload_bytes += rec.payload.size();
  corpus.packets.push_back(std::move(rec));
  ++stats.packets;
}

Corpus read_classic_pcap(const Bytes& data, CaptureStats& stats) {
  Cursor file{data.data(), data.size(), false};
  const std::uint32_t magic = file.u32_at(0);
  bool swap = false, nsec = false;
  switch (magic) {
    case kPcapMagicLe: break;
    case kPcapMagicNsLe: nsec = true; break;
    case kPcapMagicBe: swap = true; break;
    case kPcapMagicNsBe: swap = true; nsec = true; break;
    default: throw FormatError("pcap: unrecognized magic");
  }
  file.swap = swap;
  if (data.size() < 24) throw FormatError("pcap: truncated global header");
  const std::uint16_t linktype = static_cast<std::uint16_t>(file.u32_at(20));

  Corpus corpus;
  std::size_t off = 24;
  while (off + 16 <= data.size()) {
    Cursor rec{data.data() + off, 16, swap};
    const std::uint32_t ts_sec = rec.u32_at(0);
    const std::uint32_t ts_frac = rec.u32_at(4);
    const std::uint32_t incl = rec.u32_at(8);
    off += 16;
    if (off + incl > data.size()) {
      ++stats.malformed;  // truncated final record
      break;
    }
    const std::uint64_t ts_us =
        std::uint64_t(ts_sec) * 1'000'000 + (nsec ? ts_frac / 1000 : ts_frac);
    account(corpus, stats, decode_frame(data.data() + off, incl, linktype), ts_us);
    off += incl;
  }
  return corpus;
}

Corpus read_pcapng(const Bytes& data, CaptureStats& stats) {
  Corpus corpus;
  std::size_t off = 0;
  bool swap = false;
  std::vector<std::uint16_t> if_link;
  std::vector<std::uint64_t> if_tsdiv;  // ticks per second divisor -> us

  while (off + 12 <= data.size()) {
    Cursor c{data.data() + off, data.size() - off, swap};
    std::uint32_t type = c.u32_at(0);
    if (type == kPcapngShb) {
      // Byte order is defined by this section's byte-order magic.
      std::uint32_t bom;
      std::memcpy(&bom, data.data() + off + 8, 4);
      if (bom == kByteOrderMagic) swap = false;
      else if (__builtin_bswap32(bom) == kByteOrderMagic) swap = true;
      else throw FormatError("pcapng: bad byte-order magic");
      c.swap = swap;
      if_link.clear();
      if_tsdiv.clear();
    }
    const std::uint32_t total_len = c.u32_at(4);
    if (total_len < 12 || total_len % 4 != 0 || off + total_len > data.size()) {
      throw FormatError("pcapng: bad block length");
    }
    const std::uint8_t* body = data.data() + off + 8;
    const std::size_t body_len = total_len - 12;
    Cursor b{body, body_len, swap};

    if (type == 1) {  // Interface Description Block
      if (body_len < 8) throw FormatError("pcapng: short IDB");
      if_link.push_back(static_cast<std::uint16_t>(b.u16_at(0)));
      std::uint64_t tsdiv = 1'000'000;
      // scan options for if_tsresol (code 9)
      std::size_t o = 8;
      while (o + 4 <= body_len) {
        const std::uint16_t code = b.u16_at(o);
        const std::uint16_t olen = b.u16_at(o + 2);
        if (code == 0) break;
        if (code == 9 && olen >= 1) {
          const std::uint8_t r = body[o + 4];
          if (r & 0x80) {
            tsdiv = 1ull << (r & 0x7f);
          } else {
            tsdiv = 1;
            for (int i = 0; i < r; ++i) tsdiv *= 10;
          }
        }
        o += 4 + ((olen + 3u) & ~3u);
      }
      if_tsdiv.push_back(tsdiv);
    } else if (type == 6) {  // Enhanced Packet Block
      if (body_len < 20) throw FormatError("pcapng: short EPB");
      const std::uint32_t ifid = b.u32_at(0);
      const std::uint64_t ts =
          (std::uint64_t(b.u32_at(4)) << 32) | b.u32_at(8);
      const std::uint32_t captured = b.u32_at(12);
      if (20 + captured > body_len || ifid >= if_link.size()) {
        ++stats.malformed;
      } else {
        const std::uint64_t div = if_tsdiv[ifid];
        const std::uint64_t ts_us =
            div >= 1'000'000 ? ts / (div / 1'000'000)
                             : ts * (1'000'000 / std::max<std::uint64_t>(1, div));
        account(corpus, stats, decode_frame(body + 20, captured, if_link[ifid]), ts_us);
      }
    } else if (type == 3) {  // Simple Packet Block
      if (body_len < 4 || if_link.empty()) {
        ++stats.malformed;
      } else {
        const std::uint32_t orig_len = b.u32_at(0);
        const std::size_t captured = std::min<std::size_t>(orig_len, body_len - 4);
        account(corpus, stats, decode_frame(body + 4, captured, if_link[0]), 0);
      }
    }
    off += total_len;
  }
  return corpus;
}

}  // namespace

Corpus read_capture(const std::string& path, CaptureStats* stats_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("capture: cannot open " + path);
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("capture: read failed for " + path);
  if (data.size() < 4) throw FormatError("capture: file too short");

  CaptureStats stats;
  std::uint32_t magic;
  std::memcpy(&magic, data.data(), 4);

  Corpus corpus;
  if (magic == kPcapngShb) {
    corpus = read_pcapng(data, stats);
  } else {
    corpus = read_classic_pcap(data, stats);
  }
  if (stats_out) *stats_out = stats;
  return corpus;
}

bool looks_like_capture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::uint32_t magic = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  if (!in) return false;
  return magic == kPcapngShb || magic == kPcapMagicLe || magic == kPcapMagicBe ||
         magic == kPcapMagicNsLe || magic == kPcapMagicNsBe;
}

}  // namespace cbid
