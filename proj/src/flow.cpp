#include "cbid/flow.hpp"

#include <cstring>

#include "cbid/errors.hpp"
#include "cbid/hash.hpp"

namespace cbid {

namespace {
constexpr std::size_t addr_len(std::uint8_t version) {
  return version == 4 ? 4 : 16;
}
}  // namespace

Bytes FlowKey::serialize() const {
  const std::size_t alen = addr_len(version);
  Bytes out;
  out.reserve(1 + 2 * alen + 5);
  out.push_back(version);
  out.insert(out.end(), src_addr.begin(), src_addr.begin() + alen);
  out.insert(out.end(), dst_addr.begin(), dst_addr.begin() + alen);
  out.push_back(static_cast<std::uint8_t>(src_port & 0xff));
  out.push_back(static_cast<std::uint8_t>(src_port >> 8));
  out.push_back(static_cast<std::uint8_t>(dst_port & 0xff));
  out.push_back(static_cast<std::uint8_t>(dst_port >> 8));
  out.push_back(static_cast<std::uint8_t>(protocol));
  return out;
}

FlowKey FlowKey::deserialize(ByteView data) {
  if (data.empty()) throw FormatError("flow key: empty input");
  FlowKey k;
  k.version = data[0];
  if (k.version != 4 && k.version != 6) {
    throw FormatError("flow key: bad version tag " + std::to_string(k.version));
  }
  const std::size_t alen = addr_len(k.version);
  const std::size_t want = 1 + 2 * alen + 5;
  if (data.size() != want) {
    throw FormatError("flow key: expected " + std::to_string(want) + " bytes, got " +
                      std::to_string(data.size()));
  }
  std::memcpy(k.src_addr.data(), data.data() + 1, alen);
  std::memcpy(k.dst_addr.data(), data.data() + 1 + alen, alen);
  const std::uint8_t* p = data.data() + 1 + 2 * alen;
  k.src_port = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  k.dst_port = static_cast<std::uint16_t>(p[2] | (p[3] << 8));
  const std::uint8_t proto = p[4];
  if (proto != 6 && proto != 17) throw FormatError("flow key: bad protocol");
  k.protocol = static_cast<IpProto>(proto);
  return k;
}

std::array<std::uint8_t, 38> FlowKey::wide_record() const {
  std::array<std::uint8_t, 38> rec{};
  rec[0] = version;
  std::memcpy(rec.data() + 1, src_addr.data(), 16);
  std::memcpy(rec.data() + 17, dst_addr.data(), 16);
  rec[33] = static_cast<std::uint8_t>(src_port & 0xff);
  rec[34] = static_cast<std::uint8_t>(src_port >> 8);
  rec[35] = static_cast<std::uint8_t>(dst_port & 0xff);
  rec[36] = static_cast<std::uint8_t>(dst_port >> 8);
  rec[37] = static_cast<std::uint8_t>(protocol);
  return rec;
}

FlowKey FlowKey::from_wide_record(ByteView rec) {
  if (rec.size() != 38) throw FormatError("flow record: bad length");
  FlowKey k;
  k.version = rec[0];
  if (k.version != 4 && k.version != 6) throw FormatError("flow record: bad version");
  std::memcpy(k.src_addr.data(), rec.data() + 1, 16);
  std::memcpy(k.dst_addr.data(), rec.data() + 17, 16);
  k.src_port = static_cast<std::uint16_t>(rec[33] | (rec[34] << 8));
  k.dst_port = static_cast<std::uint16_t>(rec[35] | (rec[36] << 8));
  const std::uint8_t proto = rec[37];
  if (proto != 6 && proto != 17) throw FormatError("flow record: bad protocol");
  k.protocol = static_cast<IpProto>(proto);
  return k;
}

std::string FlowKey::to_string() const {
  auto fmt_addr = [&](const std::array<std::uint8_t, 16>& a) {
    std::string s;
    if (version == 4) {
      for (int i = 0; i < 4; ++i) {
        if (i) s += '.';
        s += std::to_string(a[i]);
      }
    } else {
      static const char* digits = "0123456789abcdef";
      for (int i = 0; i < 16; i += 2) {
        if (i) s += ':';
        s += digits[a[i] >> 4];
        s += digits[a[i] & 0xf];
        s += digits[a[i + 1] >> 4];
        s += digits[a[i + 1] & 0xf];
      }
    }
    return s;
  };
  std::string s = protocol == IpProto::tcp ? "tcp " : "udp ";
  s += fmt_addr(src_addr) + ":" + std::to_string(src_port) + " -> " + fmt_addr(dst_addr) +
       ":" + std::to_string(dst_port);
  return s;
}

std::size_t FlowKeyHash::operator()(const FlowKey& k) const {
  const Bytes b = k.serialize();
  return static_cast<std::size_t>(keyed_hash64(b, 0x5eedf10aULL));
}

}  // namespace cbid
