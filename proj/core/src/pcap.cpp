#include "ant/pcap.hpp"

#include <algorithm>
#include <cstdio>

#include "ant/binio.hpp"

namespace ant {

PcapTruncatedError::PcapTruncatedError(std::size_t offset, PcapParseResult partial)
    : DataError("truncated pcap record at offset " + std::to_string(offset) + " after " +
                std::to_string(partial.packets.size()) + " packets"),
      offset_(offset),
      partial_(std::move(partial)) {}

namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;

std::uint32_t bswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }
std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

struct FileHeader {
  bool swapped = false;
  bool nanos = false;
  std::uint32_t link_type = 0;
};

std::uint32_t read_u32(ByteReader& r, bool swapped) {
  std::uint32_t v = r.u32();
  return swapped ? bswap32(v) : v;
}

enum class Decode { packet, non_ip, ipv6, non_tcp_udp, fragment, malformed };

// Decodes one IPv4 datagram into `out`.
Decode decode_ipv4(std::span<const std::uint8_t> ip, Packet& out) {
  if (ip.size() < 20) return Decode::malformed;
  const std::uint8_t version = ip[0] >> 4;
  if (version == 6) return Decode::ipv6;
  if (version != 4) return Decode::non_ip;
  const std::size_t ihl = (ip[0] & 0x0f) * 4u;
  const std::size_t total = be16(&ip[2]);
  if (ihl < 20 || total < ihl || ip.size() < ihl) return Decode::malformed;
  const std::uint16_t frag = be16(&ip[6]);
  if ((frag & 0x1fff) != 0) return Decode::fragment;
  const std::uint8_t proto = ip[9];
  if (proto != kProtoTcp && proto != kProtoUdp) return Decode::non_tcp_udp;

  // Captured bytes may be shorter than the datagram (snaplen); Ethernet
  // trailers may make them longer.
  const std::size_t avail = std::min(ip.size(), total);
  auto l4 = ip.subspan(ihl, avail - ihl);

  std::size_t hlen = 0;
  std::size_t plen = 0;
  if (proto == kProtoTcp) {
    if (l4.size() < 20) return Decode::malformed;
    hlen = (l4[12] >> 4) * 4u;
    if (hlen < 20 || hlen > l4.size()) return Decode::malformed;
    plen = l4.size() - hlen;
  } else {
    if (l4.size() < 8) return Decode::malformed;
    hlen = 8;
    const std::size_t ulen = be16(&l4[4]);
    if (ulen < 8) return Decode::malformed;
    plen = std::min(ulen - 8, l4.size() - 8);
  }

  out.tuple.src_ip = be32(&ip[12]);
  out.tuple.dst_ip = be32(&ip[16]);
  out.tuple.src_port = be16(&l4[0]);
  out.tuple.dst_port = be16(&l4[2]);
  out.tuple.proto = proto;
  out.tl_header.assign(l4.begin(), l4.begin() + hlen);
  out.payload.assign(l4.begin() + hlen, l4.begin() + hlen + plen);
  return Decode::packet;
}

Decode decode_frame(std::span<const std::uint8_t> frame, std::uint32_t link, Packet& out) {
  if (link == kLinkRawIpv4) {
    if (frame.empty()) return Decode::malformed;
    return decode_ipv4(frame, out);
  }
  // Ethernet, with up to two 802.1Q tags.
  if (frame.size() < 14) return Decode::malformed;
  std::size_t off = 12;
  std::uint16_t ethertype = be16(&frame[off]);
  for (int tags = 0; tags < 2 && (ethertype == 0x8100 || ethertype == 0x88a8); ++tags) {
    off += 4;
    if (frame.size() < off + 2) return Decode::malformed;
    ethertype = be16(&frame[off]);
  }
  off += 2;
  if (ethertype == 0x86dd) return Decode::ipv6;
  if (ethertype != 0x0800) return Decode::non_ip;
  return decode_ipv4(frame.subspan(off), out);
}

}  // namespace

PcapParseResult parse_pcap(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 24) throw DataError("unsupported capture format: file shorter than a pcap header");

  FileHeader fh;
  const std::uint32_t magic = r.u32();
  if (magic == kMagicMicro || magic == kMagicNano) {
    fh.nanos = magic == kMagicNano;
  } else if (bswap32(magic) == kMagicMicro || bswap32(magic) == kMagicNano) {
    fh.swapped = true;
    fh.nanos = bswap32(magic) == kMagicNano;
  } else {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", magic);
    throw DataError(std::string("unsupported capture format: bad magic ") + buf);
  }
  r.bytes(16);  // version, thiszone, sigfigs, snaplen
  fh.link_type = read_u32(r, fh.swapped);
  if (fh.link_type != kLinkEthernet && fh.link_type != kLinkRawIpv4) {
    throw DataError("unsupported capture format: link type " + std::to_string(fh.link_type));
  }

  PcapParseResult result;
  while (!r.done()) {
    const std::size_t rec_off = r.offset();
    if (r.remaining() < 16) throw PcapTruncatedError(rec_off, std::move(result));
    const std::uint32_t sec = read_u32(r, fh.swapped);
    const std::uint32_t frac = read_u32(r, fh.swapped);
    const std::uint32_t incl = read_u32(r, fh.swapped);
    read_u32(r, fh.swapped);  // orig_len
    if (r.remaining() < incl) throw PcapTruncatedError(rec_off, std::move(result));
    auto frame = r.bytes(incl);
    ++result.counters.records;

    Packet p;
    p.timestamp_us = static_cast<std::int64_t>(sec) * 1'000'000 +
                     static_cast<std::int64_t>(fh.nanos ? frac / 1000 : frac);
    switch (decode_frame(frame, fh.link_type, p)) {
      case Decode::packet: result.packets.push_back(std::move(p)); break;
      case Decode::non_ip: ++result.counters.non_ip; break;
      case Decode::ipv6: ++result.counters.ipv6; break;
      case Decode::non_tcp_udp: ++result.counters.non_tcp_udp; break;
      case Decode::fragment: ++result.counters.fragments; break;
      case Decode::malformed: ++result.counters.malformed; break;
    }
  }
  return result;
}

namespace {

void put_be16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

void put_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  put_be16(v, static_cast<std::uint16_t>(x >> 16));
  put_be16(v, static_cast<std::uint16_t>(x));
}

std::uint16_t ip_checksum(std::span<const std::uint8_t> hdr) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i + 1 < hdr.size(); i += 2) sum += be16(&hdr[i]);
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

}  // namespace

std::vector<std::uint8_t> write_pcap(std::span<const Packet> packets, std::uint32_t link_type) {
  if (link_type != kLinkEthernet && link_type != kLinkRawIpv4) {
    throw UsageError("write_pcap supports Ethernet and raw IPv4 link types only");
  }
  ByteWriter w;
  w.u32(kMagicMicro);
  w.u16(2);
  w.u16(4);
  w.u32(0);
  w.u32(0);
  w.u32(65535);
  w.u32(link_type);

  std::vector<std::uint8_t> frame;
  for (const Packet& p : packets) {
    frame.clear();
    if (link_type == kLinkEthernet) {
      const std::uint8_t macs[12] = {0x02, 0, 0, 0, 0, 1, 0x02, 0, 0, 0, 0, 2};
      frame.insert(frame.end(), macs, macs + 12);
      put_be16(frame, 0x0800);
    }
    const std::size_t ip_start = frame.size();
    const std::size_t total = 20 + p.tl_header.size() + p.payload.size();
    frame.push_back(0x45);
    frame.push_back(0);
    put_be16(frame, static_cast<std::uint16_t>(total));
    put_be16(frame, 0);       // id
    put_be16(frame, 0x4000);  // DF
    frame.push_back(64);
    frame.push_back(p.tuple.proto);
    put_be16(frame, 0);
    put_be32(frame, p.tuple.src_ip);
    put_be32(frame, p.tuple.dst_ip);
    const std::uint16_t csum = ip_checksum(std::span(frame).subspan(ip_start, 20));
    frame[ip_start + 10] = static_cast<std::uint8_t>(csum >> 8);
    frame[ip_start + 11] = static_cast<std::uint8_t>(csum);
    frame.insert(frame.end(), p.tl_header.begin(), p.tl_header.end());
    frame.insert(frame.end(), p.payload.begin(), p.payload.end());

    w.u32(static_cast<std::uint32_t>(p.timestamp_us / 1'000'000));
    w.u32(static_cast<std::uint32_t>(p.timestamp_us % 1'000'000));
    w.u32(static_cast<std::uint32_t>(frame.size()));
    w.u32(static_cast<std::uint32_t>(frame.size()));
    w.bytes(frame);
  }
  return std::move(w.data());
}

}  // namespace ant
