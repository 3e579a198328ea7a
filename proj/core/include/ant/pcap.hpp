#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ant/error.hpp"
#include "ant/traffic.hpp"

namespace ant {

inline constexpr std::uint32_t kLinkEthernet = 1;
inline constexpr std::uint32_t kLinkRawIpv4 = 101;

struct PcapCounters {
  std::size_t records = 0;
  std::size_t non_ip = 0;       // ARP, LLDP, ...
  std::size_t ipv6 = 0;
  std::size_t non_tcp_udp = 0;  // ICMP, GRE, ...
  std::size_t fragments = 0;    // non-first IPv4 fragments
  std::size_t malformed = 0;    // headers cut short by snaplen or bad lengths

  std::size_t skipped() const { return non_ip + ipv6 + non_tcp_udp + fragments + malformed; }
};

struct PcapParseResult {
  std::vector<Packet> packets;
  PcapCounters counters;
};

// Thrown when a record header or body runs past the end of the file. The
// packets decoded before the damaged record are preserved.
class PcapTruncatedError : public DataError {
 public:
  PcapTruncatedError(std::size_t offset, PcapParseResult partial);

  std::size_t offset() const { return offset_; }
  const PcapParseResult& partial() const { return partial_; }

 private:
  std::size_t offset_;
  PcapParseResult partial_;
};

// Classic libpcap container, either byte order, microsecond or nanosecond
// magic (nanoseconds are truncated to microseconds). Link types Ethernet and
// raw IPv4. Emits one Packet per IPv4 TCP/UDP record.
PcapParseResult parse_pcap(std::span<const std::uint8_t> bytes);

// Serializes packets as a little-endian microsecond pcap, synthesizing
// Ethernet and IPv4 framing around the stored transport header and payload.
std::vector<std::uint8_t> write_pcap(std::span<const Packet> packets,
                                     std::uint32_t link_type = kLinkEthernet);

}  // namespace ant
