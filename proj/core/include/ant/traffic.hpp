#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ant {

inline constexpr std::size_t kMaxPktSize = 1500;
inline constexpr std::int64_t kDefaultTimeoutUs = 180'000'000;

inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;

// Member order is the canonical ordering: (src_ip, src_port, dst_ip, dst_port, proto).
struct FiveTuple {
  std::uint32_t src_ip = 0;
  std::uint16_t src_port = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = kProtoTcp;

  auto operator<=>(const FiveTuple&) const = default;

  FiveTuple reversed() const { return {dst_ip, dst_port, src_ip, src_port, proto}; }
};

// Direction-independent key: the smaller of the tuple and its reversal.
FiveTuple canonicalize(const FiveTuple& t);

std::string format_ipv4(std::uint32_t ip);
std::string to_string(const FiveTuple& t);

enum class Direction : std::int8_t { forward = 1, backward = -1 };

constexpr float sign(Direction d) { return d == Direction::forward ? 1.0f : -1.0f; }
constexpr Direction opposite(Direction d) {
  return d == Direction::forward ? Direction::backward : Direction::forward;
}

struct Packet {
  std::int64_t timestamp_us = 0;
  FiveTuple tuple;
  std::vector<std::uint8_t> tl_header;
  std::vector<std::uint8_t> payload;
  // Relative to the owning flow; assigned by assemble_flows.
  Direction direction = Direction::forward;

  // Transport header plus payload, the size a classifier observes.
  std::size_t size() const { return tl_header.size() + payload.size(); }
};

// Bidirectional flow: the union of both unidirectional halves that share a
// canonical five-tuple, cut wherever the inter-arrival gap exceeds the timeout.
// `tuple` is oriented by the first observed packet (source -> destination).
struct Flow {
  FiveTuple tuple;
  std::int64_t timeout_us = kDefaultTimeoutUs;
  std::vector<Packet> packets;
  std::optional<int> label;
  std::uint64_t id = 0;
};

// A maximal run of same-direction packets, as an index range into its flow.
struct Burst {
  Direction direction = Direction::forward;
  std::size_t index = 0;
  std::size_t first = 0;
  std::size_t count = 0;

  std::size_t last() const { return first + count - 1; }
};

// Groups time-ordered packets into bidirectional flows. Flows are returned
// in order of their first packet and numbered from `first_id`. Throws
// DataError if the input is not sorted by timestamp.
std::vector<Flow> assemble_flows(std::span<const Packet> packets,
                                 std::int64_t timeout_us = kDefaultTimeoutUs,
                                 std::uint64_t first_id = 0);

std::vector<Burst> split_bursts(const Flow& flow);

}  // namespace ant
