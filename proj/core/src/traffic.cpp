#include "ant/traffic.hpp"

#include <map>

#include "ant/error.hpp"

namespace ant {

FiveTuple canonicalize(const FiveTuple& t) {
  const FiveTuple r = t.reversed();
  return r < t ? r : t;
}

std::string format_ipv4(std::uint32_t ip) {
  return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xff) + "." +
         std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff);
}

std::string to_string(const FiveTuple& t) {
  return format_ipv4(t.src_ip) + ":" + std::to_string(t.src_port) + " -> " +
         format_ipv4(t.dst_ip) + ":" + std::to_string(t.dst_port) +
         (t.proto == kProtoTcp ? " tcp" : t.proto == kProtoUdp ? " udp" : " proto " + std::to_string(t.proto));
}

std::vector<Flow> assemble_flows(std::span<const Packet> packets, std::int64_t timeout_us,
                                 std::uint64_t first_id) {
  if (timeout_us < 0) throw UsageError("flow timeout must be non-negative");

  std::vector<Flow> flows;
  // canonical key -> index of the currently open flow
  std::map<FiveTuple, std::size_t> open;
  std::int64_t prev_ts = INT64_MIN;

  for (std::size_t i = 0; i < packets.size(); ++i) {
    const Packet& p = packets[i];
    if (p.timestamp_us < prev_ts) {
      throw DataError("packets are not sorted by timestamp (index " + std::to_string(i) + ")");
    }
    prev_ts = p.timestamp_us;

    const FiveTuple key = canonicalize(p.tuple);
    auto it = open.find(key);
    if (it != open.end()) {
      Flow& f = flows[it->second];
      if (p.timestamp_us - f.packets.back().timestamp_us > timeout_us) {
        open.erase(it);
        it = open.end();
      }
    }
    if (it == open.end()) {
      Flow f;
      f.tuple = p.tuple;
      f.timeout_us = timeout_us;
      f.id = first_id + flows.size();
      flows.push_back(std::move(f));
      it = open.emplace(key, flows.size() - 1).first;
    }

    Flow& f = flows[it->second];
    Packet q = p;
    q.direction = (p.tuple == f.tuple) ? Direction::forward : Direction::backward;
    f.packets.push_back(std::move(q));
  }
  return flows;
}

std::vector<Burst> split_bursts(const Flow& flow) {
  if (flow.packets.empty()) throw DataError("cannot split an empty flow into bursts");

  std::vector<Burst> bursts;
  for (std::size_t i = 0; i < flow.packets.size(); ++i) {
    const Direction d = flow.packets[i].direction;
    if (bursts.empty() || bursts.back().direction != d) {
      bursts.push_back({d, bursts.size(), i, 0});
    }
    ++bursts.back().count;
  }
  return bursts;
}

}  // namespace ant
