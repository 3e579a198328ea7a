#include <algorithm>
#include <cmath>

#include "ant/attacks.hpp"
#include "ant/error.hpp"

namespace ant {

void clip_inplace(std::span<float> values, const ClipDomain& d) {
  if (d.sign == 0.0f) {
    for (auto& v : values) v = std::clamp(v, d.lower, d.upper);
  } else {
    for (auto& v : values) v = d.sign * std::clamp(d.sign * v, d.lower, d.upper);
  }
}

std::vector<float> clip(std::span<const float> values, const ClipDomain& domain) {
  std::vector<float> out(values.begin(), values.end());
  clip_inplace(out, domain);
  return out;
}

ClipDomain byte_domain() { return {0.0f, 1.0f, 0.0f}; }

ClipDomain burst_domain(EncodingKind kind, const NormStats& stats, std::size_t max_pkt_size) {
  if (kind == EncodingKind::ftsc_ps) {
    return {static_cast<float>(standardize_size(static_cast<double>(kDummyMinSize), stats)),
            static_cast<float>(standardize_size(static_cast<double>(max_pkt_size), stats)), 0.0f};
  }
  if (kind == EncodingKind::ftsc_iat) {
    return {static_cast<float>(normalize_iat(static_cast<double>(kDummyMinIatUs), stats)),
            static_cast<float>(normalize_iat(static_cast<double>(kDummyMaxIatUs), stats)), 0.0f};
  }
  throw UsageError("burst domain needs an FTSC encoding");
}

ClipDomain uap_domain(const Uap& uap) {
  if (std::holds_alternative<AdvBurstConfig>(uap.attack)) {
    if (!uap.norm_stats) throw UsageError("AdvBurst perturbation lacks normalization statistics");
    return burst_domain(uap.encoding.kind, *uap.norm_stats, uap.encoding.max_pkt_size);
  }
  return byte_domain();
}

std::optional<std::size_t> BurstPolicy::resolve(std::span<const Burst> bursts) const {
  switch (kind) {
    case Kind::fixed:
      if (index < bursts.size()) return index;
      return std::nullopt;
    case Kind::first_forward:
    case Kind::first_backward: {
      const Direction want = kind == Kind::first_forward ? Direction::forward : Direction::backward;
      for (const Burst& b : bursts) {
        if (b.direction == want) return b.index;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

BurstPolicy default_burst_policy(EncodingKind kind) {
  BurstPolicy p;
  p.kind = kind == EncodingKind::ftsc_iat ? BurstPolicy::Kind::first_backward : BurstPolicy::Kind::first_forward;
  return p;
}

std::size_t pad_size(const Packet& packet, double overhead_pct) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(packet.size()) * overhead_pct / 100.0));
}

Spliced splice_advpad(const Packet& packet, std::span<const float> xi, const EncodingParams& enc,
                      const AdvPadConfig& cfg) {
  if (category(enc.kind) != InputCategory::packet) throw UsageError("AdvPad needs a PC encoding");
  const std::size_t M = enc.max_pkt_size;
  const std::size_t pad = std::min(pad_size(packet, cfg.overhead_pct), xi.size());

  Spliced s;
  s.input.assign(M, 0.0f);
  std::size_t pos = 0;
  auto put_bytes = [&](std::span<const std::uint8_t> b) {
    for (std::size_t i = 0; i < b.size() && pos < M; ++i) s.input[pos++] = static_cast<float>(b[i]) / 255.0f;
  };
  auto put_pad = [&] {
    for (std::size_t j = 0; j < pad && pos < M; ++j) {
      s.taps.push_back({static_cast<std::uint32_t>(pos), static_cast<std::uint32_t>(j), 1.0f});
      s.input[pos++] = xi[j];
    }
  };
  if (has_headers(enc.kind)) put_bytes(packet.tl_header);
  if (cfg.location == PadLocation::start) {
    put_pad();
    put_bytes(packet.payload);
  } else {
    put_bytes(packet.payload);
    put_pad();
  }
  return s;
}

namespace {

std::vector<const Packet*> payload_bearing(const Flow& flow) {
  std::vector<const Packet*> out;
  for (const Packet& p : flow.packets) {
    if (!p.payload.empty()) out.push_back(&p);
  }
  return out;
}

}  // namespace

std::size_t dummy_slot(const Flow& flow, const DummyIndexPolicy& policy, std::size_t n) {
  const auto pb = payload_bearing(flow);
  std::size_t k = policy.index;
  if (policy.kind == DummyIndexPolicy::Kind::after_first_forward) {
    auto it = std::find_if(pb.begin(), pb.end(), [](const Packet* p) { return p->direction == Direction::forward; });
    if (it == pb.end()) throw DataError("flow " + std::to_string(flow.id) + " has no source->destination packet");
    k = static_cast<std::size_t>(it - pb.begin()) + 1;
  }
  if (k >= n) {
    throw DataError("dummy index " + std::to_string(k) + " is outside the " + std::to_string(n) + "-packet window");
  }
  if (pb.size() < k) {
    throw DataError("flow " + std::to_string(flow.id) + " is shorter than the dummy index " + std::to_string(k));
  }
  return k;
}

Spliced splice_advpay(const Flow& flow, std::span<const float> xi, const EncodingParams& enc,
                      const AdvPayConfig& cfg) {
  if (category(enc.kind) != InputCategory::flow_content) throw UsageError("AdvPay needs an FCC encoding");
  const std::size_t M = enc.max_pkt_size;
  const std::size_t n = enc.n;
  const auto pb = payload_bearing(flow);
  if (pb.empty()) throw DataError("flow " + std::to_string(flow.id) + " has no payload-bearing packets");
  const std::size_t k = dummy_slot(flow, cfg.dummy_index, n);

  // The dummy takes the direction (and framing) of the packet before it.
  const Packet& before = *pb[k > 0 ? k - 1 : 0];
  const float dsign = sign(before.direction);

  Spliced s;
  s.input.assign(n * M, 0.0f);
  for (std::size_t j = 0; j < n; ++j) {
    auto slot = std::span(s.input).subspan(j * M, M);
    if (j == k) {
      std::size_t h = 0;
      if (has_headers(enc.kind)) {
        write_packet_slot(slot, before.tl_header, dsign);
        h = std::min(before.tl_header.size(), M);
      }
      for (std::size_t i = 0; i < xi.size() && h + i < M; ++i) {
        slot[h + i] = dsign * xi[i];
        s.taps.push_back({static_cast<std::uint32_t>(j * M + h + i), static_cast<std::uint32_t>(i), dsign});
      }
      continue;
    }
    const std::size_t src = j < k ? j : j - 1;
    if (src < pb.size()) write_packet_slot(slot, packet_bytes(*pb[src], enc.kind), sign(pb[src]->direction));
  }
  return s;
}

std::optional<Spliced> splice_advburst(const Flow& flow, std::span<const float> xi, const EncodingParams& enc,
                                       const AdvBurstConfig& cfg, const NormStats& stats) {
  if (category(enc.kind) != InputCategory::flow_timeseries) throw UsageError("AdvBurst needs an FTSC encoding");
  if (flow.packets.empty()) return std::nullopt;
  const auto bursts = split_bursts(flow);
  const auto sel = cfg.selected_burst.resolve(bursts);
  if (!sel) return std::nullopt;

  const bool ps = enc.kind == EncodingKind::ftsc_ps;
  const std::size_t len = ps ? enc.m : enc.m - 1;
  const auto& pk = flow.packets;
  const float dsign = sign(bursts[*sel].direction);
  // Packet index right after the selected burst; in IAT space the dummies
  // land at the slot of the IAT that used to lead into that packet.
  const std::size_t after = bursts[*sel].last() + 1;
  const std::size_t ins = ps ? after : after - 1;

  auto original = [&](std::size_t slot) -> float {
    if (ps) {
      return static_cast<float>(standardize_size(static_cast<double>(pk[slot].size()), stats) * sign(pk[slot].direction));
    }
    const double iat = static_cast<double>(pk[slot + 1].timestamp_us - pk[slot].timestamp_us);
    return static_cast<float>(normalize_iat(iat, stats) * sign(pk[slot + 1].direction));
  };
  const std::size_t orig_count = ps ? pk.size() : pk.size() - 1;

  Spliced s;
  s.input.assign(len, 0.0f);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < ins && pos < len; ++i) s.input[pos++] = original(i);
  for (std::size_t j = 0; j < xi.size() && pos < len; ++j) {
    s.taps.push_back({static_cast<std::uint32_t>(pos), static_cast<std::uint32_t>(j), dsign});
    s.input[pos++] = dsign * xi[j];
  }
  for (std::size_t i = ins; i < orig_count && pos < len; ++i) s.input[pos++] = original(i);
  return s;
}

std::vector<float> xi_gradient(std::span<const Spliced> batch, std::span<const std::vector<float>> input_grads,
                               std::size_t xi_size) {
  std::vector<double> acc(xi_size, 0.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (const SpliceTap& t : batch[b].taps) acc[t.xi_index] += static_cast<double>(t.coef) * input_grads[b][t.input_index];
  }
  return {acc.begin(), acc.end()};
}

}  // namespace ant
