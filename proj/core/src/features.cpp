#include "ant/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>

#include "ant/binio.hpp"
#include "ant/error.hpp"

namespace ant {

namespace {

constexpr EncodingKind kAllKinds[] = {EncodingKind::pc_hp,  EncodingKind::pc_p,    EncodingKind::fcc_hp,
                                      EncodingKind::fcc_p,  EncodingKind::ftsc_ps, EncodingKind::ftsc_iat};

}  // namespace

std::string_view to_string(EncodingKind kind) {
  switch (kind) {
    case EncodingKind::pc_hp: return "PC_HP";
    case EncodingKind::pc_p: return "PC_P";
    case EncodingKind::fcc_hp: return "FCC_HP";
    case EncodingKind::fcc_p: return "FCC_P";
    case EncodingKind::ftsc_ps: return "FTSC_PS";
    case EncodingKind::ftsc_iat: return "FTSC_IAT";
  }
  return "?";
}

EncodingKind parse_encoding_kind(std::string_view name) {
  std::string norm;
  for (char c : name) norm += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (EncodingKind k : kAllKinds) {
    if (to_string(k) == norm) return k;
  }
  throw UsageError("unknown encoding '" + std::string(name) +
                   "' (expected PC_HP, PC_P, FCC_HP, FCC_P, FTSC_PS or FTSC_IAT)");
}

InputCategory category(EncodingKind kind) {
  switch (kind) {
    case EncodingKind::pc_hp:
    case EncodingKind::pc_p: return InputCategory::packet;
    case EncodingKind::fcc_hp:
    case EncodingKind::fcc_p: return InputCategory::flow_content;
    default: return InputCategory::flow_timeseries;
  }
}

bool has_headers(EncodingKind kind) { return kind == EncodingKind::pc_hp || kind == EncodingKind::fcc_hp; }

void EncodingParams::validate() const {
  if (n < 1) throw UsageError("FCC window n must be >= 1");
  if (m < 2) throw UsageError("FTSC window m must be >= 2");
  if (max_pkt_size < 60) throw UsageError("max_pkt_size must be >= 60");
}

std::size_t EncodingParams::input_length() const {
  switch (category(kind)) {
    case InputCategory::packet: return max_pkt_size;
    case InputCategory::flow_content: return n * max_pkt_size;
    case InputCategory::flow_timeseries: return kind == EncodingKind::ftsc_ps ? m : m - 1;
  }
  return 0;
}

std::vector<std::uint8_t> packet_bytes(const Packet& packet, EncodingKind kind) {
  std::vector<std::uint8_t> out;
  out.reserve(packet.size());
  if (has_headers(kind)) out.insert(out.end(), packet.tl_header.begin(), packet.tl_header.end());
  out.insert(out.end(), packet.payload.begin(), packet.payload.end());
  return out;
}

void write_packet_slot(std::span<float> slot, std::span<const std::uint8_t> bytes, float sign) {
  const std::size_t n = std::min(slot.size(), bytes.size());
  for (std::size_t i = 0; i < n; ++i) slot[i] = sign * (static_cast<float>(bytes[i]) / 255.0f);
}

std::vector<float> encode_packet(const Packet& packet, EncodingKind kind, std::size_t max_pkt_size) {
  if (category(kind) != InputCategory::packet) throw UsageError("encode_packet needs PC_HP or PC_P");
  if (packet.payload.empty()) throw DataError("cannot encode a packet with an empty payload");
  std::vector<float> out(max_pkt_size, 0.0f);
  write_packet_slot(out, packet_bytes(packet, kind), 1.0f);
  return out;
}

std::vector<float> encode_flow_content(const Flow& flow, EncodingKind kind, std::size_t n,
                                       std::size_t max_pkt_size) {
  if (category(kind) != InputCategory::flow_content) throw UsageError("encode_flow_content needs FCC_HP or FCC_P");
  std::vector<float> out(n * max_pkt_size, 0.0f);
  std::size_t slot = 0;
  for (const Packet& p : flow.packets) {
    if (slot == n) break;
    if (p.payload.empty()) continue;
    write_packet_slot(std::span(out).subspan(slot * max_pkt_size, max_pkt_size), packet_bytes(p, kind),
                      sign(p.direction));
    ++slot;
  }
  if (slot == 0) throw DataError("flow " + std::to_string(flow.id) + " has no payload-bearing packets");
  return out;
}

NormStats fit_norm_stats(std::span<const Flow> flows) {
  std::size_t count = 0;
  double sum = 0.0;
  double iat_max = 0.0;
  for (const Flow& f : flows) {
    for (std::size_t i = 0; i < f.packets.size(); ++i) {
      sum += static_cast<double>(f.packets[i].size());
      ++count;
      if (i > 0) {
        iat_max = std::max(iat_max, static_cast<double>(f.packets[i].timestamp_us - f.packets[i - 1].timestamp_us));
      }
    }
  }
  if (count < 2) throw DataError("fitting normalization statistics needs at least two packets");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const Flow& f : flows) {
    for (const Packet& p : f.packets) {
      const double d = static_cast<double>(p.size()) - mean;
      ss += d * d;
    }
  }
  const double sd = std::sqrt(ss / static_cast<double>(count));
  if (!(sd > 0.0)) throw DataError("packet sizes have zero variance; cannot standardize");
  // A log base of 1 is undefined; the smallest usable maximum is 2 us.
  return {mean, sd, std::max(iat_max, 2.0)};
}

double standardize_size(double size_bytes, const NormStats& s) { return (size_bytes - s.ps_mean) / s.ps_std; }

double normalize_iat(double iat_us, const NormStats& s) { return 2.0 * std::log(iat_us + 1.0) / std::log(s.iat_max); }

double decode_ps(double value, const NormStats& s) { return value * s.ps_std + s.ps_mean; }

std::int64_t decode_iat(double value, const NormStats& s) {
  const double iat = std::exp(value / 2.0 * std::log(s.iat_max)) - 1.0;
  return std::max<std::int64_t>(0, std::llround(iat));
}

std::vector<float> encode_flow_timeseries(const Flow& flow, EncodingKind kind, std::size_t m, const NormStats& s) {
  const auto& pk = flow.packets;
  if (kind == EncodingKind::ftsc_ps) {
    if (pk.empty()) throw DataError("FTSC_PS needs at least one packet");
    std::vector<float> out(m, 0.0f);
    for (std::size_t i = 0; i < std::min(m, pk.size()); ++i) {
      out[i] = static_cast<float>(standardize_size(static_cast<double>(pk[i].size()), s) * sign(pk[i].direction));
    }
    return out;
  }
  if (kind != EncodingKind::ftsc_iat) throw UsageError("encode_flow_timeseries needs FTSC_PS or FTSC_IAT");
  if (pk.size() < 2) throw DataError("FTSC_IAT needs at least two packets");
  std::vector<float> out(m - 1, 0.0f);
  for (std::size_t i = 1; i < std::min(m, pk.size()); ++i) {
    const double iat = static_cast<double>(pk[i].timestamp_us - pk[i - 1].timestamp_us);
    out[i - 1] = static_cast<float>(normalize_iat(iat, s) * sign(pk[i].direction));
  }
  return out;
}

std::vector<float> encode_flow(const Flow& flow, const EncodingParams& params, const NormStats* stats) {
  switch (category(params.kind)) {
    case InputCategory::flow_content:
      return encode_flow_content(flow, params.kind, params.n, params.max_pkt_size);
    case InputCategory::flow_timeseries:
      if (!stats) throw UsageError("FTSC encodings need fitted normalization statistics");
      return encode_flow_timeseries(flow, params.kind, params.m, *stats);
    case InputCategory::packet: break;
  }
  throw UsageError("encode_flow needs a flow encoding, got " + std::string(to_string(params.kind)));
}

bool encodable(const Flow& flow, const EncodingParams& params) {
  switch (params.kind) {
    case EncodingKind::ftsc_iat: return flow.packets.size() >= 2;
    case EncodingKind::ftsc_ps: return !flow.packets.empty();
    default:
      return std::any_of(flow.packets.begin(), flow.packets.end(), [](const Packet& p) { return !p.payload.empty(); });
  }
}

std::vector<EncodedSample> encode_flows(std::span<const Flow> flows, const EncodingParams& params,
                                        const NormStats* stats, std::size_t packets_per_flow) {
  std::vector<EncodedSample> out;
  for (const Flow& f : flows) {
    if (!f.label) throw DataError("flow " + std::to_string(f.id) + " has no label");
    if (category(params.kind) == InputCategory::packet) {
      std::size_t taken = 0;
      for (std::size_t i = 0; i < f.packets.size(); ++i) {
        if (f.packets[i].payload.empty()) continue;
        if (packets_per_flow && taken == packets_per_flow) break;
        out.push_back({encode_packet(f.packets[i], params.kind, params.max_pkt_size), *f.label, (f.id << 16) | i});
        ++taken;
      }
    } else if (encodable(f, params)) {
      out.push_back({encode_flow(f, params, stats), *f.label, f.id});
    }
  }
  return out;
}

void write_samples(std::ostream& out, EncodingKind kind, std::span<const EncodedSample> samples) {
  ByteWriter w;
  for (const auto& s : samples) {
    w.u8(static_cast<std::uint8_t>(kind));
    w.u32(static_cast<std::uint32_t>(s.values.size()));
    w.u16(static_cast<std::uint16_t>(s.label));
    for (float v : s.values) w.f32(v);
  }
  out.write(reinterpret_cast<const char*>(w.data().data()), static_cast<std::streamsize>(w.data().size()));
}

std::vector<EncodedSample> read_samples(std::istream& in, EncodingKind* kind) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  ByteReader r(bytes);
  std::vector<EncodedSample> out;
  while (!r.done()) {
    const std::uint8_t k = r.u8();
    if (k > static_cast<std::uint8_t>(EncodingKind::ftsc_iat)) throw DataError("sample stream: bad encoding kind");
    if (kind) *kind = static_cast<EncodingKind>(k);
    EncodedSample s;
    const std::uint32_t len = r.u32();
    s.label = r.u16();
    s.values.resize(len);
    for (auto& v : s.values) v = r.f32();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ant
