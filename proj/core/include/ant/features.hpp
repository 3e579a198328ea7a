#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ant/traffic.hpp"

namespace ant {

// Packet classification (PC), flow content classification (FCC) and flow
// time-series classification (FTSC), each in two flavours.
enum class EncodingKind : std::uint8_t { pc_hp, pc_p, fcc_hp, fcc_p, ftsc_ps, ftsc_iat };

enum class InputCategory { packet, flow_content, flow_timeseries };

std::string_view to_string(EncodingKind kind);
EncodingKind parse_encoding_kind(std::string_view name);  // "PC_HP", "pc-hp", ...

InputCategory category(EncodingKind kind);
bool has_headers(EncodingKind kind);

struct EncodingParams {
  EncodingKind kind = EncodingKind::pc_p;
  std::size_t n = 10;              // packets per FCC window
  std::size_t m = 100;             // packets per FTSC window
  std::size_t max_pkt_size = kMaxPktSize;

  void validate() const;
  std::size_t input_length() const;
};

struct EncodedSample {
  std::vector<float> values;
  int label = -1;
  std::uint64_t provenance = 0;
};

// Fitted on the training split: packet-size mean and population standard
// deviation (bytes), and the largest inter-arrival time (microseconds).
struct NormStats {
  double ps_mean = 0.0;
  double ps_std = 1.0;
  double iat_max = 1.0;
};

// Byte layout a packet classifier sees: header then payload for the HP
// flavours, payload only otherwise.
std::vector<std::uint8_t> packet_bytes(const Packet& packet, EncodingKind kind);

// PC: bytes / 255, zero-padded or truncated to max_pkt_size.
std::vector<float> encode_packet(const Packet& packet, EncodingKind kind,
                                 std::size_t max_pkt_size = kMaxPktSize);

// Writes `bytes`/255 * sign into `slot`, truncating to the slot size.
void write_packet_slot(std::span<float> slot, std::span<const std::uint8_t> bytes, float sign);

// FCC: first n payload-bearing packets, each a signed PC slot.
std::vector<float> encode_flow_content(const Flow& flow, EncodingKind kind, std::size_t n,
                                       std::size_t max_pkt_size = kMaxPktSize);

NormStats fit_norm_stats(std::span<const Flow> training_flows);

double standardize_size(double size_bytes, const NormStats& stats);
double normalize_iat(double iat_us, const NormStats& stats);

// Inverses of the two normalizations, ignoring direction sign.
double decode_ps(double value, const NormStats& stats);
std::int64_t decode_iat(double value, const NormStats& stats);

// FTSC: m signed standardized sizes, or m-1 signed log-normalized IATs.
std::vector<float> encode_flow_timeseries(const Flow& flow, EncodingKind kind, std::size_t m,
                                          const NormStats& stats);

// Category dispatch for flow encodings (FCC and FTSC). `stats` is required
// for FTSC.
std::vector<float> encode_flow(const Flow& flow, const EncodingParams& params,
                               const NormStats* stats);

// True if `flow` can be encoded under `params` (payload present, enough
// packets for IATs).
bool encodable(const Flow& flow, const EncodingParams& params);

// Labelled samples for a set of flows. Packet encodings yield one sample per
// payload-bearing packet (at most `packets_per_flow` when non-zero); flow
// encodings yield one per encodable flow. Provenance is the flow id, shifted
// left 16 bits and or-ed with the packet index for packet encodings.
std::vector<EncodedSample> encode_flows(std::span<const Flow> flows, const EncodingParams& params,
                                        const NormStats* stats, std::size_t packets_per_flow = 0);

// Binary sample stream: per sample kind u8, length u32, label u16, then
// little-endian f32 values.
void write_samples(std::ostream& out, EncodingKind kind, std::span<const EncodedSample> samples);
std::vector<EncodedSample> read_samples(std::istream& in, EncodingKind* kind = nullptr);

}  // namespace ant
