#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ant/features.hpp"
#include "ant/nn.hpp"
#include "ant/traffic.hpp"

namespace ant {

enum class PadLocation { start, end };

// Pad injected into the payload; pad length is floor(packet size * OH / 100).
struct AdvPadConfig {
  PadLocation location = PadLocation::start;
  double overhead_pct = 10.0;
};

// Where the dummy packet goes inside the FCC window.
struct DummyIndexPolicy {
  enum class Kind { after_first_forward, fixed };
  Kind kind = Kind::after_first_forward;
  std::size_t index = 0;
};

struct AdvPayConfig {
  std::size_t payload_size = 500;
  DummyIndexPolicy dummy_index;
};

struct BurstPolicy {
  enum class Kind { first_forward, first_backward, fixed };
  Kind kind = Kind::first_forward;
  std::size_t index = 0;

  std::optional<std::size_t> resolve(std::span<const Burst> bursts) const;
};

// First source->destination burst for packet sizes, first
// destination->source burst for inter-arrival times.
BurstPolicy default_burst_policy(EncodingKind kind);

struct AdvBurstConfig {
  std::size_t dummy_count = 5;
  BurstPolicy selected_burst;
};

using AttackConfig = std::variant<AdvPadConfig, AdvPayConfig, AdvBurstConfig>;

enum class AttackKind { adv_pad, adv_pay, adv_burst };

std::string_view to_string(AttackKind kind);
AttackKind attack_kind(const AttackConfig& config);
// PC_* for AdvPad, FCC_* for AdvPay, FTSC_* for AdvBurst.
bool compatible(AttackKind attack, EncodingKind encoding);

enum class UpdateRule { gradient, sign };

struct GenParams {
  std::size_t iterations = 1000;
  std::size_t batch_size = 128;
  double epsilon = 0.01;
  std::uint64_t seed = 0;
  UpdateRule update = UpdateRule::gradient;
};

// 1000/128/0.01 for AdvPad, 1000/64/0.001 for AdvPay, 2000/64/0.01 for AdvBurst.
GenParams default_gen_params(AttackKind kind);

enum class UapOrigin { adversarial, random };

struct Uap {
  std::vector<float> values;  // unsigned; direction signs are applied at splice time
  int target_class = 0;
  EncodingParams encoding;
  AttackConfig attack;
  GenParams gen;
  std::string source_model_id;
  UapOrigin origin = UapOrigin::adversarial;
  std::optional<NormStats> norm_stats;  // FTSC only
};

// Feasible set of the perturbation. With a non-zero sign, values are
// interpreted as sign * magnitude and the magnitude is clamped.
struct ClipDomain {
  float lower = 0.0f;
  float upper = 1.0f;
  float sign = 0.0f;
};

void clip_inplace(std::span<float> values, const ClipDomain& domain);
std::vector<float> clip(std::span<const float> values, const ClipDomain& domain);

inline constexpr std::size_t kDummyMinSize = 40;
inline constexpr std::int64_t kDummyMinIatUs = 1'000;
inline constexpr std::int64_t kDummyMaxIatUs = 100'000;

ClipDomain byte_domain();
// Sizes in [40, max_pkt_size] bytes or IATs in [1 ms, 100 ms], normalized.
ClipDomain burst_domain(EncodingKind kind, const NormStats& stats, std::size_t max_pkt_size);
ClipDomain uap_domain(const Uap& uap);

// ---- splicing: encoded input with the perturbation in place ---------------

// d input[input_index] / d xi[xi_index] = coef
struct SpliceTap {
  std::uint32_t input_index;
  std::uint32_t xi_index;
  float coef;
};

struct Spliced {
  std::vector<float> input;
  std::vector<SpliceTap> taps;
};

std::size_t pad_size(const Packet& packet, double overhead_pct);

Spliced splice_advpad(const Packet& packet, std::span<const float> xi, const EncodingParams& enc,
                      const AdvPadConfig& cfg);

// Resolved FCC slot for the dummy packet. Throws DataError when the flow
// is too short or the index falls outside the window.
std::size_t dummy_slot(const Flow& flow, const DummyIndexPolicy& policy, std::size_t n);

Spliced splice_advpay(const Flow& flow, std::span<const float> xi, const EncodingParams& enc,
                      const AdvPayConfig& cfg);

// nullopt when the flow has no burst matching the policy.
std::optional<Spliced> splice_advburst(const Flow& flow, std::span<const float> xi, const EncodingParams& enc,
                                       const AdvBurstConfig& cfg, const NormStats& stats);

// Chain rule through the taps: sum over the batch of coef * dJ/dinput.
std::vector<float> xi_gradient(std::span<const Spliced> batch, std::span<const std::vector<float>> input_grads,
                               std::size_t xi_size);

// ---- generation -----------------------------------------------------------

// Called after every update with the iteration index, batch loss before the
// update and the clipped perturbation.
using IterationHook = std::function<void(std::size_t, double, std::span<const float>)>;

struct GenStats {
  std::size_t skipped = 0;  // items lacking the selected burst
};

Uap gen_advpad(std::span<const Packet> packets, int target_class, const nn::Model& model, const AdvPadConfig& cfg,
               const GenParams& gen, const IterationHook& hook = {}, GenStats* stats = nullptr);

Uap gen_advpay(std::span<const Flow> flows, int target_class, const nn::Model& model, const AdvPayConfig& cfg,
               const GenParams& gen, const IterationHook& hook = {}, GenStats* stats = nullptr);

Uap gen_advburst(std::span<const Flow> flows, int target_class, const nn::Model& model, const AdvBurstConfig& cfg,
                 const GenParams& gen, const IterationHook& hook = {}, GenStats* stats = nullptr);

// ---- application ----------------------------------------------------------

std::vector<float> apply_advpad(const Packet& packet, const Uap& uap);
std::vector<float> apply_advpay(const Flow& flow, const Uap& uap);
// Throws DataError if the flow lacks the selected burst.
std::vector<float> apply_advburst(const Flow& flow, const Uap& uap);

// Packet-level materialization. Pad/payload values are quantized to
// round(v * 255); burst dummies get decoded sizes and timestamps.
Packet materialize_advpad(const Packet& packet, const Uap& uap);
Flow materialize_advpay(const Flow& flow, const Uap& uap);
Flow materialize_advburst(const Flow& flow, const Uap& uap);

// `runs` uniform draws from the same domain and placement as the
// adversarial counterpart described by `like`.
std::vector<Uap> rand_baseline(const Uap& like, std::size_t runs, std::uint64_t seed);

// Uap with the shape of `attack` but no values; input to rand_baseline.
Uap uap_template(const AttackConfig& attack, const nn::Model& model, int target_class);

struct PortRange {
  std::uint16_t lo = 1024;
  std::uint16_t hi = 65535;
};

// Per-flow random (source, destination) port pair.
std::pair<std::uint16_t, std::uint16_t> random_port_pair(std::uint64_t flow_id, const PortRange& range,
                                                         std::uint64_t seed);

// Rewrites the port fields of every transport header; needs an encoding
// that includes headers.
Flow randomize_ports(const Flow& flow, EncodingKind kind, const PortRange& range, std::uint64_t seed);
Packet randomize_ports(const Packet& packet, std::uint64_t flow_id, EncodingKind kind, const PortRange& range,
                       std::uint64_t seed);

// "ANTU", version u16, u32-length-prefixed JSON metadata, u32 count + f32
// values, CRC32.
std::vector<std::uint8_t> serialize_uap(const Uap& uap);
Uap deserialize_uap(std::span<const std::uint8_t> bytes);
void save_uap(const Uap& uap, const std::filesystem::path& path);
Uap load_uap(const std::filesystem::path& path);

}  // namespace ant
