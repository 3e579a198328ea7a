#include "ant/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ant/binio.hpp"
#include "ant/error.hpp"
#include "ant/rng.hpp"
#include "json_util.hpp"

namespace ant {

using nlohmann::json;
using detail::attack_from_json;
using detail::attack_json;
using detail::gen_from_json;
using detail::gen_json;

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::adv_pad: return "advpad";
    case AttackKind::adv_pay: return "advpay";
    case AttackKind::adv_burst: return "advburst";
  }
  return "?";
}

AttackKind attack_kind(const AttackConfig& config) {
  return static_cast<AttackKind>(config.index());
}

bool compatible(AttackKind attack, EncodingKind encoding) {
  switch (attack) {
    case AttackKind::adv_pad: return category(encoding) == InputCategory::packet;
    case AttackKind::adv_pay: return category(encoding) == InputCategory::flow_content;
    case AttackKind::adv_burst: return category(encoding) == InputCategory::flow_timeseries;
  }
  return false;
}

GenParams default_gen_params(AttackKind kind) {
  switch (kind) {
    case AttackKind::adv_pad: return {1000, 128, 0.01, 0, UpdateRule::gradient};
    case AttackKind::adv_pay: return {1000, 64, 0.001, 0, UpdateRule::gradient};
    case AttackKind::adv_burst: return {2000, 64, 0.01, 0, UpdateRule::gradient};
  }
  return {};
}

namespace {

void require_compatible(AttackKind attack, const nn::Model& model) {
  if (!compatible(attack, model.encoding.kind)) {
    throw UsageError(std::string(to_string(attack)) + " cannot target a " + std::string(to_string(model.encoding.kind)) +
                     " classifier (valid pairs: advpad with PC_HP/PC_P, advpay with FCC_HP/FCC_P, "
                     "advburst with FTSC_PS/FTSC_IAT)");
  }
}

void require_target(int target, const nn::Model& model) {
  if (target < 0 || static_cast<std::size_t>(target) >= model.class_count()) {
    throw UsageError("target class " + std::to_string(target) + " is out of range");
  }
}

// Iterative ascent on the target-class loss shared by all three attacks.
template <class Item, class SpliceFn>
std::vector<float> ascend(const nn::Model& model, std::span<const Item> items, int target, std::vector<float> xi,
                          const ClipDomain& domain, const GenParams& gp, SpliceFn&& splice,
                          const IterationHook& hook, GenStats* stats, bool need_taps) {
  if (items.empty()) throw DataError("no samples of the target class to generate a perturbation from");
  if (gp.batch_size < 1) throw UsageError("batch size must be at least 1");

  Rng rng(derive_seed(gp.seed, "batch"));
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch_size = std::min(gp.batch_size, items.size());
  nn::GradientEngine engine(model);
  std::vector<Spliced> batch;
  std::vector<std::span<const float>> xs;
  std::vector<int> ys;
  GenStats local;
  const float eps = static_cast<float>(gp.epsilon);

  for (std::size_t t = 0; t < gp.iterations; ++t) {
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::swap(order[i], order[i + rng.below(items.size() - i)]);
    }
    batch.clear();
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::optional<Spliced> s = splice(items[order[i]], xi);
      if (!s) {
        ++local.skipped;
        continue;
      }
      batch.push_back(std::move(*s));
    }
    if (batch.empty()) throw DataError("every flow in the batch lacks the selected burst");
    if (need_taps && std::all_of(batch.begin(), batch.end(), [](const Spliced& s) { return s.taps.empty(); })) {
      throw UsageError("pad size is 0 for every packet in the batch; increase the overhead percentage");
    }
    xs.clear();
    ys.assign(batch.size(), target);
    for (const auto& s : batch) xs.emplace_back(s.input);

    const nn::Gradients& g = engine.compute(xs, ys, nn::Want::inputs);
    const auto grad = xi_gradient(batch, g.inputs, xi.size());
    for (std::size_t k = 0; k < xi.size(); ++k) {
      const float step = gp.update == UpdateRule::sign ? static_cast<float>((grad[k] > 0) - (grad[k] < 0)) : grad[k];
      xi[k] += eps * step;
    }
    clip_inplace(xi, domain);
    if (hook) hook(t, g.loss, xi);
  }
  if (stats) *stats = local;
  return xi;
}

std::vector<float> uniform_values(std::size_t n, const ClipDomain& d, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(d.lower, d.upper));
  return v;
}

Uap make_uap(const nn::Model& model, int target, AttackConfig attack, const GenParams& gp) {
  Uap u;
  u.target_class = target;
  u.encoding = model.encoding;
  u.attack = std::move(attack);
  u.gen = gp;
  u.norm_stats = model.norm_stats;
  return u;
}

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(static_cast<double>(v) * 255.0), 0, 255));
}

template <class T>
const T& config_of(const Uap& uap, const char* what) {
  const T* cfg = std::get_if<T>(&uap.attack);
  if (!cfg) throw UsageError(std::string("perturbation is not an ") + what + " perturbation");
  return *cfg;
}

}  // namespace

Uap gen_advpad(std::span<const Packet> packets, int target, const nn::Model& model, const AdvPadConfig& cfg,
               const GenParams& gp, const IterationHook& hook, GenStats* stats) {
  require_compatible(AttackKind::adv_pad, model);
  require_target(target, model);
  if (!(cfg.overhead_pct > 0.0 && cfg.overhead_pct <= 100.0)) {
    throw UsageError("AdvPad overhead must be in (0, 100] percent");
  }
  Uap u = make_uap(model, target, cfg, gp);
  Rng rng(derive_seed(gp.seed, "init"));
  std::vector<float> xi = uniform_values(model.encoding.max_pkt_size, byte_domain(), rng);
  const auto enc = model.encoding;
  u.values = ascend(
      model, packets, target, std::move(xi), byte_domain(), gp,
      [&](const Packet& p, std::span<const float> x) { return std::optional(splice_advpad(p, x, enc, cfg)); }, hook,
      stats, true);
  u.source_model_id = nn::model_id(model);
  return u;
}

Uap gen_advpay(std::span<const Flow> flows, int target, const nn::Model& model, const AdvPayConfig& cfg,
               const GenParams& gp, const IterationHook& hook, GenStats* stats) {
  require_compatible(AttackKind::adv_pay, model);
  require_target(target, model);
  const std::size_t limit = model.encoding.max_pkt_size - (has_headers(model.encoding.kind) ? 8 : 0);
  if (cfg.payload_size < 1 || cfg.payload_size > limit) {
    throw UsageError("AdvPay payload size must be in [1, " + std::to_string(limit) + "]");
  }
  if (cfg.dummy_index.kind == DummyIndexPolicy::Kind::fixed && cfg.dummy_index.index >= model.encoding.n) {
    throw UsageError("dummy index must be smaller than the window size n");
  }
  Uap u = make_uap(model, target, cfg, gp);
  const auto enc = model.encoding;
  u.values = ascend(
      model, flows, target, std::vector<float>(cfg.payload_size, 0.0f), byte_domain(), gp,
      [&](const Flow& f, std::span<const float> x) { return std::optional(splice_advpay(f, x, enc, cfg)); }, hook,
      stats, false);
  u.source_model_id = nn::model_id(model);
  return u;
}

Uap gen_advburst(std::span<const Flow> flows, int target, const nn::Model& model, const AdvBurstConfig& cfg,
                 const GenParams& gp, const IterationHook& hook, GenStats* stats) {
  require_compatible(AttackKind::adv_burst, model);
  require_target(target, model);
  if (cfg.dummy_count < 1) throw UsageError("AdvBurst needs at least one dummy packet");
  if (!model.norm_stats) throw UsageError("FTSC model lacks normalization statistics");
  Uap u = make_uap(model, target, cfg, gp);
  const NormStats stats_n = *model.norm_stats;
  const ClipDomain domain = burst_domain(model.encoding.kind, stats_n, model.encoding.max_pkt_size);
  Rng rng(derive_seed(gp.seed, "init"));
  const auto enc = model.encoding;
  u.values = ascend(
      model, flows, target, uniform_values(cfg.dummy_count, domain, rng), domain, gp,
      [&](const Flow& f, std::span<const float> x) { return splice_advburst(f, x, enc, cfg, stats_n); }, hook,
      stats, false);
  u.source_model_id = nn::model_id(model);
  return u;
}

std::vector<float> apply_advpad(const Packet& packet, const Uap& uap) {
  return splice_advpad(packet, uap.values, uap.encoding, config_of<AdvPadConfig>(uap, "AdvPad")).input;
}

std::vector<float> apply_advpay(const Flow& flow, const Uap& uap) {
  return splice_advpay(flow, uap.values, uap.encoding, config_of<AdvPayConfig>(uap, "AdvPay")).input;
}

std::vector<float> apply_advburst(const Flow& flow, const Uap& uap) {
  const auto& cfg = config_of<AdvBurstConfig>(uap, "AdvBurst");
  if (!uap.norm_stats) throw UsageError("AdvBurst perturbation lacks normalization statistics");
  auto s = splice_advburst(flow, uap.values, uap.encoding, cfg, *uap.norm_stats);
  if (!s) throw DataError("flow " + std::to_string(flow.id) + " has no burst matching the selection policy");
  return std::move(s->input);
}

Packet materialize_advpad(const Packet& packet, const Uap& uap) {
  const auto& cfg = config_of<AdvPadConfig>(uap, "AdvPad");
  const std::size_t pad = std::min(pad_size(packet, cfg.overhead_pct), uap.values.size());
  std::vector<std::uint8_t> bytes;
  for (std::size_t j = 0; j < pad; ++j) bytes.push_back(quantize(uap.values[j]));
  Packet out = packet;
  if (cfg.location == PadLocation::start) {
    out.payload.insert(out.payload.begin(), bytes.begin(), bytes.end());
  } else {
    out.payload.insert(out.payload.end(), bytes.begin(), bytes.end());
  }
  return out;
}

Flow materialize_advpay(const Flow& flow, const Uap& uap) {
  const auto& cfg = config_of<AdvPayConfig>(uap, "AdvPay");
  const std::size_t k = dummy_slot(flow, cfg.dummy_index, uap.encoding.n);
  std::vector<std::size_t> pb;
  for (std::size_t i = 0; i < flow.packets.size(); ++i) {
    if (!flow.packets[i].payload.empty()) pb.push_back(i);
  }
  const std::size_t before = pb.at(k > 0 ? k - 1 : 0);
  const std::size_t insert_at = k > 0 ? before + 1 : pb.at(0);

  Packet dummy;
  const Packet& ref = flow.packets[before];
  dummy.timestamp_us = ref.timestamp_us;
  dummy.tuple = ref.tuple;
  dummy.tl_header = ref.tl_header;
  dummy.direction = ref.direction;
  for (float v : uap.values) dummy.payload.push_back(quantize(v));

  Flow out = flow;
  out.packets.insert(out.packets.begin() + static_cast<std::ptrdiff_t>(insert_at), std::move(dummy));
  return out;
}

Flow materialize_advburst(const Flow& flow, const Uap& uap) {
  const auto& cfg = config_of<AdvBurstConfig>(uap, "AdvBurst");
  if (!uap.norm_stats) throw UsageError("AdvBurst perturbation lacks normalization statistics");
  const auto bursts = split_bursts(flow);
  const auto sel = cfg.selected_burst.resolve(bursts);
  if (!sel) throw DataError("flow " + std::to_string(flow.id) + " has no burst matching the selection policy");
  const std::size_t last = bursts[*sel].last();
  const Packet& ref = flow.packets[last];
  const bool ps = uap.encoding.kind == EncodingKind::ftsc_ps;

  std::vector<Packet> dummies;
  std::int64_t t = ref.timestamp_us;
  for (float v : uap.values) {
    Packet d;
    d.tuple = ref.tuple;
    d.tl_header = ref.tl_header;
    d.direction = ref.direction;
    std::size_t size = ref.size();
    if (ps) {
      const double decoded = std::round(decode_ps(v, *uap.norm_stats));
      size = static_cast<std::size_t>(
          std::clamp(decoded, static_cast<double>(kDummyMinSize), static_cast<double>(uap.encoding.max_pkt_size)));
      t += kDummyMinIatUs;
    } else {
      t += decode_iat(v, *uap.norm_stats);
    }
    d.timestamp_us = t;
    d.payload.assign(size > d.tl_header.size() ? size - d.tl_header.size() : 1, 0);
    dummies.push_back(std::move(d));
  }
  const std::int64_t shift = t - ref.timestamp_us;

  Flow out = flow;
  for (std::size_t i = last + 1; i < out.packets.size(); ++i) out.packets[i].timestamp_us += shift;
  out.packets.insert(out.packets.begin() + static_cast<std::ptrdiff_t>(last + 1), dummies.begin(), dummies.end());
  return out;
}

namespace {

std::size_t uap_length(const Uap& u) {
  return std::visit(
      [&](const auto& c) -> std::size_t {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, AdvPadConfig>) {
          return u.encoding.max_pkt_size;
        } else if constexpr (std::is_same_v<C, AdvPayConfig>) {
          return c.payload_size;
        } else {
          return c.dummy_count;
        }
      },
      u.attack);
}

}  // namespace

Uap uap_template(const AttackConfig& attack, const nn::Model& model, int target_class) {
  require_compatible(attack_kind(attack), model);
  require_target(target_class, model);
  GenParams gp = default_gen_params(attack_kind(attack));
  gp.iterations = 0;
  return make_uap(model, target_class, attack, gp);
}

std::vector<Uap> rand_baseline(const Uap& like, std::size_t runs, std::uint64_t seed) {
  if (runs < 1) throw UsageError("random baseline needs at least one run");
  const ClipDomain domain = uap_domain(like);
  const std::size_t n = uap_length(like);
  std::vector<Uap> out;
  out.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    Uap u = like;
    Rng rng(derive_seed(seed, "rand", {r}));
    u.values = uniform_values(n, domain, rng);
    u.origin = UapOrigin::random;
    u.gen.iterations = 0;
    u.gen.seed = seed;
    out.push_back(std::move(u));
  }
  return out;
}

std::pair<std::uint16_t, std::uint16_t> random_port_pair(std::uint64_t flow_id, const PortRange& range,
                                                         std::uint64_t seed) {
  if (range.lo > range.hi) throw UsageError("port range is empty");
  Rng rng(derive_seed(seed, "port", {flow_id}));
  const auto a = static_cast<std::uint16_t>(rng.between(range.lo, range.hi));
  const auto b = static_cast<std::uint16_t>(rng.between(range.lo, range.hi));
  return {a, b};
}

namespace {

void rewrite_ports(Packet& p, std::uint16_t src, std::uint16_t dst) {
  p.tuple.src_port = src;
  p.tuple.dst_port = dst;
  if (p.tl_header.size() >= 4) {
    p.tl_header[0] = static_cast<std::uint8_t>(src >> 8);
    p.tl_header[1] = static_cast<std::uint8_t>(src);
    p.tl_header[2] = static_cast<std::uint8_t>(dst >> 8);
    p.tl_header[3] = static_cast<std::uint8_t>(dst);
  }
}

void require_headers(EncodingKind kind) {
  if (!has_headers(kind)) {
    throw UsageError("port attack needs an encoding with transport headers (PC_HP or FCC_HP), got " +
                     std::string(to_string(kind)));
  }
}

}  // namespace

Flow randomize_ports(const Flow& flow, EncodingKind kind, const PortRange& range, std::uint64_t seed) {
  require_headers(kind);
  const auto [a, b] = random_port_pair(flow.id, range, seed);
  Flow out = flow;
  out.tuple.src_port = a;
  out.tuple.dst_port = b;
  for (Packet& p : out.packets) {
    if (p.direction == Direction::forward) {
      rewrite_ports(p, a, b);
    } else {
      rewrite_ports(p, b, a);
    }
  }
  return out;
}

Packet randomize_ports(const Packet& packet, std::uint64_t flow_id, EncodingKind kind, const PortRange& range,
                       std::uint64_t seed) {
  require_headers(kind);
  const auto [a, b] = random_port_pair(flow_id, range, seed);
  Packet out = packet;
  if (packet.direction == Direction::forward) {
    rewrite_ports(out, a, b);
  } else {
    rewrite_ports(out, b, a);
  }
  return out;
}

// ---- Uap files ------------------------------------------------------------

namespace {

constexpr char kUapMagic[4] = {'A', 'N', 'T', 'U'};
constexpr std::uint16_t kUapVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_uap(const Uap& u) {
  json meta{{"target_class", u.target_class},
            {"encoding",
             {{"kind", to_string(u.encoding.kind)},
              {"n", u.encoding.n},
              {"m", u.encoding.m},
              {"max_pkt_size", u.encoding.max_pkt_size}}},
            {"attack", attack_json(u.attack)},
            {"gen", gen_json(u.gen)},
            {"source_model_id", u.source_model_id},
            {"origin", u.origin == UapOrigin::random ? "random" : "adversarial"}};
  if (u.norm_stats) {
    meta["norm_stats"] = {{"ps_mean", u.norm_stats->ps_mean},
                          {"ps_std", u.norm_stats->ps_std},
                          {"iat_max", u.norm_stats->iat_max}};
  }
  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kUapMagic), 4));
  w.u16(kUapVersion);
  const std::string text = meta.dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.str(text);
  w.u32(static_cast<std::uint32_t>(u.values.size()));
  for (float v : u.values) w.f32(v);
  w.u32(crc32(w.data()));
  return std::move(w.data());
}

Uap deserialize_uap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(kUapMagic, kUapMagic + 4, bytes.begin())) {
    throw DataError("not a perturbation file (bad magic)");
  }
  if (bytes.size() < 10) throw DataError("perturbation file truncated");
  ByteReader tail(bytes.last(4));
  const auto body = bytes.first(bytes.size() - 4);
  if (crc32(body) != tail.u32()) throw DataError("perturbation checksum mismatch");
  ByteReader r(body);
  r.bytes(4);
  if (const auto v = r.u16(); v != kUapVersion) {
    throw DataError("unsupported perturbation format version " + std::to_string(v));
  }
  Uap u;
  try {
    const json j = json::parse(r.str(r.u32()));
    u.target_class = j.at("target_class");
    const auto& e = j.at("encoding");
    u.encoding.kind = parse_encoding_kind(e.at("kind").get<std::string>());
    u.encoding.n = e.at("n");
    u.encoding.m = e.at("m");
    u.encoding.max_pkt_size = e.at("max_pkt_size");
    u.attack = attack_from_json(j.at("attack"));
    u.gen = gen_from_json(j.at("gen"), u.gen);
    u.source_model_id = j.at("source_model_id");
    u.origin = j.at("origin") == "random" ? UapOrigin::random : UapOrigin::adversarial;
    if (j.contains("norm_stats")) {
      const auto& s = j["norm_stats"];
      u.norm_stats = NormStats{s.at("ps_mean"), s.at("ps_std"), s.at("iat_max")};
    }
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad perturbation metadata: ") + ex.what());
  }
  u.values.resize(r.u32());
  for (auto& v : u.values) v = r.f32();
  if (!r.done()) throw DataError("trailing bytes in perturbation file");
  return u;
}

void save_uap(const Uap& uap, const std::filesystem::path& path) { write_file(path, serialize_uap(uap)); }

Uap load_uap(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return deserialize_uap(bytes);
}

}  // namespace ant
