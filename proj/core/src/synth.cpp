#include "ant/synth.hpp"

#include <algorithm>
#include <cmath>

#include "ant/binio.hpp"
#include "ant/pcap.hpp"
#include "ant/rng.hpp"

namespace ant {

namespace {

constexpr std::int64_t kCaptureSpanUs = 3'600'000'000;

// Payloads look encrypted: uniformly random bytes, except that the leading
// record region stays within a band around a class-specific byte level.
struct PayloadStyle {
  double level;  // centre of the band, as a fraction of 255
};

constexpr double kBandWidth = 0.6;

constexpr std::size_t kSkewedBytes = 128;

std::vector<std::uint8_t> payload(Rng& rng, std::size_t n, const PayloadStyle& style) {
  std::vector<std::uint8_t> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double v = i < kSkewedBytes ? style.level + kBandWidth * (u - 0.5) : u;
    b[i] = static_cast<std::uint8_t>(std::min(255.0, 256.0 * v));
  }
  return b;
}

struct Emitter {
  FiveTuple client;  // client -> server orientation
  std::uint32_t seq[2] = {0, 0};
  std::int64_t t = 0;
  std::vector<Packet>* out = nullptr;
  Rng* rng = nullptr;
  const PayloadStyle* style = nullptr;

  void data(bool from_client, std::size_t n);
  void ack(bool from_client) { emit(from_client, {}); }

  void emit(bool from_client, std::vector<std::uint8_t> payload) {
    Packet p;
    p.timestamp_us = t;
    p.tuple = from_client ? client : client.reversed();
    p.direction = from_client ? Direction::forward : Direction::backward;
    if (client.proto == kProtoTcp) {
      ByteWriter w;
      w.u8(static_cast<std::uint8_t>(p.tuple.src_port >> 8));
      w.u8(static_cast<std::uint8_t>(p.tuple.src_port));
      w.u8(static_cast<std::uint8_t>(p.tuple.dst_port >> 8));
      w.u8(static_cast<std::uint8_t>(p.tuple.dst_port));
      const int d = from_client ? 0 : 1;
      for (std::uint32_t v : {seq[d], seq[1 - d]}) {
        for (int s = 24; s >= 0; s -= 8) w.u8(static_cast<std::uint8_t>(v >> s));
      }
      w.u8(0x50);
      w.u8(payload.empty() ? 0x10 : 0x18);
      w.u8(0xfa);
      w.u8(0xf0);
      for (int i = 0; i < 4; ++i) w.u8(0);
      p.tl_header = w.data();
      seq[d] += static_cast<std::uint32_t>(payload.size());
    } else {
      const auto len = static_cast<std::uint16_t>(8 + payload.size());
      p.tl_header = {static_cast<std::uint8_t>(p.tuple.src_port >> 8), static_cast<std::uint8_t>(p.tuple.src_port),
                     static_cast<std::uint8_t>(p.tuple.dst_port >> 8), static_cast<std::uint8_t>(p.tuple.dst_port),
                     static_cast<std::uint8_t>(len >> 8),              static_cast<std::uint8_t>(len),
                     0,                                                0};
    }
    p.payload = std::move(payload);
    out->push_back(std::move(p));
  }
};

std::size_t clamp_size(double v, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(std::clamp(std::lround(v), static_cast<long>(lo), static_cast<long>(hi)));
}

std::int64_t gap(Rng& rng, double mean_us, std::int64_t floor_us = 50) {
  return std::max<std::int64_t>(floor_us, std::llround(rng.exponential(mean_us)));
}

void Emitter::data(bool from_client, std::size_t n) { emit(from_client, payload(*rng, n, *style)); }

template <class T>
T pick(Rng& rng, std::initializer_list<std::pair<T, double>> choices) {
  double u = rng.uniform();
  for (const auto& [v, w] : choices) {
    if (u < w) return v;
    u -= w;
  }
  return std::prev(choices.end())->first;
}

// Opening shared by every application: a client hello, optionally followed
// by early-data records.
void handshake(Emitter& e, Rng& rng) {
  const double rtt = rng.uniform(10'000, 60'000);
  e.data(true, clamp_size(rng.normal(420, 90), 200, 620));
  const std::size_t early = pick<std::size_t>(rng, {{0, 0.4}, {1, 0.35}, {2, 0.25}});
  for (std::size_t i = 0; i < early; ++i) {
    e.t += gap(rng, 500);
    e.data(true, clamp_size(rng.uniform(60, 400), 60, 400));
  }
  e.t += gap(rng, rtt);
}

// Chat: small messages of varied size in either direction, slow and irregular.
void chat_flow(Emitter& e, Rng& rng) {
  const std::size_t count = 5 + rng.below(10);
  bool from_client = true;
  for (std::size_t i = 0; i < count; ++i) {
    e.data(from_client, clamp_size(std::exp(rng.normal(4.8, 0.6)), 20, 900));
    if (rng.uniform() < 0.5) {
      e.t += gap(rng, 400);
      e.ack(!from_client);
    }
    e.t += gap(rng, 300'000);
    if (rng.uniform() < 0.55) from_client = !from_client;
  }
}

// Streaming: a request, then bursts of large server segments acknowledged by
// the client.
void streaming_flow(Emitter& e, Rng& rng) {
  e.data(true, clamp_size(rng.normal(330, 60), 200, 500));
  e.t += gap(rng, 30'000);
  const std::size_t bursts = 1 + rng.below(3);
  for (std::size_t b = 0; b < bursts; ++b) {
    const std::size_t len = 3 + rng.below(5);
    for (std::size_t i = 0; i < len; ++i) {
      e.data(false, clamp_size(rng.uniform(700, 1460), 700, 1460));
      e.t += gap(rng, 1'500);
      if (i % 2 == 1) e.ack(true);
    }
    e.data(true, clamp_size(rng.normal(70, 20), 30, 140));
    e.t += gap(rng, 100'000, 20'000);
  }
}

// File transfer: a request, then a steady stream of full-size server
// segments with occasional client replies.
void file_flow(Emitter& e, Rng& rng) {
  e.data(true, clamp_size(rng.normal(120, 25), 60, 200));
  e.t += gap(rng, 5'000);
  const std::size_t count = 6 + rng.below(12);
  for (std::size_t i = 0; i < count; ++i) {
    e.data(false, clamp_size(rng.normal(1440, 15), 1380, 1460));
    e.t += gap(rng, 1'000);
    if (rng.uniform() < 0.2) {
      e.data(true, clamp_size(rng.normal(60, 15), 20, 120));
      e.t += gap(rng, 800);
    } else if (i % 2 == 1) {
      e.ack(true);
    }
  }
}

// Voice: near-constant frame size, mostly alternating, paced at ~20 ms.
void voip_flow(Emitter& e, Rng& rng) {
  const std::size_t count = 8 + rng.below(12);
  const double frame = rng.uniform(120, 240);
  bool from_client = true;
  for (std::size_t i = 0; i < count; ++i) {
    e.data(from_client, clamp_size(rng.normal(frame, 4), 100, 260));
    e.t += std::max<std::int64_t>(500, std::llround(rng.normal(from_client ? 4'000 : 16'000, 1'500)));
    if (rng.uniform() < 0.85) from_client = !from_client;
  }
}

struct Profile {
  const char* label;
  void (*flow)(Emitter&, Rng&);
  PayloadStyle style;
  std::uint8_t proto;
  std::uint32_t server_net;
  std::initializer_list<std::pair<std::uint16_t, double>> ports;
};

std::uint32_t ip(int a, int b, int c, int d) {
  return (static_cast<std::uint32_t>(a) << 24) | (static_cast<std::uint32_t>(b) << 16) |
         (static_cast<std::uint32_t>(c) << 8) | static_cast<std::uint32_t>(d);
}

}  // namespace

std::vector<SynthClass> synthesize(const SynthConfig& config) {
  const Profile profiles[] = {
      {"chat", chat_flow, {0.41}, kProtoTcp, ip(52, 10, 1, 0), {{5222, 0.5}, {443, 0.35}, {8080, 0.15}}},
      {"streaming", streaming_flow, {0.53}, kProtoTcp, ip(104, 20, 2, 0), {{443, 0.6}, {1935, 0.3}, {8080, 0.1}}},
      {"file_transfer", file_flow, {0.59}, kProtoTcp, ip(34, 30, 3, 0), {{443, 0.4}, {21, 0.3}, {8080, 0.3}}},
      {"voip", voip_flow, {0.47}, kProtoUdp, ip(23, 40, 4, 0), {{3478, 0.45}, {5060, 0.35}, {443, 0.2}}},
  };

  std::vector<SynthClass> out;
  std::uint64_t class_index = 0;
  for (const Profile& prof : profiles) {
    Rng rng(derive_seed(config.seed, "synth", {class_index}));
    SynthClass sc;
    sc.label = prof.label;
    for (std::size_t f = 0; f < config.flows_per_class; ++f) {
      Emitter e;
      e.out = &sc.packets;
      e.rng = &rng;
      e.style = &prof.style;
      e.client.proto = prof.proto;
      e.client.src_ip = ip(192, 168, static_cast<int>(rng.below(4)), 2 + static_cast<int>(rng.below(250)));
      // One client port per flow keeps flows distinct across the capture.
      e.client.src_port = static_cast<std::uint16_t>(20000 + class_index * 5000 + f);
      e.client.dst_ip = prof.server_net | static_cast<std::uint32_t>(1 + rng.below(254));
      e.client.dst_port = pick(rng, prof.ports);
      e.seq[0] = static_cast<std::uint32_t>(rng.next());
      e.seq[1] = static_cast<std::uint32_t>(rng.next());
      e.t = static_cast<std::int64_t>(rng.below(kCaptureSpanUs));
      handshake(e, rng);
      prof.flow(e, rng);
      ++sc.flows;
    }

    // DNS lookups from the same clients; dropped by the background filter.
    const auto dns = static_cast<std::size_t>(config.background_share * static_cast<double>(sc.packets.size()));
    for (std::size_t i = 0; i < dns; ++i) {
      Emitter e;
      e.out = &sc.packets;
      e.client = {ip(192, 168, 0, 2 + static_cast<int>(rng.below(250))),
                  static_cast<std::uint16_t>(1024 + rng.below(60000)), ip(8, 8, 8, 8), 53, kProtoUdp};
      e.t = static_cast<std::int64_t>(rng.below(kCaptureSpanUs));
      std::vector<std::uint8_t> q(static_cast<std::size_t>(30 + rng.below(30)));
      for (auto& b : q) b = static_cast<std::uint8_t>(rng.below(256));
      e.emit(true, std::move(q));
    }

    std::stable_sort(sc.packets.begin(), sc.packets.end(),
                     [](const Packet& a, const Packet& b) { return a.timestamp_us < b.timestamp_us; });
    out.push_back(std::move(sc));
    ++class_index;
  }
  return out;
}

void write_synth_corpus(const std::vector<SynthClass>& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string manifest = "path,label\n";
  for (const auto& c : corpus) {
    const std::string name = c.label + ".pcap";
    write_file(dir / name, write_pcap(c.packets));
    manifest += name + "," + c.label + "\n";
  }
  write_text_file(dir / "manifest.csv", manifest);
}

}  // namespace ant
