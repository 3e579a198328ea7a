#include <gtest/gtest.h>

#include "ant/attacks.hpp"
#include "ant/error.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

namespace ant {
namespace {

using test::packet;
using test::tuple;

constexpr float kB = 1.0f / 255.0f;

EncodingParams encoding(EncodingKind kind, std::size_t max_pkt = 60, std::size_t n = 3, std::size_t m = 10) {
  EncodingParams e;
  e.kind = kind;
  e.max_pkt_size = max_pkt;
  e.n = n;
  e.m = m;
  return e;
}

std::vector<float> random_values(Rng& rng, std::size_t n, double lo = 0.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

// ---- clipping -------------------------------------------------------------

TEST(Clip, Examples) {
  const std::vector<float> v = {-0.5f, 0.25f, 1.5f};
  EXPECT_EQ(clip(v, byte_domain()), (std::vector<float>{0.0f, 0.25f, 1.0f}));
  const ClipDomain neg{0.2f, 0.8f, -1.0f};
  const std::vector<float> w = {-0.1f, -0.5f, -0.9f};
  EXPECT_EQ(clip(w, neg), (std::vector<float>{-0.2f, -0.5f, -0.8f}));
}

TEST(Clip, IdempotentAndInsideDomain) {
  Rng rng(1);
  for (int i = 0; i < 10'000; ++i) {
    const float lo = static_cast<float>(rng.uniform(-2, 1));
    const ClipDomain d{lo, lo + static_cast<float>(rng.uniform(0, 2)), 0.0f};
    const auto once = clip(random_values(rng, 8, -4, 4), d);
    ASSERT_EQ(clip(once, d), once);
    for (float v : once) ASSERT_TRUE(v >= d.lower && v <= d.upper);
  }
}

// ---- AdvPad splicing ------------------------------------------------------

Packet two_byte_packet() { return packet(0, tuple(1, 1000, 2, 443), {0xAA, 0xBB}); }

TEST(SpliceAdvPad, PadAtStart) {
  const Packet p = two_byte_packet();  // 22 bytes on the wire
  const std::vector<float> xi = {0.1f, 0.2f, 0.3f};
  const auto s = splice_advpad(p, xi, encoding(EncodingKind::pc_p), {PadLocation::start, 10.0});
  ASSERT_EQ(s.input.size(), 60u);
  EXPECT_EQ(s.input[0], 0.1f);
  EXPECT_EQ(s.input[1], 0.2f);
  EXPECT_FLOAT_EQ(s.input[2], 0xAA * kB);
  EXPECT_FLOAT_EQ(s.input[3], 0xBB * kB);
  EXPECT_EQ(s.input[4], 0.0f);
  ASSERT_EQ(s.taps.size(), 2u);
  EXPECT_EQ(s.taps[1].input_index, 1u);
}

TEST(SpliceAdvPad, PadAtEndAfterHeader) {
  const Packet p = two_byte_packet();
  const std::vector<float> xi = {0.1f, 0.2f, 0.3f};
  const auto s = splice_advpad(p, xi, encoding(EncodingKind::pc_hp), {PadLocation::end, 10.0});
  for (std::size_t i = 0; i < 20; ++i) EXPECT_FLOAT_EQ(s.input[i], p.tl_header[i] * kB);
  EXPECT_FLOAT_EQ(s.input[20], 0xAA * kB);
  EXPECT_FLOAT_EQ(s.input[21], 0xBB * kB);
  EXPECT_EQ(s.input[22], 0.1f);
  EXPECT_EQ(s.input[23], 0.2f);
  EXPECT_EQ(s.input[24], 0.0f);
}

TEST(SpliceAdvPad, PadSizeFloorsOverhead) {
  Packet p = two_byte_packet();
  EXPECT_EQ(pad_size(p, 10.0), 2u);
  EXPECT_EQ(pad_size(p, 4.0), 0u);
  p.payload.resize(80);
  EXPECT_EQ(pad_size(p, 20.0), 20u);
}

TEST(SpliceAdvPad, LeavesPacketContentInPlace) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Packet p = packet(0, tuple(1, 2, 3, 4), test::random_bytes(rng, rng.below(200)));
    const auto enc = encoding(EncodingKind::pc_hp, 256);
    const auto xi = random_values(rng, 256);
    const auto clean = encode_packet(p, enc.kind, enc.max_pkt_size);
    const auto end = splice_advpad(p, xi, enc, {PadLocation::end, 30.0});
    const std::size_t len = std::min<std::size_t>(p.size(), 256);
    for (std::size_t j = 0; j < len; ++j) ASSERT_EQ(end.input[j], clean[j]);
    const auto start = splice_advpad(p, xi, enc, {PadLocation::start, 30.0});
    const std::size_t pad = pad_size(p, 30.0);
    for (std::size_t j = 20; j + pad < 256 && j < len; ++j) ASSERT_EQ(start.input[j + pad], clean[j]);
  }
}

// ---- AdvPay splicing ------------------------------------------------------

Flow three_packet_flow(Direction first) {
  Flow f;
  f.tuple = tuple(1, 1000, 2, 443);
  const Direction second = opposite(first);
  auto tup = [&](Direction d) { return d == Direction::forward ? f.tuple : f.tuple.reversed(); };
  f.packets = {packet(0, tup(first), {1, 2}, first), packet(10, tup(second), {3}, second),
               packet(20, tup(first), {4}, first)};
  return f;
}

TEST(SpliceAdvPay, DummyFollowsFirstForwardPacket) {
  const Flow f = three_packet_flow(Direction::forward);
  const std::vector<float> xi = {0.5f, 0.25f};
  const auto enc = encoding(EncodingKind::fcc_p, 8, 3);
  const auto s = splice_advpay(f, xi, enc, {2, {}});
  const std::vector<float> want = {1 * kB, 2 * kB, 0, 0, 0, 0, 0, 0,   // first packet
                                   0.5f,   0.25f,  0, 0, 0, 0, 0, 0,   // dummy
                                   -3 * kB, 0,     0, 0, 0, 0, 0, 0};  // backward packet
  ASSERT_EQ(s.input.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_FLOAT_EQ(s.input[i], want[i]) << i;
  ASSERT_EQ(s.taps.size(), 2u);
  EXPECT_EQ(s.taps[0].input_index, 8u);
  EXPECT_EQ(s.taps[0].coef, 1.0f);
}

TEST(SpliceAdvPay, DummyTakesDirectionOfPrecedingPacket) {
  const Flow f = three_packet_flow(Direction::backward);
  const std::vector<float> xi = {0.5f};
  const auto enc = encoding(EncodingKind::fcc_p, 8, 3);
  const auto s = splice_advpay(f, xi, enc, {1, {DummyIndexPolicy::Kind::fixed, 1}});
  EXPECT_FLOAT_EQ(s.input[0], -1 * kB);
  EXPECT_FLOAT_EQ(s.input[8], -0.5f);
  EXPECT_FLOAT_EQ(s.input[16], 3 * kB);
  EXPECT_EQ(s.taps[0].coef, -1.0f);
}

TEST(SpliceAdvPay, HeaderPrecedesDummyPayload) {
  const Flow f = three_packet_flow(Direction::forward);
  const std::vector<float> xi = {0.5f, 0.25f};
  const auto s = splice_advpay(f, xi, encoding(EncodingKind::fcc_hp, 60, 3), {2, {}});
  for (std::size_t i = 0; i < 20; ++i) EXPECT_FLOAT_EQ(s.input[60 + i], f.packets[0].tl_header[i] * kB);
  EXPECT_FLOAT_EQ(s.input[80], 0.5f);
  EXPECT_EQ(s.taps[0].input_index, 80u);
}

TEST(SpliceAdvPay, IndexOutsideWindowOrFlowIsAnError) {
  const Flow f = three_packet_flow(Direction::forward);
  const std::vector<float> xi = {0.5f};
  EXPECT_THROW(splice_advpay(f, xi, encoding(EncodingKind::fcc_p, 8, 3), {1, {DummyIndexPolicy::Kind::fixed, 3}}),
               DataError);
  EXPECT_THROW(dummy_slot(f, {DummyIndexPolicy::Kind::fixed, 5}, 10), DataError);
  EXPECT_EQ(dummy_slot(f, {DummyIndexPolicy::Kind::fixed, 3}, 10), 3u);
  Flow backward_only = f;
  for (auto& p : backward_only.packets) p.direction = Direction::backward;
  EXPECT_THROW(dummy_slot(backward_only, {}, 10), DataError);
}

TEST(SpliceAdvPay, EarlierSlotsMatchCleanEncoding) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Flow f = test::random_flow(rng, 3 + rng.below(15));
    const auto enc = encoding(EncodingKind::fcc_hp, 100, 10);
    const auto clean = encode_flow_content(f, enc.kind, enc.n, enc.max_pkt_size);
    const auto s = splice_advpay(f, random_values(rng, 40), enc, {40, {}});
    const std::size_t k = dummy_slot(f, {}, enc.n);
    for (std::size_t j = 0; j < k * 100; ++j) ASSERT_EQ(s.input[j], clean[j]);
    for (std::size_t j = (k + 1) * 100; j < s.input.size(); ++j) ASSERT_EQ(s.input[j], clean[j - 100]);
  }
}

// ---- AdvBurst splicing ----------------------------------------------------

// Directions f f b f with sizes 120, 220, 320, 420 and 1 ms, 2 ms, 3 ms gaps.
Flow burst_flow() {
  Flow f;
  f.tuple = tuple(1, 1000, 2, 443);
  const int dirs[] = {1, 1, -1, 1};
  const std::int64_t times[] = {0, 1000, 3000, 6000};
  for (int i = 0; i < 4; ++i) {
    const auto d = dirs[i] > 0 ? Direction::forward : Direction::backward;
    f.packets.push_back(packet(times[i], d == Direction::forward ? f.tuple : f.tuple.reversed(),
                               std::vector<std::uint8_t>(100 + 100 * static_cast<std::size_t>(i)), d));
  }
  return f;
}

const NormStats kStats{300.0, 100.0, 10'000.0};

TEST(SpliceAdvBurst, PacketSizeLayout) {
  const std::vector<float> xi = {0.5f, 0.75f};
  AdvBurstConfig cfg{2, {}};
  const auto s = splice_advburst(burst_flow(), xi, encoding(EncodingKind::ftsc_ps, 1500, 3, 8), cfg, kStats);
  ASSERT_TRUE(s);
  const std::vector<float> want = {-1.8f, -0.8f, 0.5f, 0.75f, -0.2f, 1.2f, 0.0f, 0.0f};
  ASSERT_EQ(s->input.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(s->input[i], want[i], 1e-6) << i;
  EXPECT_EQ(s->taps[0].input_index, 2u);
}

TEST(SpliceAdvBurst, InterArrivalLayoutAtJunction) {
  const std::vector<float> xi = {0.5f, 0.75f};
  AdvBurstConfig cfg{2, {BurstPolicy::Kind::first_backward, 0}};
  const auto s = splice_advburst(burst_flow(), xi, encoding(EncodingKind::ftsc_iat, 1500, 3, 8), cfg, kStats);
  ASSERT_TRUE(s);
  // iat k leads into packet k+1 and carries that packet's direction; the
  // dummies sit between packet 2 and packet 3, so the 3 ms gap follows them
  auto n = [](double us) { return static_cast<float>(normalize_iat(us, kStats)); };
  const std::vector<float> want = {n(1000), -n(2000), -0.5f, -0.75f, n(3000), 0.0f, 0.0f};
  ASSERT_EQ(s->input.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(s->input[i], want[i], 1e-6) << i;
  EXPECT_EQ(s->taps[1].coef, -1.0f);
}

TEST(SpliceAdvBurst, MissingBurstIsSkipped) {
  Flow f = burst_flow();
  for (auto& p : f.packets) p.direction = Direction::forward;
  const std::vector<float> xi = {0.5f};
  AdvBurstConfig cfg{1, {BurstPolicy::Kind::first_backward, 0}};
  EXPECT_FALSE(splice_advburst(f, xi, encoding(EncodingKind::ftsc_ps), cfg, kStats));
  EXPECT_FALSE(BurstPolicy({BurstPolicy::Kind::fixed, 2}).resolve(split_bursts(f)));
}

TEST(SpliceAdvBurst, PrefixMatchesCleanEncoding) {
  Rng rng(4);
  for (EncodingKind k : {EncodingKind::ftsc_ps, EncodingKind::ftsc_iat}) {
    for (int i = 0; i < 100; ++i) {
      const Flow f = test::random_flow(rng, 2 + rng.below(30));
      const auto enc = encoding(k, 1500, 3, 20);
      AdvBurstConfig cfg{5, default_burst_policy(k)};
      const auto s = splice_advburst(f, random_values(rng, 5, 0.0, 0.1), enc, cfg, kStats);
      if (!s) continue;
      const auto clean = encode_flow_timeseries(f, k, enc.m, kStats);
      const std::size_t ins = s->taps.front().input_index;
      for (std::size_t j = 0; j < ins; ++j) ASSERT_EQ(s->input[j], clean[j]);
      for (std::size_t j = ins + 5; j < s->input.size(); ++j) ASSERT_EQ(s->input[j], clean[j - 5]);
    }
  }
}

// ---- gradients through the splice ----------------------------------------

template <class SpliceFn>
void check_xi_gradient(const nn::Model& model, std::size_t items, std::vector<float> xi, SpliceFn&& splice) {
  std::vector<Spliced> batch;
  for (std::size_t i = 0; i < items; ++i) batch.push_back(splice(i, xi));
  std::vector<std::span<const float>> xs;
  for (const auto& s : batch) xs.emplace_back(s.input);
  const std::vector<int> ys(items, 1);
  const auto g = nn::loss_and_grads(model, xs, ys, nn::Want::inputs);
  const auto analytic = xi_gradient(batch, g.inputs, xi.size());

  const test::ReferenceNet ref(model);
  auto loss = [&](std::span<const float> x) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < items; ++i) {
      const auto s = splice(i, x);
      rows.emplace_back(s.input.begin(), s.input.end());
    }
    return ref.loss(rows, ys);
  };
  for (std::size_t j = 0; j < xi.size(); ++j) {
    const double fd = test::central_difference(loss, xi, j, 1e-5);
    EXPECT_LE(test::rel_error(analytic[j], fd), 1e-3) << j << " analytic " << analytic[j] << " numeric " << fd;
  }
}

nn::Model small_cnn(std::size_t input, std::uint64_t seed) {
  return nn::init_model({{nn::LayerSpec::conv1d(4, 5, 2), nn::LayerSpec::relu(), nn::LayerSpec::flatten(),
                          nn::LayerSpec::dense(3), nn::LayerSpec::softmax()},
                         input,
                         3,
                         nn::ArchFamily::cnn1d},
                        seed);
}

TEST(XiGradient, AdvPadMatchesFiniteDifferences) {
  Rng rng(5);
  std::vector<Packet> ps;
  for (int i = 0; i < 4; ++i) ps.push_back(packet(0, tuple(1, 2, 3, 4), test::random_bytes(rng, 60 + rng.below(40))));
  const auto enc = encoding(EncodingKind::pc_hp, 80);
  check_xi_gradient(small_cnn(80, 5), ps.size(), random_values(rng, 80), [&](std::size_t i, std::span<const float> x) {
    return splice_advpad(ps[i], x, enc, {PadLocation::start, 20.0});
  });
}

TEST(XiGradient, AdvPayMatchesFiniteDifferences) {
  Rng rng(6);
  std::vector<Flow> flows;
  for (int i = 0; i < 4; ++i) flows.push_back(test::random_flow(rng, 6, 40));
  const auto enc = encoding(EncodingKind::fcc_p, 60, 4);
  check_xi_gradient(small_cnn(240, 6), flows.size(), random_values(rng, 30),
                    [&](std::size_t i, std::span<const float> x) { return splice_advpay(flows[i], x, enc, {30, {}}); });
}

TEST(XiGradient, AdvBurstMatchesFiniteDifferences) {
  Rng rng(7);
  for (EncodingKind k : {EncodingKind::ftsc_ps, EncodingKind::ftsc_iat}) {
    std::vector<Flow> flows;
    while (flows.size() < 4) {
      Flow f = test::random_flow(rng, 12);
      if (split_bursts(f).size() > 2) flows.push_back(std::move(f));
    }
    const auto enc = encoding(k, 1500, 3, 20);
    AdvBurstConfig cfg{3, default_burst_policy(k)};
    check_xi_gradient(small_cnn(enc.input_length(), 7), flows.size(), random_values(rng, 3),
                      [&](std::size_t i, std::span<const float> x) { return *splice_advburst(flows[i], x, enc, cfg, kStats); });
  }
}

// ---- generation -----------------------------------------------------------

nn::Model linear_with(EncodingParams enc, std::uint64_t seed, std::size_t k = 3) {
  nn::Model m = test::linear_model(enc.input_length(), k, seed);
  m.encoding = enc;
  return m;
}

// Expected gradient of the mean target-class cross-entropy of a linear
// softmax model with respect to the spliced coordinates.
std::vector<double> linear_xi_gradient(const nn::Model& m, std::span<const Spliced> batch, int target,
                                       std::size_t xi_size) {
  const std::size_t k = m.class_count();
  const auto& w = m.params[0].weights;
  std::vector<double> out(xi_size, 0.0);
  for (const auto& s : batch) {
    std::vector<double> z(m.params[0].bias.begin(), m.params[0].bias.end());
    for (std::size_t i = 0; i < s.input.size(); ++i)
      for (std::size_t c = 0; c < k; ++c) z[c] += w[i * k + c] * s.input[i];
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    for (const auto& t : s.taps) {
      double d = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        d += w[t.input_index * k + c] * (std::exp(z[c] - mx) / sum - (static_cast<int>(c) == target ? 1.0 : 0.0));
      }
      out[t.xi_index] += t.coef * d / static_cast<double>(batch.size());
    }
  }
  return out;
}

TEST(GenAdvPad, OneStepOnLinearModelIsEpsilonTimesGradient) {
  Rng rng(8);
  std::vector<Packet> ps;
  for (int i = 0; i < 5; ++i) ps.push_back(packet(0, tuple(1, 2, 3, 4), test::random_bytes(rng, 40 + rng.below(60))));
  const auto enc = encoding(EncodingKind::pc_p, 64);
  const nn::Model m = linear_with(enc, 8);
  const AdvPadConfig cfg{PadLocation::end, 30.0};
  GenParams gp{0, 16, 0.5, 3, UpdateRule::gradient};
  const Uap init = gen_advpad(ps, 1, m, cfg, gp);
  ASSERT_EQ(init.values.size(), 64u);
  gp.iterations = 1;
  const Uap one = gen_advpad(ps, 1, m, cfg, gp);

  std::vector<Spliced> batch;
  for (const auto& p : ps) batch.push_back(splice_advpad(p, init.values, enc, cfg));
  const auto g = linear_xi_gradient(m, batch, 1, 64);
  for (std::size_t j = 0; j < 64; ++j) {
    const double want = std::clamp(init.values[j] + 0.5 * g[j], 0.0, 1.0);
    EXPECT_NEAR(one.values[j], want, 1e-5) << j;
  }
}

TEST(GenAdvPay, OneStepOnLinearModelIsEpsilonTimesGradient) {
  Rng rng(9);
  std::vector<Flow> flows;
  for (int i = 0; i < 6; ++i) flows.push_back(test::random_flow(rng, 5, 50));
  const auto enc = encoding(EncodingKind::fcc_p, 60, 4);
  const nn::Model m = linear_with(enc, 9);
  const AdvPayConfig cfg{20, {}};
  GenParams gp{0, 16, 2.0, 3, UpdateRule::gradient};
  EXPECT_EQ(gen_advpay(flows, 0, m, cfg, gp).values, std::vector<float>(20, 0.0f));
  gp.iterations = 1;
  const Uap one = gen_advpay(flows, 0, m, cfg, gp);

  const std::vector<float> zero(20, 0.0f);
  std::vector<Spliced> batch;
  for (const auto& f : flows) batch.push_back(splice_advpay(f, zero, enc, cfg));
  const auto g = linear_xi_gradient(m, batch, 0, 20);
  bool moved = false;
  for (std::size_t j = 0; j < 20; ++j) {
    EXPECT_NEAR(one.values[j], std::clamp(2.0 * g[j], 0.0, 1.0), 1e-5) << j;
    moved = moved || one.values[j] != 0.0f;
  }
  EXPECT_TRUE(moved);
}

TEST(GenAdvPad, SignUpdateRaisesTargetLoss) {
  Rng rng(10);
  std::vector<Packet> ps;
  for (int i = 0; i < 30; ++i) ps.push_back(packet(0, tuple(1, 2, 3, 4), test::random_bytes(rng, 100 + rng.below(100))));
  const auto enc = encoding(EncodingKind::pc_hp, 256);
  const nn::Model m = linear_with(enc, 10);
  std::vector<double> losses;
  const GenParams gp{50, 8, 0.05, 1, UpdateRule::sign};
  const Uap u = gen_advpad(ps, 2, m, {PadLocation::start, 40.0}, gp,
                           [&](std::size_t, double loss, std::span<const float>) { losses.push_back(loss); });
  ASSERT_EQ(losses.size(), 50u);
  EXPECT_GT(losses.back(), losses.front());
  for (float v : u.values) EXPECT_TRUE(v >= 0.0f && v <= 1.0f);
}

// A small step along the gradient, over a batch holding every item, must not
// lower the loss. Every perturbation the hook sees must already be clipped.
// The float loss cannot resolve such steps, so each traced perturbation is
// re-scored in double precision.
struct AscentTrace {
  std::vector<double> losses;
  std::vector<std::vector<float>> xis;
  std::size_t outside = 0;
};

IterationHook trace_into(AscentTrace& t, const ClipDomain& d) {
  return [&t, d](std::size_t, double loss, std::span<const float> xi) {
    t.losses.push_back(loss);
    t.xis.emplace_back(xi.begin(), xi.end());
    for (float v : xi) t.outside += !(v >= d.lower && v <= d.upper);
  };
}

template <class SpliceFn>
void expect_ascent(const AscentTrace& t, const nn::Model& m, std::size_t items, SpliceFn&& splice) {
  ASSERT_GE(t.xis.size(), 2u);
  EXPECT_EQ(t.outside, 0u);
  const test::ReferenceNet ref(m);
  const std::vector<int> ys(items, 1);
  std::vector<double> j;
  for (const auto& xi : t.xis) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < items; ++i) {
      const auto s = splice(i, xi);
      if (s) rows.emplace_back(s->input.begin(), s->input.end());
    }
    j.push_back(ref.loss(rows, std::vector<int>(rows.size(), 1)));
  }
  for (std::size_t i = 1; i < j.size(); ++i) EXPECT_GE(j[i], j[i - 1] - 1e-8) << i;
  EXPECT_GT(j.back(), j.front());
}

TEST(Ascent, SmallStepNeverLowersTargetLoss) {
  Rng rng(12);
  std::vector<Packet> ps;
  for (int i = 0; i < 8; ++i) ps.push_back(packet(0, tuple(1, 2, 3, 4), test::random_bytes(rng, 40 + rng.below(60))));
  std::vector<Flow> flows;
  while (flows.size() < 8) {
    Flow f = test::random_flow(rng, 12, 300);
    if (split_bursts(f).size() > 3) flows.push_back(std::move(f));
  }
  const GenParams gp{6, 64, 1e-3, 4, UpdateRule::gradient};
  {
    AscentTrace t;
    const auto enc = encoding(EncodingKind::pc_hp, 100);
    const AdvPadConfig cfg{PadLocation::start, 40.0};
    nn::Model m = small_cnn(100, 1);
    m.encoding = enc;
    gen_advpad(ps, 1, m, cfg, gp, trace_into(t, byte_domain()));
    expect_ascent(t, m, ps.size(), [&](std::size_t i, std::span<const float> xi) {
      return std::optional(splice_advpad(ps[i], xi, enc, cfg));
    });
  }
  {
    AscentTrace t;
    const auto enc = encoding(EncodingKind::fcc_p, 60, 4);
    const AdvPayConfig cfg{30, {}};
    nn::Model m = small_cnn(240, 2);
    m.encoding = enc;
    gen_advpay(flows, 1, m, cfg, gp, trace_into(t, byte_domain()));
    expect_ascent(t, m, flows.size(), [&](std::size_t i, std::span<const float> xi) {
      return std::optional(splice_advpay(flows[i], xi, enc, cfg));
    });
  }
  const NormStats stats = fit_norm_stats(flows);
  for (EncodingKind k : {EncodingKind::ftsc_ps, EncodingKind::ftsc_iat}) {
    AscentTrace t;
    const auto enc = encoding(k, 1500, 3, 30);
    const AdvBurstConfig cfg{4, default_burst_policy(k)};
    nn::Model m = small_cnn(enc.input_length(), 3);
    m.encoding = enc;
    m.norm_stats = stats;
    gen_advburst(flows, 1, m, cfg, gp, trace_into(t, burst_domain(k, stats, 1500)));
    expect_ascent(t, m, flows.size(), [&](std::size_t i, std::span<const float> xi) {
      return splice_advburst(flows[i], xi, enc, cfg, stats);
    });
  }
}

TEST(Ascent, SignUpdatesStayInsideDomain) {
  Rng rng(13);
  std::vector<Flow> flows;
  for (int i = 0; i < 10; ++i) flows.push_back(test::random_flow(rng, 12, 300));
  const NormStats stats = fit_norm_stats(flows);
  for (EncodingKind k : {EncodingKind::ftsc_ps, EncodingKind::ftsc_iat}) {
    AscentTrace t;
    const auto enc = encoding(k, 1500, 3, 30);
    nn::Model m = small_cnn(enc.input_length(), 5);
    m.encoding = enc;
    m.norm_stats = stats;
    // a large step pushes values against both bounds
    gen_advburst(flows, 0, m, {6, default_burst_policy(k)}, {40, 4, 0.5, 6, UpdateRule::sign},
                 trace_into(t, burst_domain(k, stats, 1500)));
    EXPECT_EQ(t.losses.size(), 40u);
    EXPECT_EQ(t.outside, 0u);
  }
}

TEST(GenAdvPad, ZeroPadEverywhereIsAUsageError) {
  const std::vector<Packet> ps = {two_byte_packet()};
  const auto enc = encoding(EncodingKind::pc_p);
  const nn::Model m = linear_with(enc, 1);
  EXPECT_THROW(gen_advpad(ps, 0, m, {PadLocation::start, 1.0}, {1, 8, 0.1, 0, UpdateRule::gradient}), UsageError);
}

TEST(GenAdvPay, IncompatibleEncodingIsRejected) {
  const auto enc = encoding(EncodingKind::pc_p);
  const nn::Model m = linear_with(enc, 1);
  const std::vector<Flow> flows = {three_packet_flow(Direction::forward)};
  EXPECT_THROW(gen_advpay(flows, 0, m, {10, {}}, {}), UsageError);
  EXPECT_FALSE(compatible(AttackKind::adv_burst, EncodingKind::pc_hp));
  EXPECT_TRUE(compatible(AttackKind::adv_pay, EncodingKind::fcc_hp));
}

TEST(GenAdvBurst, ValuesDecodeIntoDummyRanges) {
  Rng rng(11);
  std::vector<Flow> flows;
  for (int i = 0; i < 20; ++i) flows.push_back(test::random_flow(rng, 10 + rng.below(10), 300));
  const NormStats stats = fit_norm_stats(flows);
  for (EncodingKind k : {EncodingKind::ftsc_ps, EncodingKind::ftsc_iat}) {
    auto enc = encoding(k, 1500, 3, 20);
    nn::Model m = linear_with(enc, 11, 2);
    m.norm_stats = stats;
    const Uap u = gen_advburst(flows, 0, m, {4, default_burst_policy(k)}, {30, 8, 0.1, 2, UpdateRule::sign});
    ASSERT_EQ(u.values.size(), 4u);
    for (float v : u.values) {
      if (k == EncodingKind::ftsc_iat) {
        const auto us = decode_iat(v, stats);
        EXPECT_GE(us, kDummyMinIatUs - 1);
        EXPECT_LE(us, kDummyMaxIatUs + 1);
      } else {
        const double size = decode_ps(v, stats);
        EXPECT_GE(size, kDummyMinSize - 1e-3);
        EXPECT_LE(size, 1500 + 1e-3);
      }
    }
    // materialized dummies re-encode to the same input
    for (const Flow& f : flows) {
      const auto applied = apply_advburst(f, u);
      const auto again = encode_flow_timeseries(materialize_advburst(f, u), k, enc.m, stats);
      ASSERT_EQ(applied.size(), again.size());
      for (std::size_t i = 0; i < applied.size(); ++i) ASSERT_NEAR(applied[i], again[i], 0.01) << i;
    }
  }
}

// ---- materialization ------------------------------------------------------

TEST(Materialize, AdvPadAndAdvPayMatchApplied) {
  Rng rng(12);
  const auto pc = encoding(EncodingKind::pc_hp, 300);
  Uap pad = uap_template(AdvPadConfig{PadLocation::start, 25.0}, linear_with(pc, 1), 0);
  pad.values = random_values(rng, 300);
  const auto fcc = encoding(EncodingKind::fcc_hp, 300, 5);
  Uap pay = uap_template(AdvPayConfig{64, {}}, linear_with(fcc, 1), 0);
  pay.values = random_values(rng, 64);
  for (int i = 0; i < 50; ++i) {
    const Flow f = test::random_flow(rng, 4 + rng.below(6), 200);
    const auto a = apply_advpad(f.packets[0], pad);
    const auto b = encode_packet(materialize_advpad(f.packets[0], pad), pc.kind, pc.max_pkt_size);
    for (std::size_t j = 0; j < a.size(); ++j) ASSERT_NEAR(a[j], b[j], 0.5f / 255.0f + 1e-6f);
    const auto c = apply_advpay(f, pay);
    const auto d = encode_flow_content(materialize_advpay(f, pay), fcc.kind, fcc.n, fcc.max_pkt_size);
    for (std::size_t j = 0; j < c.size(); ++j) ASSERT_NEAR(c[j], d[j], 0.5f / 255.0f + 1e-6f);
  }
}

// ---- random baseline and ports ---------------------------------------------

TEST(RandBaseline, DomainShapeAndReproducibility) {
  auto enc = encoding(EncodingKind::ftsc_iat, 1500, 3, 20);
  nn::Model m = linear_with(enc, 1, 2);
  m.norm_stats = kStats;
  const Uap like = uap_template(AdvBurstConfig{5, default_burst_policy(enc.kind)}, m, 1);
  const auto a = rand_baseline(like, 4, 99);
  const auto b = rand_baseline(like, 4, 99);
  const auto c = rand_baseline(like, 1, 100);
  const ClipDomain d = uap_domain(like);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t r = 0; r < a.size(); ++r) {
    EXPECT_EQ(a[r].values, b[r].values);
    EXPECT_EQ(a[r].origin, UapOrigin::random);
    ASSERT_EQ(a[r].values.size(), 5u);
    for (float v : a[r].values) EXPECT_TRUE(v >= d.lower && v <= d.upper);
  }
  EXPECT_NE(a[0].values, a[1].values);
  EXPECT_NE(a[0].values, c[0].values);
  EXPECT_THROW(rand_baseline(like, 0, 1), UsageError);

  const auto pc = encoding(EncodingKind::pc_p, 100);
  EXPECT_EQ(rand_baseline(uap_template(AdvPadConfig{}, linear_with(pc, 1), 0), 1, 1)[0].values.size(), 100u);
}

TEST(Ports, RequireHeaderEncoding) {
  const Flow f = three_packet_flow(Direction::forward);
  EXPECT_THROW(randomize_ports(f, EncodingKind::pc_p, {}, 1), UsageError);
  EXPECT_THROW(randomize_ports(f, EncodingKind::fcc_p, {}, 1), UsageError);
  EXPECT_THROW(random_port_pair(1, {2000, 1000}, 1), UsageError);
}

TEST(Ports, RewriteOnlyPortFieldsWithinRange) {
  Rng rng(13);
  const PortRange range{20'000, 20'100};
  for (int i = 0; i < 100; ++i) {
    Flow f = test::random_flow(rng, 2 + rng.below(10));
    f.id = static_cast<std::uint64_t>(i);
    const Flow g = randomize_ports(f, EncodingKind::fcc_hp, range, 5);
    const auto [a, b] = random_port_pair(f.id, range, 5);
    EXPECT_EQ(g.tuple.src_port, a);
    EXPECT_EQ(g.tuple.dst_port, b);
    for (std::size_t j = 0; j < f.packets.size(); ++j) {
      const Packet& p = g.packets[j];
      const auto& h = p.tl_header;
      const std::uint16_t sport = static_cast<std::uint16_t>(h[0] << 8 | h[1]);
      const std::uint16_t dport = static_cast<std::uint16_t>(h[2] << 8 | h[3]);
      ASSERT_GE(sport, range.lo);
      ASSERT_LE(sport, range.hi);
      EXPECT_EQ(sport, p.tuple.src_port);
      EXPECT_EQ(dport, p.tuple.dst_port);
      EXPECT_EQ(p.direction == Direction::forward ? sport : dport, a);
      EXPECT_TRUE(std::equal(h.begin() + 4, h.end(), f.packets[j].tl_header.begin() + 4));
      EXPECT_EQ(p.payload, f.packets[j].payload);
      EXPECT_EQ(p.timestamp_us, f.packets[j].timestamp_us);
    }
    EXPECT_EQ(randomize_ports(f.packets[0], f.id, EncodingKind::pc_hp, range, 5).tl_header, g.packets[0].tl_header);
  }
}

// ---- perturbation files ---------------------------------------------------

Uap sample_uap() {
  auto enc = encoding(EncodingKind::ftsc_ps, 1500, 3, 20);
  nn::Model m = linear_with(enc, 1, 2);
  m.norm_stats = kStats;
  Uap u = uap_template(AdvBurstConfig{3, {BurstPolicy::Kind::fixed, 2}}, m, 1);
  u.values = {0.5f, -1.25f, 3.0f};
  u.source_model_id = "abc123";
  u.gen.update = UpdateRule::sign;
  return u;
}

TEST(UapFile, RoundTrip) {
  const Uap u = sample_uap();
  const Uap back = deserialize_uap(serialize_uap(u));
  EXPECT_EQ(back.values, u.values);
  EXPECT_EQ(back.target_class, 1);
  EXPECT_EQ(back.source_model_id, "abc123");
  EXPECT_EQ(back.gen.update, UpdateRule::sign);
  ASSERT_TRUE(std::holds_alternative<AdvBurstConfig>(back.attack));
  EXPECT_EQ(std::get<AdvBurstConfig>(back.attack).selected_burst.index, 2u);
  ASSERT_TRUE(back.norm_stats);
  EXPECT_EQ(back.norm_stats->iat_max, kStats.iat_max);
  EXPECT_EQ(serialize_uap(back), serialize_uap(u));

  const auto dir = test::scratch_dir("uap");
  save_uap(u, dir / "u.antu");
  EXPECT_EQ(load_uap(dir / "u.antu").values, u.values);
}

TEST(UapFile, CorruptionIsDetected) {
  auto bytes = serialize_uap(sample_uap());
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  EXPECT_THROW(deserialize_uap(flipped), DataError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(deserialize_uap(truncated), DataError);
  auto magic = bytes;
  magic[1] = 'X';
  EXPECT_THROW(deserialize_uap(magic), DataError);
}

TEST(UapFile, WrongAttackKindIsRejected) {
  const Uap u = sample_uap();
  EXPECT_THROW(apply_advpad(two_byte_packet(), u), UsageError);
}

}  // namespace
}  // namespace ant
