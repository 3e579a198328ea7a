#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include "ant/binio.hpp"
#include "ant/dataset.hpp"
#include "ant/error.hpp"
#include "ant/pcap.hpp"
#include "testutil.hpp"

namespace ant {
namespace {

using test::packet;
using test::tuple;

// ---- hand-built capture bytes -------------------------------------------------

void put16be(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

void put32be(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

void put32le(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> global_header() {
  std::vector<std::uint8_t> b;
  put32le(b, 0xa1b2c3d4);
  b.insert(b.end(), {2, 0, 4, 0});  // version 2.4
  put32le(b, 0);                    // thiszone
  put32le(b, 0);                    // sigfigs
  put32le(b, 65535);                // snaplen
  put32le(b, 1);                    // Ethernet
  return b;
}

void add_record(std::vector<std::uint8_t>& file, std::uint32_t sec, std::uint32_t usec,
                const std::vector<std::uint8_t>& frame) {
  put32le(file, sec);
  put32le(file, usec);
  put32le(file, static_cast<std::uint32_t>(frame.size()));
  put32le(file, static_cast<std::uint32_t>(frame.size()));
  file.insert(file.end(), frame.begin(), frame.end());
}

std::vector<std::uint8_t> ethernet(std::uint16_t ethertype) {
  std::vector<std::uint8_t> f(12, 0x02);
  put16be(f, ethertype);
  return f;
}

std::vector<std::uint8_t> ipv4(std::uint8_t proto, std::uint32_t src, std::uint32_t dst, std::size_t l4_len) {
  std::vector<std::uint8_t> f = ethernet(0x0800);
  f.push_back(0x45);
  f.push_back(0);
  put16be(f, static_cast<std::uint16_t>(20 + l4_len));
  put16be(f, 1);  // id
  put16be(f, 0);  // flags / fragment offset
  f.push_back(64);
  f.push_back(proto);
  put16be(f, 0);  // checksum, not verified
  put32be(f, src);
  put32be(f, dst);
  return f;
}

std::vector<std::uint8_t> udp_frame(std::uint16_t sport, std::uint16_t dport, std::vector<std::uint8_t> payload) {
  auto f = ipv4(kProtoUdp, 0x0a000001, 0x0a000002, 8 + payload.size());
  put16be(f, sport);
  put16be(f, dport);
  put16be(f, static_cast<std::uint16_t>(8 + payload.size()));
  put16be(f, 0);
  f.insert(f.end(), payload.begin(), payload.end());
  return f;
}

std::vector<std::uint8_t> tcp_frame(std::uint16_t sport, std::uint16_t dport, std::vector<std::uint8_t> payload) {
  auto f = ipv4(kProtoTcp, 0x0a000001, 0x0a000002, 20 + payload.size());
  const auto h = test::tcp_header(sport, dport);
  f.insert(f.end(), h.begin(), h.end());
  f.insert(f.end(), payload.begin(), payload.end());
  return f;
}

TEST(ParsePcap, EmptyCapture) {
  const auto r = parse_pcap(global_header());
  EXPECT_TRUE(r.packets.empty());
  EXPECT_EQ(r.counters.records, 0u);
}

TEST(ParsePcap, SingleUdpPacket) {
  auto file = global_header();
  add_record(file, 10, 500, udp_frame(5353, 9999, {1, 2, 3, 4}));
  const auto r = parse_pcap(file);
  ASSERT_EQ(r.packets.size(), 1u);
  const Packet& p = r.packets[0];
  EXPECT_EQ(p.payload, (std::vector<std::uint8_t>{1, 2, 3, 4}));
  EXPECT_EQ(p.tl_header.size(), 8u);
  EXPECT_EQ(p.timestamp_us, 10'000'500);
  EXPECT_EQ(p.tuple, tuple(0x0a000001, 5353, 0x0a000002, 9999, kProtoUdp));
}

TEST(ParsePcap, ArpIsSkippedAndCounted) {
  auto file = global_header();
  auto arp = ethernet(0x0806);
  arp.resize(arp.size() + 28, 0);
  add_record(file, 1, 0, tcp_frame(1000, 443, {7}));
  add_record(file, 1, 1, arp);
  add_record(file, 1, 2, tcp_frame(443, 1000, {8, 9}));
  const auto r = parse_pcap(file);
  EXPECT_EQ(r.packets.size(), 2u);
  EXPECT_EQ(r.counters.skipped(), 1u);
  EXPECT_EQ(r.counters.non_ip, 1u);
  EXPECT_EQ(r.packets[1].tl_header.size(), 20u);
}

TEST(ParsePcap, TruncatedRecordKeepsEarlierPackets) {
  auto file = global_header();
  add_record(file, 1, 0, udp_frame(1, 2, {1}));
  add_record(file, 1, 1, udp_frame(1, 2, {1, 2, 3}));
  file.resize(file.size() - 2);
  try {
    parse_pcap(file);
    FAIL() << "expected truncation error";
  } catch (const PcapTruncatedError& e) {
    EXPECT_EQ(e.partial().packets.size(), 1u);
    EXPECT_GT(e.offset(), 24u);
  }
}

TEST(ParsePcap, BadMagicIsRejected) {
  auto file = global_header();
  file[0] = 0;
  EXPECT_THROW(parse_pcap(file), DataError);
}

TEST(ParsePcap, RoundTripThroughWriter) {
  Rng rng(4);
  std::vector<Packet> in;
  for (int i = 0; i < 50; ++i) {
    const bool udp = rng.below(2);
    Packet p;
    p.timestamp_us = 1'000'000 * i + static_cast<std::int64_t>(rng.below(1'000'000));
    p.tuple = tuple(static_cast<std::uint32_t>(rng.next()), static_cast<std::uint16_t>(rng.next()),
                    static_cast<std::uint32_t>(rng.next()), static_cast<std::uint16_t>(rng.next()),
                    udp ? kProtoUdp : kProtoTcp);
    p.payload = test::random_bytes(rng, rng.below(300));
    if (udp) {
      const auto len = static_cast<std::uint16_t>(8 + p.payload.size());
      p.tl_header = {static_cast<std::uint8_t>(p.tuple.src_port >> 8), static_cast<std::uint8_t>(p.tuple.src_port),
                     static_cast<std::uint8_t>(p.tuple.dst_port >> 8), static_cast<std::uint8_t>(p.tuple.dst_port),
                     static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len), 0, 0};
    } else {
      p.tl_header = test::tcp_header(p.tuple.src_port, p.tuple.dst_port);
    }
    in.push_back(p);
  }
  for (std::uint32_t link : {kLinkEthernet, kLinkRawIpv4}) {
    const auto out = parse_pcap(write_pcap(in, link)).packets;
    ASSERT_EQ(out.size(), in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
      EXPECT_EQ(out[i].timestamp_us, in[i].timestamp_us);
      EXPECT_EQ(out[i].tuple, in[i].tuple);
      EXPECT_EQ(out[i].tl_header, in[i].tl_header);
      EXPECT_EQ(out[i].payload, in[i].payload);
    }
  }
}

// ---- background filter --------------------------------------------------------

TEST(BackgroundFilter, DropsDnsAndNetbiosAndEmptyPayloads) {
  const BackgroundFilter f;
  EXPECT_FALSE(f.keep(packet(0, tuple(1, 40000, 2, 53), {1})));
  EXPECT_FALSE(f.keep(packet(0, tuple(1, 53, 2, 40000), {1})));
  EXPECT_FALSE(f.keep(packet(0, tuple(1, 40000, 2, 138), {1})));
  EXPECT_FALSE(f.keep(packet(0, tuple(1, 40000, 2, 443), {})));
  EXPECT_TRUE(f.keep(packet(0, tuple(1, 40000, 2, 443), {1})));
}

// ---- balancing ----------------------------------------------------------------

TEST(Balance, ExactSizeIsIdentity) {
  const std::size_t sizes[] = {10};
  const auto out = balance(sizes, 10, 1);
  std::vector<std::size_t> want(10);
  for (std::size_t i = 0; i < 10; ++i) want[i] = i;
  EXPECT_EQ(out[0], want);
}

TEST(Balance, SmallClassIsReplicated) {
  const std::size_t sizes[] = {4};
  const auto out = balance(sizes, 10, 1);
  ASSERT_EQ(out[0].size(), 10u);
  std::map<std::size_t, int> mult;
  for (std::size_t i : out[0]) ++mult[i];
  ASSERT_EQ(mult.size(), 4u);
  for (const auto& [i, m] : mult) EXPECT_TRUE(m == 2 || m == 3) << i;
}

TEST(Balance, LargeClassIsSubsampledWithoutReplacement) {
  const std::size_t sizes[] = {20};
  const auto out = balance(sizes, 10, 1);
  ASSERT_EQ(out[0].size(), 10u);
  EXPECT_EQ(std::set<std::size_t>(out[0].begin(), out[0].end()).size(), 10u);
  for (std::size_t i : out[0]) EXPECT_LT(i, 20u);
}

TEST(Balance, EmptyClassIsNamed) {
  const std::size_t sizes[] = {5, 0};
  const std::string names[] = {"chat", "voip"};
  try {
    balance(sizes, 5, 1, names);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("voip"), std::string::npos);
  }
}

TEST(MedianClassSize, OddAndEven) {
  const std::size_t odd[] = {5, 1, 9};
  const std::size_t even[] = {4, 10, 2, 8};
  EXPECT_EQ(median_class_size(odd), 5u);
  EXPECT_EQ(median_class_size(even), 6u);
}

// ---- splitting ----------------------------------------------------------------

TEST(Split, ExactProportions) {
  const std::vector<int> labels(100, 0);
  const auto s = split(labels, 1, {}, 3);
  EXPECT_EQ(s.train.size(), 60u);
  EXPECT_EQ(s.validation.size(), 20u);
  EXPECT_EQ(s.test.size(), 20u);
}

TEST(Split, DeterministicAndPartitioning) {
  Rng rng(5);
  std::vector<int> labels(337);
  for (auto& l : labels) l = static_cast<int>(rng.below(3));
  const auto a = split(labels, 3, {}, 11);
  const auto b = split(labels, 3, {}, 11);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);

  std::vector<std::size_t> all;
  for (const auto* part : {&a.train, &a.validation, &a.test}) all.insert(all.end(), part->begin(), part->end());
  std::sort(all.begin(), all.end());
  ASSERT_EQ(all.size(), labels.size());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);

  const auto c = split(labels, 3, {}, 12);
  EXPECT_NE(a.train, c.train);
}

TEST(Split, TinyClassGetsOneSamplePerSplit) {
  const std::vector<int> labels = {0, 0, 0};
  const auto s = split(labels, 1, {}, 1);
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_EQ(s.validation.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  EXPECT_THROW(split(std::vector<int>{0, 0}, 1, {}, 1), DataError);
}

TEST(Split, BadFractionsAreRejected) {
  EXPECT_THROW(split(std::vector<int>{0, 0, 0}, 1, {0.5, 0.5, 0.5}, 1), UsageError);
}

// ---- manifest and bundle ------------------------------------------------------

TEST(Manifest, ParsesAndResolvesRelativePaths) {
  const auto m = parse_manifest("path,label\na.pcap,chat\n\"b,c.pcap\",voip\nd.pcap,chat\n", "/data");
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.entries[1].capture, std::filesystem::path("/data/b,c.pcap"));
  EXPECT_EQ(m.class_labels, (std::vector<std::string>{"chat", "voip"}));
}

TEST(Manifest, RejectsBadHeaderAndSingleClass) {
  EXPECT_THROW(parse_manifest("file,label\na,b\n"), DataError);
  EXPECT_THROW(parse_manifest("path,label\na.pcap,chat\n"), DataError);
}

// Writes a capture of `flows` short TCP conversations on distinct ports.
std::filesystem::path write_capture(const std::filesystem::path& dir, const std::string& name, int flows,
                                    std::uint8_t fill) {
  std::vector<Packet> ps;
  for (int f = 0; f < flows; ++f) {
    const FiveTuple t = tuple(0x0a000001, static_cast<std::uint16_t>(20000 + f), 0x0a000002, 443);
    for (int i = 0; i < 4; ++i) {
      ps.push_back(packet(f * 10'000'000 + i * 1000, i % 2 ? t.reversed() : t,
                          std::vector<std::uint8_t>(10 + static_cast<std::size_t>(i), fill)));
    }
  }
  // one DNS packet for the background filter
  ps.push_back(packet(1, tuple(0x0a000001, 5555, 0x08080808, 53), {1, 2}));
  std::stable_sort(ps.begin(), ps.end(), [](const Packet& a, const Packet& b) { return a.timestamp_us < b.timestamp_us; });
  const auto path = dir / name;
  write_file(path, write_pcap(ps));
  return path;
}

TEST(BuildDataset, TwoCapturesToBundle) {
  const auto dir = test::scratch_dir("bundle");
  write_capture(dir, "a.pcap", 10, 0xaa);
  write_capture(dir, "b.pcap", 20, 0xbb);
  write_text_file(dir / "manifest.csv", "path,label\na.pcap,alpha\nb.pcap,beta\n");

  IngestOptions opt;
  opt.seed = 5;
  IngestStats stats;
  const Dataset ds = build_dataset(read_manifest(dir / "manifest.csv"), opt, &stats);
  EXPECT_EQ(stats.background_dropped, 2u);
  EXPECT_EQ(ds.labels, (std::vector<std::string>{"alpha", "beta"}));
  EXPECT_EQ(ds.counts[0].flows, 10u);
  EXPECT_EQ(ds.counts[1].flows, 20u);
  EXPECT_EQ(ds.counts[0].train_before_balance, 6u);
  EXPECT_EQ(ds.counts[1].train_before_balance, 12u);
  EXPECT_EQ(ds.balance_target, 9u);
  EXPECT_EQ(ds.counts[0].train, 9u);
  EXPECT_EQ(ds.counts[1].train, 9u);

  // flow-level split: no flow id in two splits
  std::set<std::uint64_t> seen;
  for (const auto* part : {&ds.validation, &ds.test}) {
    for (const Flow& f : *part) EXPECT_TRUE(seen.insert(f.id).second);
  }
  for (const Flow& f : ds.train) EXPECT_EQ(seen.count(f.id), 0u);

  const auto out = dir / "bundle";
  write_bundle(ds, out);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(out)) ++files;
  EXPECT_EQ(files, 5u);  // meta.json, three split files, summary.csv

  const Dataset back = read_bundle(out);
  EXPECT_EQ(back.labels, ds.labels);
  ASSERT_EQ(back.train.size(), ds.train.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    EXPECT_EQ(back.train[i].id, ds.train[i].id);
    EXPECT_EQ(back.train[i].label, ds.train[i].label);
    ASSERT_EQ(back.train[i].packets.size(), ds.train[i].packets.size());
    for (std::size_t p = 0; p < ds.train[i].packets.size(); ++p) {
      EXPECT_EQ(back.train[i].packets[p].payload, ds.train[i].packets[p].payload);
      EXPECT_EQ(back.train[i].packets[p].direction, ds.train[i].packets[p].direction);
    }
  }

  // same seed, identical bytes
  const auto again = dir / "bundle2";
  write_bundle(build_dataset(read_manifest(dir / "manifest.csv"), opt), again);
  for (const char* name : {"meta.json", "train.bin", "validation.bin", "test.bin", "summary.csv"}) {
    EXPECT_EQ(read_file(out / name), read_file(again / name)) << name;
  }
}

TEST(BuildDataset, MissingCaptureIsNamed) {
  const auto dir = test::scratch_dir("missing");
  write_capture(dir, "a.pcap", 3, 1);
  write_text_file(dir / "manifest.csv", "path,label\na.pcap,x\nnope.pcap,y\n");
  try {
    build_dataset(read_manifest(dir / "manifest.csv"), {});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.pcap"), std::string::npos);
  }
}

TEST(ReadBundle, CorruptRecordsAreRejected) {
  const auto dir = test::scratch_dir("corrupt");
  write_capture(dir, "a.pcap", 5, 1);
  write_capture(dir, "b.pcap", 5, 2);
  write_text_file(dir / "manifest.csv", "path,label\na.pcap,x\nb.pcap,y\n");
  write_bundle(build_dataset(read_manifest(dir / "manifest.csv"), {}), dir / "b");
  auto bytes = read_file(dir / "b" / "test.bin");
  bytes.resize(bytes.size() - 3);
  write_file(dir / "b" / "test.bin", bytes);
  EXPECT_THROW(read_bundle(dir / "b"), DataError);
}

}  // namespace
}  // namespace ant
