#include "ant/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ant/binio.hpp"
#include "ant/error.hpp"
#include "ant/rng.hpp"

namespace ant {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Minimal RFC 4180 field splitter (quoted fields, doubled quotes).
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

int DatasetManifest::label_index(std::string_view label) const {
  auto it = std::find(class_labels.begin(), class_labels.end(), label);
  return it == class_labels.end() ? -1 : static_cast<int>(it - class_labels.begin());
}

DatasetManifest parse_manifest(std::string_view csv, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  std::istringstream in{std::string(csv)};
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (header) {
      if (fields.size() != 2 || fields[0] != "path" || fields[1] != "label") {
        throw DataError("manifest header must be `path,label`");
      }
      header = false;
      continue;
    }
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw DataError("manifest line " + std::to_string(lineno) + ": expected `path,label`");
    }
    std::filesystem::path p = fields[0];
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    if (m.label_index(fields[1]) < 0) m.class_labels.push_back(fields[1]);
    m.entries.push_back({p, fields[1]});
  }
  if (header) throw DataError("manifest is empty");
  if (m.class_labels.size() < 2) throw DataError("manifest needs at least two class labels");
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        path.parent_path());
}

bool BackgroundFilter::keep(const Packet& p) const {
  if (require_payload && p.payload.empty()) return false;
  for (const auto& r : ports) {
    if ((p.tuple.src_port >= r.lo && p.tuple.src_port <= r.hi) ||
        (p.tuple.dst_port >= r.lo && p.tuple.dst_port <= r.hi)) {
      return false;
    }
  }
  return true;
}

std::vector<Packet> filter_background(std::span<const Packet> packets, const BackgroundFilter& filter) {
  std::vector<Packet> out;
  out.reserve(packets.size());
  for (const Packet& p : packets) {
    if (filter.keep(p)) out.push_back(p);
  }
  return out;
}

std::vector<std::vector<std::size_t>> balance(std::span<const std::size_t> class_sizes,
                                              std::size_t target, std::uint64_t seed,
                                              std::span<const std::string> class_names) {
  if (target < 1) throw UsageError("balance target must be at least 1");
  std::vector<std::vector<std::size_t>> out(class_sizes.size());
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const std::size_t n = class_sizes[c];
    if (n == 0) {
      const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
      throw DataError("cannot balance: class '" + name + "' has no samples");
    }
    Rng rng(derive_seed(seed, "balance", {c}));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto& sel = out[c];
    if (n >= target) {
      rng.shuffle(std::span(idx));
      sel.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target));
      std::sort(sel.begin(), sel.end());
    } else {
      for (std::size_t rep = 0; rep < target / n; ++rep) sel.insert(sel.end(), idx.begin(), idx.end());
      rng.shuffle(std::span(idx));
      std::vector<std::size_t> extra(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target % n));
      std::sort(extra.begin(), extra.end());
      sel.insert(sel.end(), extra.begin(), extra.end());
    }
  }
  return out;
}

std::size_t median_class_size(std::span<const std::size_t> class_sizes) {
  if (class_sizes.empty()) return 0;
  std::vector<std::size_t> v(class_sizes.begin(), class_sizes.end());
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : (v[h - 1] + v[h]) / 2;
}

SplitIndices split(std::span<const int> labels, std::size_t class_count,
                   const SplitFractions& fractions, std::uint64_t seed) {
  const double f[3] = {fractions.train, fractions.validation, fractions.test};
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9 || f[0] < 0 || f[1] < 0 || f[2] < 0) {
    throw UsageError("split fractions must be non-negative and sum to 1");
  }

  std::vector<std::vector<std::size_t>> members(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_count) {
      throw DataError("sample " + std::to_string(i) + " has an out-of-range label");
    }
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }

  SplitIndices out;
  std::vector<std::size_t>* dest[3] = {&out.train, &out.validation, &out.test};
  for (std::size_t c = 0; c < class_count; ++c) {
    auto& idx = members[c];
    const std::size_t n = idx.size();
    if (n == 0) continue;
    if (n < 3) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(n) +
                      " samples; at least 3 are needed to stratify");
    }
    // Largest-remainder apportionment, then make sure no split is empty.
    std::size_t cnt[3];
    double rem[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = f[s] * static_cast<double>(n);
      cnt[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      rem[s] = exact - static_cast<double>(cnt[s]);
      assigned += cnt[s];
    }
    while (assigned < n) {
      int best = 0;
      for (int s = 1; s < 3; ++s) {
        if (rem[s] > rem[best]) best = s;
      }
      ++cnt[best];
      rem[best] = -1.0;
      ++assigned;
    }
    for (int s = 0; s < 3; ++s) {
      if (cnt[s] == 0 && f[s] > 0) {
        int donor = static_cast<int>(std::max_element(cnt, cnt + 3) - cnt);
        --cnt[donor];
        ++cnt[s];
      }
    }

    Rng rng(derive_seed(seed, "split", {c}));
    rng.shuffle(std::span(idx));
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      dest[s]->insert(dest[s]->end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                      idx.begin() + static_cast<std::ptrdiff_t>(pos + cnt[s]));
      pos += cnt[s];
    }
  }
  for (auto* d : dest) std::sort(d->begin(), d->end());
  return out;
}

Dataset make_dataset(std::vector<Flow> flows, std::vector<std::string> labels,
                     const IngestOptions& options) {
  Dataset ds;
  ds.labels = std::move(labels);
  ds.fractions = options.fractions;
  ds.seed = options.seed;
  ds.timeout_us = options.timeout_us;
  const std::size_t k = ds.labels.size();
  ds.counts.assign(k, {});

  std::vector<int> flow_labels;
  flow_labels.reserve(flows.size());
  for (const Flow& f : flows) {
    if (!f.label) throw DataError("flow " + std::to_string(f.id) + " has no label");
    flow_labels.push_back(*f.label);
    auto& cc = ds.counts.at(static_cast<std::size_t>(*f.label));
    ++cc.flows;
    cc.packets += f.packets.size();
  }

  const SplitIndices parts = split(flow_labels, k, options.fractions, derive_seed(options.seed, "ingest"));
  for (std::size_t i : parts.validation) ds.validation.push_back(flows[i]);
  for (std::size_t i : parts.test) ds.test.push_back(flows[i]);

  std::vector<std::vector<std::size_t>> train_by_class(k);
  for (std::size_t i : parts.train) train_by_class[static_cast<std::size_t>(flow_labels[i])].push_back(i);
  std::vector<std::size_t> sizes;
  for (const auto& v : train_by_class) sizes.push_back(v.size());
  ds.balance_target = options.balance_target.value_or(median_class_size(sizes));
  const auto chosen = balance(sizes, ds.balance_target, derive_seed(options.seed, "ingest"), ds.labels);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j : chosen[c]) ds.train.push_back(flows[train_by_class[c][j]]);
  }

  for (std::size_t c = 0; c < k; ++c) ds.counts[c].train_before_balance = sizes[c];
  for (const Flow& f : ds.train) ++ds.counts[static_cast<std::size_t>(*f.label)].train;
  for (const Flow& f : ds.validation) ++ds.counts[static_cast<std::size_t>(*f.label)].validation;
  for (const Flow& f : ds.test) ++ds.counts[static_cast<std::size_t>(*f.label)].test;
  return ds;
}

Dataset build_dataset(const DatasetManifest& manifest, const IngestOptions& options, IngestStats* stats) {
  IngestStats local;
  std::vector<Flow> flows;
  for (const auto& entry : manifest.entries) {
    std::vector<std::uint8_t> bytes;
    PcapParseResult parsed;
    try {
      bytes = read_file(entry.capture);
      parsed = parse_pcap(bytes);
    } catch (const DataError& e) {
      throw DataError(entry.capture.string() + ": " + e.what());
    }
    local.pcap.records += parsed.counters.records;
    local.pcap.non_ip += parsed.counters.non_ip;
    local.pcap.ipv6 += parsed.counters.ipv6;
    local.pcap.non_tcp_udp += parsed.counters.non_tcp_udp;
    local.pcap.fragments += parsed.counters.fragments;
    local.pcap.malformed += parsed.counters.malformed;

    auto kept = filter_background(parsed.packets, options.filter);
    local.background_dropped += parsed.packets.size() - kept.size();
    std::stable_sort(kept.begin(), kept.end(),
                     [](const Packet& a, const Packet& b) { return a.timestamp_us < b.timestamp_us; });

    auto file_flows = assemble_flows(kept, options.timeout_us, flows.size());
    const int label = manifest.label_index(entry.label);
    for (Flow& f : file_flows) {
      f.label = label;
      flows.push_back(std::move(f));
    }
  }
  if (stats) *stats = local;
  return make_dataset(std::move(flows), manifest.class_labels, options);
}

namespace {

const char* const kSplitNames[3] = {"train", "validation", "test"};

void encode_record(ByteWriter& w, const Packet& p, int label) {
  ByteWriter rec;
  rec.u16(static_cast<std::uint16_t>(label));
  rec.u64(static_cast<std::uint64_t>(p.timestamp_us));
  rec.u32(p.tuple.src_ip);
  rec.u32(p.tuple.dst_ip);
  rec.u16(p.tuple.src_port);
  rec.u16(p.tuple.dst_port);
  rec.u8(p.tuple.proto);
  rec.u16(static_cast<std::uint16_t>(p.tl_header.size()));
  rec.bytes(p.tl_header);
  rec.u16(static_cast<std::uint16_t>(p.payload.size()));
  rec.bytes(p.payload);
  w.u32(static_cast<std::uint32_t>(rec.data().size()));
  w.bytes(rec.data());
}

json split_json(const std::vector<Flow>& flows) {
  json arr = json::array();
  for (const Flow& f : flows) arr.push_back({f.id, f.packets.size()});
  return arr;
}

std::vector<Flow> decode_split(std::span<const std::uint8_t> bytes, const json& layout,
                               std::int64_t timeout_us, std::size_t class_count,
                               const std::string& name) {
  ByteReader r(bytes);
  std::vector<Flow> flows;
  for (const auto& entry : layout) {
    Flow f;
    f.id = entry.at(0).get<std::uint64_t>();
    f.timeout_us = timeout_us;
    const std::size_t count = entry.at(1).get<std::size_t>();
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t len = r.u32();
      ByteReader rec(r.bytes(len));
      const int label = rec.u16();
      if (static_cast<std::size_t>(label) >= class_count) {
        throw DataError(name + ".bin: label index out of range");
      }
      Packet p;
      p.timestamp_us = static_cast<std::int64_t>(rec.u64());
      p.tuple.src_ip = rec.u32();
      p.tuple.dst_ip = rec.u32();
      p.tuple.src_port = rec.u16();
      p.tuple.dst_port = rec.u16();
      p.tuple.proto = rec.u8();
      auto h = rec.bytes(rec.u16());
      p.tl_header.assign(h.begin(), h.end());
      auto pl = rec.bytes(rec.u16());
      p.payload.assign(pl.begin(), pl.end());
      if (i == 0) {
        f.tuple = p.tuple;
        f.label = label;
      }
      p.direction = p.tuple == f.tuple ? Direction::forward : Direction::backward;
      f.packets.push_back(std::move(p));
    }
    flows.push_back(std::move(f));
  }
  if (!r.done()) throw DataError(name + ".bin has trailing records not described by meta.json");
  return flows;
}

}  // namespace

std::string summary_csv(const Dataset& ds) {
  std::ostringstream out;
  out << "class,flows,packets,train_before_balance,train,validation,test\n";
  for (std::size_t c = 0; c < ds.labels.size(); ++c) {
    const auto& cc = ds.counts[c];
    out << ds.labels[c] << ',' << cc.flows << ',' << cc.packets << ',' << cc.train_before_balance << ','
        << cc.train << ',' << cc.validation << ',' << cc.test << '\n';
  }
  return out.str();
}

void write_bundle(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<Flow>* splits[3] = {&ds.train, &ds.validation, &ds.test};

  json meta;
  meta["format"] = "ant-bundle";
  meta["version"] = 1;
  meta["labels"] = ds.labels;
  meta["seed"] = ds.seed;
  meta["fractions"] = {ds.fractions.train, ds.fractions.validation, ds.fractions.test};
  meta["timeout_us"] = ds.timeout_us;
  meta["balance_target"] = ds.balance_target;
  json counts = json::array();
  for (std::size_t c = 0; c < ds.labels.size(); ++c) {
    const auto& cc = ds.counts.at(c);
    counts.push_back({{"class", ds.labels[c]},
                      {"flows", cc.flows},
                      {"packets", cc.packets},
                      {"train_before_balance", cc.train_before_balance},
                      {"train", cc.train},
                      {"validation", cc.validation},
                      {"test", cc.test}});
  }
  meta["counts"] = counts;

  for (int s = 0; s < 3; ++s) {
    ByteWriter w;
    for (const Flow& f : *splits[s]) {
      for (const Packet& p : f.packets) encode_record(w, p, f.label.value_or(0));
    }
    write_file(dir / (std::string(kSplitNames[s]) + ".bin"), w.data());
    meta["splits"][kSplitNames[s]] = split_json(*splits[s]);
  }
  write_text_file(dir / "meta.json", meta.dump(1) + "\n");
  write_text_file(dir / "summary.csv", summary_csv(ds));
}

Dataset read_bundle(const std::filesystem::path& dir) {
  json meta;
  try {
    auto bytes = read_file(dir / "meta.json");
    meta = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  }
  try {
    if (meta.at("format") != "ant-bundle") throw DataError("not a dataset bundle: " + dir.string());
    Dataset ds;
    ds.labels = meta.at("labels").get<std::vector<std::string>>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    const auto fr = meta.at("fractions").get<std::vector<double>>();
    ds.fractions = {fr.at(0), fr.at(1), fr.at(2)};
    ds.timeout_us = meta.at("timeout_us").get<std::int64_t>();
    ds.balance_target = meta.at("balance_target").get<std::size_t>();
    for (const auto& c : meta.at("counts")) {
      ds.counts.push_back({c.at("flows"), c.at("packets"), c.at("train_before_balance"), c.at("train"),
                           c.at("validation"), c.at("test")});
    }
    std::vector<Flow>* splits[3] = {&ds.train, &ds.validation, &ds.test};
    for (int s = 0; s < 3; ++s) {
      const std::string name = kSplitNames[s];
      auto bytes = read_file(dir / (name + ".bin"));
      *splits[s] = decode_split(bytes, meta.at("splits").at(name), ds.timeout_us, ds.labels.size(), name);
    }
    return ds;
  } catch (const json::exception& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  }
}

}  // namespace ant
