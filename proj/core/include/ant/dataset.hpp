#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ant/pcap.hpp"
#include "ant/traffic.hpp"

namespace ant {

struct ManifestEntry {
  std::filesystem::path capture;
  std::string label;
};

// One capture file per entry, one label per file. Labels are ordered by first
// appearance in the manifest.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_labels;

  int label_index(std::string_view label) const;
};

// CSV with header `path,label`; relative paths resolve against `base_dir`.
DatasetManifest parse_manifest(std::string_view csv, const std::filesystem::path& base_dir = {});
DatasetManifest read_manifest(const std::filesystem::path& path);

struct PortSpan {
  std::uint16_t lo;
  std::uint16_t hi;
};

// Default drops DNS and NETBIOS on either side, plus payload-less packets.
struct BackgroundFilter {
  std::vector<PortSpan> ports = {{53, 53}, {137, 139}};
  bool require_payload = true;

  bool keep(const Packet& p) const;
};

std::vector<Packet> filter_background(std::span<const Packet> packets,
                                      const BackgroundFilter& filter = {});

// Chooses, per class, which member indices make up a class of exactly
// `target` samples: larger classes are subsampled without replacement,
// smaller ones are replicated whole and topped up with a seeded random
// remainder. Throws DataError naming an empty class.
std::vector<std::vector<std::size_t>> balance(std::span<const std::size_t> class_sizes,
                                              std::size_t target, std::uint64_t seed,
                                              std::span<const std::string> class_names = {});

std::size_t median_class_size(std::span<const std::size_t> class_sizes);

struct SplitFractions {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Stratified, seeded three-way split of sample indices. Every class needs at
// least three members so each split receives one.
SplitIndices split(std::span<const int> labels, std::size_t class_count,
                   const SplitFractions& fractions, std::uint64_t seed);

struct ClassCounts {
  std::size_t flows = 0;
  std::size_t packets = 0;
  std::size_t train_before_balance = 0;
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

struct IngestOptions {
  std::int64_t timeout_us = kDefaultTimeoutUs;
  std::optional<std::size_t> balance_target;  // default: median class size
  std::uint64_t seed = 0;
  SplitFractions fractions;
  BackgroundFilter filter;
};

struct IngestStats {
  PcapCounters pcap;
  std::size_t background_dropped = 0;
};

// Flow-level dataset: every split holds labelled flows with unique ids
// (balanced training copies share the id of their original).
struct Dataset {
  std::vector<std::string> labels;
  std::vector<Flow> train;
  std::vector<Flow> validation;
  std::vector<Flow> test;
  SplitFractions fractions;
  std::uint64_t seed = 0;
  std::int64_t timeout_us = kDefaultTimeoutUs;
  std::size_t balance_target = 0;
  std::vector<ClassCounts> counts;

  std::size_t class_count() const { return labels.size(); }
};

// Split then balance (training split only) a set of labelled flows.
Dataset make_dataset(std::vector<Flow> flows, std::vector<std::string> labels,
                     const IngestOptions& options);

// parse -> filter -> assemble -> label -> split -> balance.
Dataset build_dataset(const DatasetManifest& manifest, const IngestOptions& options,
                      IngestStats* stats = nullptr);

// Bundle directory: meta.json, {train,validation,test}.bin, summary.csv.
void write_bundle(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_bundle(const std::filesystem::path& dir);

std::string summary_csv(const Dataset& dataset);

}  // namespace ant
