#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ant/traffic.hpp"

namespace ant {

// Four application profiles (chat, streaming, file_transfer, voip) with
// distinct payload signatures, size and timing behaviour, and partially
// overlapping server ports. A small share of DNS chatter and bare ACKs is
// mixed in so the background filter has something to drop.
struct SynthConfig {
  std::size_t flows_per_class = 500;
  std::uint64_t seed = 1;
  double background_share = 0.02;  // extra DNS packets relative to flow packets
};

struct SynthClass {
  std::string label;
  std::vector<Packet> packets;  // time-ordered
  std::size_t flows = 0;
};

std::vector<SynthClass> synthesize(const SynthConfig& config);

// One pcap per class plus manifest.csv (path,label) in `dir`.
void write_synth_corpus(const std::vector<SynthClass>& corpus, const std::filesystem::path& dir);

}  // namespace ant
