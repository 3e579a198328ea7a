#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace ant::cli {

// Shared by every subcommand.
struct Global {
  bool quiet = false;
  std::size_t threads = 1;  // resolved from ANT_THREADS
};

void log(const Global& g, const std::string& line);

void add_synth(CLI::App& app, const Global& g);
void add_ingest(CLI::App& app, const Global& g);
void add_train(CLI::App& app, const Global& g);
void add_eval(CLI::App& app, const Global& g);
void add_attack(CLI::App& app, const Global& g);
void add_transfer(CLI::App& app, const Global& g);
void add_report(CLI::App& app, const Global& g);

}  // namespace ant::cli
