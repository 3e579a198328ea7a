#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ant/attacks.hpp"
#include "ant/nn.hpp"
#include "ant/traffic.hpp"

namespace ant {

// Report columns, in CSV order.
enum class Variant { no_attack, adv, rand, adv_port, rand_port, port };
inline constexpr std::size_t kVariantCount = 6;
inline constexpr std::array<Variant, kVariantCount> kAllVariants = {
    Variant::no_attack, Variant::adv, Variant::rand, Variant::adv_port, Variant::rand_port, Variant::port};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);
bool uses_ports(Variant v);

struct ExperimentPlan {
  AttackConfig attack;               // placement; the strength field is overridden per grid point
  std::vector<double> strengths;     // OH %, payload bytes or dummy count
  std::vector<int> target_classes;   // empty: every class
  std::vector<Variant> variants;     // empty: every variant the encoding supports
  GenParams gen;
  std::size_t rand_runs = 50;
  PortRange ports;
  std::uint64_t seed = 0;
  std::size_t max_gen_samples = 0;   // per class, 0 keeps all validation items
  std::size_t max_eval_samples = 0;  // per class, 0 keeps all test items
};

std::vector<double> default_strengths(AttackKind kind);
ExperimentPlan default_plan(AttackKind kind);

// Copy of `attack` with its size parameter set to `strength`.
AttackConfig with_strength(const AttackConfig& attack, double strength);

std::string plan_to_json(const ExperimentPlan& plan);
ExperimentPlan plan_from_json(std::string_view text);

struct StrengthRow {
  double strength = 0.0;
  std::array<std::optional<double>, kVariantCount> recall;  // percent

  std::optional<double>& operator[](Variant v) { return recall[static_cast<std::size_t>(v)]; }
  const std::optional<double>& operator[](Variant v) const { return recall[static_cast<std::size_t>(v)]; }
};

struct RandRun {
  double strength = 0.0;
  Variant variant = Variant::rand;
  std::size_t run = 0;
  double recall = 0.0;
};

struct GridLog {
  int class_index = 0;
  double strength = 0.0;
  std::uint64_t gen_seed = 0;
  std::uint64_t rand_seed = 0;
  std::uint64_t port_seed = 0;
  double final_loss = 0.0;
  std::size_t skipped = 0;
  double seconds = 0.0;
};

struct ClassReport {
  int class_index = 0;
  std::string label;
  std::size_t gen_samples = 0;
  std::size_t eval_samples = 0;
  std::vector<StrengthRow> rows;
  std::vector<RandRun> rand_runs;
};

struct AttackReport {
  AttackKind attack = AttackKind::adv_pad;
  EncodingKind encoding = EncodingKind::pc_p;
  std::vector<std::string> labels;
  std::string source_model_id;
  std::string target_model_id;
  nn::Metrics clean;  // scored model on the full clean test split
  std::vector<ClassReport> classes;
  std::vector<GridLog> log;

  // Sample-weighted recall over all reported classes, i.e. accuracy when
  // every class carries its own perturbation. Empty if any class lacks it.
  std::optional<double> overall(std::size_t row, Variant v) const;
};

// Called for every generated perturbation, e.g. to save it.
using UapSink = std::function<void(int class_index, double strength, const Uap&)>;
// Supplies a pre-generated perturbation; nullopt is reported as missing.
using UapProvider = std::function<std::optional<Uap>(int class_index, double strength)>;
using ProgressFn = std::function<void(const std::string&)>;

// Grid points run on up to `threads` workers; hooks are always invoked from
// the calling thread, in grid order, so output does not depend on scheduling.
struct RunOptions {
  UapSink on_uap;
  ProgressFn progress;
  std::size_t threads = 1;
};

// Generates each UAP on the validation flows of its class and scores the
// model on the perturbed test flows of that class.
AttackReport run_experiment(const nn::Model& model, std::span<const Flow> validation, std::span<const Flow> test,
                            const ExperimentPlan& plan, const RunOptions& options = {});

// Perturbations come from `source` (generated) or from `provider` when set;
// only `target` is scored.
AttackReport run_transfer(const nn::Model& source, const nn::Model& target, std::span<const Flow> validation,
                          std::span<const Flow> test, const ExperimentPlan& plan, const UapProvider& provider = {},
                          const RunOptions& options = {});

// One CSV per class: strength,no_attack,adv,rand,adv_port,rand_port,port.
std::string report_csv(const ClassReport& report);
void write_report_csv(const ClassReport& report, const std::filesystem::path& path);
std::vector<StrengthRow> parse_report_csv(std::string_view text);

// attack,parameter,overall_accuracy,<class recalls...>; one row per
// (strength, perturbing variant).
std::string transfer_csv(const AttackReport& report);

// class,precision,recall,fscore with a trailing overall row.
std::string metrics_csv(const nn::Metrics& metrics, std::span<const std::string> labels);

// JSON lines, one record per grid point.
std::string run_log_jsonl(const AttackReport& report);

}  // namespace ant
