#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "ant/attacks.hpp"
#include "ant/binio.hpp"
#include "ant/dataset.hpp"
#include "ant/eval.hpp"
#include "ant/pipeline.hpp"
#include "ant/synth.hpp"

namespace ant::cli {

using nlohmann::json;
namespace fs = std::filesystem;

void log(const Global& g, const std::string& line) {
  if (!g.quiet) std::fprintf(stderr, "%s\n", line.c_str());
}

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (item.empty()) throw UsageError("empty item in list '" + text + "'");
    out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw UsageError("not a number: '" + s + "'");
  return v;
}

std::optional<std::size_t> to_index(const std::string& s) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string file_safe(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return out;
}

void write_config(const fs::path& dir, const std::string& command, json options) {
  fs::create_directories(dir);
  json j{{"tool", "ant"}, {"version", kVersion}, {"command", command}, {"options", std::move(options)}};
  write_text_file(dir / "config.json", j.dump(2) + "\n");
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

json encoding_json(const EncodingParams& e) {
  return {{"kind", to_string(e.kind)}, {"n", e.n}, {"m", e.m}, {"max_pkt_size", e.max_pkt_size}};
}

std::string metrics_line(const nn::Metrics& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "overall accuracy %.2f%%", 100.0 * m.accuracy);
  return buf;
}

int resolve_class(const std::string& token, const std::vector<std::string>& labels) {
  const auto it = std::find(labels.begin(), labels.end(), token);
  if (it != labels.end()) return static_cast<int>(it - labels.begin());
  if (const auto idx = to_index(token); idx && *idx < labels.size()) return static_cast<int>(*idx);
  std::string known;
  for (const auto& l : labels) known += (known.empty() ? "" : ", ") + l;
  throw UsageError("unknown class '" + token + "' (known: " + known + ")");
}

fs::path uap_path(const fs::path& dir, int cls, const std::string& label, double strength) {
  return dir / "uap" / (std::to_string(cls) + "_" + file_safe(label) + "_" + number(strength) + ".antu");
}

fs::path report_path(const fs::path& dir, int cls, const std::string& label) {
  return dir / ("report_" + std::to_string(cls) + "_" + file_safe(label) + ".csv");
}

std::string rand_runs_csv(const AttackReport& report) {
  std::string out = "class,strength,variant,run,recall\n";
  char buf[32];
  for (const auto& c : report.classes) {
    for (const auto& r : c.rand_runs) {
      std::snprintf(buf, sizeof buf, "%.2f", r.recall);
      out += c.label + "," + number(r.strength) + "," + std::string(to_string(r.variant)) + "," +
             std::to_string(r.run) + "," + buf + "\n";
    }
  }
  return out;
}

// Per-class report CSVs, clean metrics, per-run baseline logs and the run log.
void write_report_files(const fs::path& dir, const AttackReport& report) {
  for (const auto& c : report.classes) write_report_csv(c, report_path(dir, c.class_index, c.label));
  write_text_file(dir / "clean_metrics.csv", metrics_csv(report.clean, report.labels));
  write_text_file(dir / "rand_runs.csv", rand_runs_csv(report));
  write_text_file(dir / "run_log.jsonl", run_log_jsonl(report));
}

// ---- synth ------------------------------------------------------------------

struct SynthOpts {
  std::string out;
  std::size_t flows_per_class = 500;
  std::uint64_t seed = 1;
};

void run_synth(const Global& g, const SynthOpts& o) {
  SynthConfig cfg;
  cfg.flows_per_class = o.flows_per_class;
  cfg.seed = o.seed;
  if (cfg.flows_per_class == 0) throw UsageError("--flows-per-class must be positive");
  write_config(o.out, "synth", {{"flows_per_class", o.flows_per_class}, {"seed", o.seed}});
  const auto corpus = synthesize(cfg);
  write_synth_corpus(corpus, o.out);
  for (const auto& c : corpus) {
    log(g, c.label + ": " + std::to_string(c.flows) + " flows, " + std::to_string(c.packets.size()) + " packets");
  }
}

// ---- ingest -----------------------------------------------------------------

struct IngestOpts {
  std::string manifest;
  std::string out;
  double timeout_s = 180.0;
  std::optional<std::size_t> balance_target;
  std::uint64_t seed = 0;
};

void run_ingest(const Global& g, const IngestOpts& o) {
  if (!(o.timeout_s > 0.0)) throw UsageError("--timeout-s must be positive");
  IngestOptions io;
  io.timeout_us = static_cast<std::int64_t>(o.timeout_s * 1e6);
  io.balance_target = o.balance_target;
  io.seed = o.seed;
  json cfg{{"manifest", o.manifest}, {"timeout_s", o.timeout_s}, {"seed", o.seed}};
  cfg["balance_target"] = o.balance_target ? json(*o.balance_target) : json(nullptr);
  const DatasetManifest manifest = read_manifest(o.manifest);
  IngestStats stats;
  const Dataset ds = build_dataset(manifest, io, &stats);
  write_bundle(ds, o.out);
  write_config(o.out, "ingest", cfg);
  log(g, "records " + std::to_string(stats.pcap.records) + ", skipped " + std::to_string(stats.pcap.skipped()) +
             ", background dropped " + std::to_string(stats.background_dropped));
  for (std::size_t c = 0; c < ds.class_count(); ++c) {
    const auto& k = ds.counts[c];
    log(g, ds.labels[c] + ": flows " + std::to_string(k.flows) + ", train " + std::to_string(k.train_before_balance) +
               " -> " + std::to_string(k.train) + ", validation " + std::to_string(k.validation) + ", test " +
               std::to_string(k.test));
  }
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
  std::string bundle;
  std::string out;
  std::string encoding = "PC_HP";
  std::string arch = "cnn";
  std::string layers;
  std::size_t n = 10;
  std::size_t m = 100;
  std::size_t max_pkt_size = kMaxPktSize;
  std::size_t packets_per_flow = 0;
  nn::TrainConfig train;
};

void run_train(const Global& g, const TrainOpts& o) {
  ClassifierOptions co;
  co.encoding.kind = parse_encoding_kind(o.encoding);
  co.encoding.n = o.n;
  co.encoding.m = o.m;
  co.encoding.max_pkt_size = o.max_pkt_size;
  co.encoding.validate();
  co.arch = nn::parse_arch_family(o.arch);
  if (!o.layers.empty()) co.layers = nn::parse_layers(o.layers);
  co.train = o.train;
  co.packets_per_flow = o.packets_per_flow;
  if (co.train.epochs == 0 || co.train.batch_size == 0) throw UsageError("--epochs and --batch must be positive");
  if (!(co.train.learning_rate > 0.0)) throw UsageError("--lr must be positive");

  const Dataset ds = read_bundle(o.bundle);
  const nn::ModelSpec spec = classifier_spec(co, ds.class_count());
  write_config(o.out, "train",
               {{"bundle", o.bundle},
                {"encoding", encoding_json(co.encoding)},
                {"arch", to_string(co.arch)},
                {"layers", nn::format_layers(spec.layers)},
                {"epochs", co.train.epochs},
                {"batch", co.train.batch_size},
                {"lr", co.train.learning_rate},
                {"momentum", co.train.momentum},
                {"patience", co.train.patience},
                {"packets_per_flow", co.packets_per_flow},
                {"seed", co.train.seed}});

  log(g, "training " + std::string(to_string(co.encoding.kind)) + " " + std::string(to_string(co.arch)) + " [" +
             nn::format_layers(spec.layers) + "]");
  std::vector<nn::EpochRecord> history;
  const nn::Model model = train_classifier(ds, co, &history);
  std::string hist = "epoch,train_loss,validation_accuracy\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.4f\n", e + 1, history[e].train_loss, history[e].validation_accuracy);
    hist += buf;
    char msg[96];
    std::snprintf(msg, sizeof msg, "epoch %zu: loss %.4f, validation accuracy %.2f%%", e + 1, history[e].train_loss,
                  100.0 * history[e].validation_accuracy);
    log(g, msg);
  }
  const nn::Metrics test = evaluate_flows(model, ds.test);
  nn::save_model(model, fs::path(o.out) / "model.antm");
  write_text_file(fs::path(o.out) / "history.csv", hist);
  write_text_file(fs::path(o.out) / "metrics.csv", metrics_csv(test, model.labels));
  log(g, "test " + metrics_line(test) + ", model " + nn::model_id(model));
}

// ---- eval -------------------------------------------------------------------

struct EvalOpts {
  std::string model;
  std::string bundle;
  std::string split = "test";
  std::string out;
};

std::string confusion_csv(const nn::Metrics& m, const std::vector<std::string>& labels) {
  std::string out = "true\\predicted";
  for (const auto& l : labels) out += "," + l;
  out += "\n";
  for (std::size_t t = 0; t < m.confusion.size(); ++t) {
    out += labels.at(t);
    for (std::size_t v : m.confusion[t]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

void run_eval(const Global& g, const EvalOpts& o) {
  const nn::Model model = nn::load_model(o.model);
  const Dataset ds = read_bundle(o.bundle);
  if (ds.labels != model.labels) throw UsageError("model and bundle have different label sets");
  const std::vector<Flow>* flows = o.split == "test"         ? &ds.test
                                   : o.split == "validation" ? &ds.validation
                                   : o.split == "train"      ? &ds.train
                                                             : nullptr;
  if (!flows) throw UsageError("--split must be train, validation or test");
  write_config(o.out, "eval", {{"model", o.model}, {"bundle", o.bundle}, {"split", o.split}});
  const nn::Metrics m = evaluate_flows(model, *flows);
  write_text_file(fs::path(o.out) / "metrics.csv", metrics_csv(m, model.labels));
  write_text_file(fs::path(o.out) / "confusion.csv", confusion_csv(m, model.labels));
  log(g, o.split + " " + metrics_line(m));
}

// ---- attack -----------------------------------------------------------------

struct AttackOpts {
  std::string model;
  std::string bundle;
  std::string out;
  std::string plan;
  std::string attack;
  std::string location;
  std::string dummy_index;
  std::string burst;
  std::string grid;
  std::string classes;
  std::string variants;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> batch;
  std::optional<double> eps;
  std::string update;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint16_t> port_lo;
  std::optional<std::uint16_t> port_hi;
  std::optional<std::size_t> max_gen;
  std::optional<std::size_t> max_eval;
};

AttackKind parse_attack(const std::string& s) {
  if (s == "advpad") return AttackKind::adv_pad;
  if (s == "advpay") return AttackKind::adv_pay;
  if (s == "advburst") return AttackKind::adv_burst;
  throw UsageError("unknown attack '" + s + "' (expected advpad, advpay or advburst)");
}

ExperimentPlan resolve_plan(const AttackOpts& o, const nn::Model& model) {
  if (o.plan.empty() && o.attack.empty()) throw UsageError("--attack or --plan is required");
  ExperimentPlan p;
  if (!o.plan.empty()) {
    p = plan_from_json(read_text(o.plan));
    if (!o.attack.empty() && parse_attack(o.attack) != attack_kind(p.attack)) {
      throw UsageError("--attack disagrees with the plan file");
    }
  } else {
    p = default_plan(parse_attack(o.attack));
    if (auto* b = std::get_if<AdvBurstConfig>(&p.attack)) b->selected_burst = default_burst_policy(model.encoding.kind);
  }
  const AttackKind kind = attack_kind(p.attack);

  if (!o.location.empty()) {
    auto* c = std::get_if<AdvPadConfig>(&p.attack);
    if (!c) throw UsageError("--location applies to advpad only");
    if (o.location != "start" && o.location != "end") throw UsageError("--location must be start or end");
    c->location = o.location == "start" ? PadLocation::start : PadLocation::end;
  }
  if (!o.dummy_index.empty()) {
    auto* c = std::get_if<AdvPayConfig>(&p.attack);
    if (!c) throw UsageError("--dummy-index applies to advpay only");
    if (o.dummy_index == "after-first-forward") {
      c->dummy_index = {};
    } else if (const auto k = to_index(o.dummy_index)) {
      c->dummy_index = {DummyIndexPolicy::Kind::fixed, *k};
    } else {
      throw UsageError("--dummy-index must be after-first-forward or a slot index");
    }
  }
  if (!o.burst.empty()) {
    auto* c = std::get_if<AdvBurstConfig>(&p.attack);
    if (!c) throw UsageError("--burst applies to advburst only");
    if (o.burst == "first-forward") {
      c->selected_burst = {BurstPolicy::Kind::first_forward, 0};
    } else if (o.burst == "first-backward") {
      c->selected_burst = {BurstPolicy::Kind::first_backward, 0};
    } else if (const auto k = to_index(o.burst)) {
      c->selected_burst = {BurstPolicy::Kind::fixed, *k};
    } else {
      throw UsageError("--burst must be first-forward, first-backward or a burst index");
    }
  }
  if (!o.grid.empty()) {
    p.strengths.clear();
    for (const auto& s : split_list(o.grid)) p.strengths.push_back(to_double(s));
  }
  if (!o.classes.empty()) {
    p.target_classes.clear();
    for (const auto& s : split_list(o.classes)) p.target_classes.push_back(resolve_class(s, model.labels));
  }
  if (!o.variants.empty()) {
    p.variants.clear();
    for (const auto& s : split_list(o.variants)) p.variants.push_back(parse_variant(s));
  }
  if (o.iters) p.gen.iterations = *o.iters;
  if (o.batch) p.gen.batch_size = *o.batch;
  if (o.eps) p.gen.epsilon = *o.eps;
  if (!o.update.empty()) {
    if (o.update != "gradient" && o.update != "sign") throw UsageError("--update must be gradient or sign");
    p.gen.update = o.update == "sign" ? UpdateRule::sign : UpdateRule::gradient;
  }
  if (o.runs) p.rand_runs = *o.runs;
  if (o.seed) p.seed = *o.seed;
  if (o.port_lo) p.ports.lo = *o.port_lo;
  if (o.port_hi) p.ports.hi = *o.port_hi;
  if (o.max_gen) p.max_gen_samples = *o.max_gen;
  if (o.max_eval) p.max_eval_samples = *o.max_eval;

  if (p.strengths.empty()) throw UsageError("strength grid is empty");
  if (p.gen.iterations == 0 || p.gen.batch_size == 0) throw UsageError("--iters and --batch must be positive");
  if (!(p.gen.epsilon > 0.0)) throw UsageError("--eps must be positive");
  if (p.ports.lo > p.ports.hi) throw UsageError("port range is empty");
  if (!compatible(kind, model.encoding.kind)) (void)uap_template(p.attack, model, 0);  // descriptive error
  return p;
}

void run_attack(const Global& g, const AttackOpts& o) {
  const nn::Model model = nn::load_model(o.model);
  const ExperimentPlan plan = resolve_plan(o, model);
  const Dataset ds = read_bundle(o.bundle);
  if (ds.labels != model.labels) throw UsageError("model and bundle have different label sets");

  const fs::path out(o.out);
  write_config(out, "attack", {{"model", o.model}, {"bundle", o.bundle}, {"plan", json::parse(plan_to_json(plan))}});
  write_text_file(out / "plan.json", plan_to_json(plan));
  fs::create_directories(out / "uap");

  RunOptions ro;
  ro.threads = g.threads;
  ro.progress = [&g](const std::string& s) { log(g, s); };
  ro.on_uap = [&](int cls, double strength, const Uap& uap) {
    save_uap(uap, uap_path(out, cls, model.labels.at(static_cast<std::size_t>(cls)), strength));
  };
  log(g, std::string(to_string(attack_kind(plan.attack))) + " against " + std::string(to_string(model.encoding.kind)) +
             " model " + nn::model_id(model));
  const AttackReport report = run_experiment(model, ds.validation, ds.test, plan, ro);
  write_report_files(out, report);
}

// ---- transfer ---------------------------------------------------------------

struct TransferOpts {
  std::string source;
  std::string target;
  std::string uaps;
  std::string bundle;
  std::string out;
  std::string plan;
};

void run_transfer_cmd(const Global& g, const TransferOpts& o) {
  const nn::Model source = nn::load_model(o.source);
  const nn::Model target = nn::load_model(o.target);
  const fs::path uap_dir(o.uaps);
  const fs::path plan_file = o.plan.empty() ? uap_dir / "plan.json" : fs::path(o.plan);
  if (!fs::exists(plan_file)) throw DataError("experiment plan not found: " + plan_file.string());
  const ExperimentPlan plan = plan_from_json(read_text(plan_file));
  const Dataset ds = read_bundle(o.bundle);
  if (ds.labels != target.labels) throw UsageError("target model and bundle have different label sets");

  const fs::path out(o.out);
  write_config(out, "transfer",
               {{"source", o.source},
                {"target", o.target},
                {"uaps", o.uaps},
                {"bundle", o.bundle},
                {"plan", json::parse(plan_to_json(plan))}});

  const std::string source_id = nn::model_id(source);
  UapProvider provider = [&](int cls, double strength) -> std::optional<Uap> {
    const fs::path p = uap_path(uap_dir, cls, source.labels.at(static_cast<std::size_t>(cls)), strength);
    if (!fs::exists(p)) throw DataError("missing perturbation file " + p.string());
    Uap uap = load_uap(p);
    if (uap.source_model_id != source_id) {
      throw DataError(p.string() + " was generated against model " + uap.source_model_id + ", not " + source_id);
    }
    return uap;
  };
  RunOptions ro;
  ro.threads = g.threads;
  ro.progress = [&g](const std::string& s) { log(g, s); };
  log(g, "scoring " + nn::model_id(target) + " with perturbations from " + source_id);
  const AttackReport report = run_transfer(source, target, ds.validation, ds.test, plan, provider, ro);
  write_report_files(out, report);
  write_text_file(out / "transfer.csv", transfer_csv(report));
}

// ---- report -----------------------------------------------------------------

struct ReportOpts {
  std::string dir;
};

void print_table(const std::string& title, const std::string& csv) {
  std::printf("%s\n", title.c_str());
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(csv);
  for (std::string line; std::getline(ss, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (const auto& r : rows) {
    std::string line = " ";
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += " " + std::string(width[i] - r[i].size(), ' ') + r[i];
    }
    std::printf("%s\n", line.c_str());
  }
  std::printf("\n");
}

void run_report(const Global&, const ReportOpts& o) {
  const fs::path dir(o.dir);
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> reports;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("report_", 0) == 0 && e.path().extension() == ".csv") reports.push_back(e.path());
  }
  std::sort(reports.begin(), reports.end());
  const bool has_metrics = fs::exists(dir / "clean_metrics.csv") || fs::exists(dir / "metrics.csv");
  if (reports.empty() && !has_metrics) throw DataError("no report or metrics CSVs in " + dir.string());

  for (const char* name : {"metrics.csv", "clean_metrics.csv"}) {
    if (fs::exists(dir / name)) print_table(std::string("clean metrics (") + name + ")", read_text(dir / name));
  }
  for (const auto& p : reports) {
    const std::string text = read_text(p);
    (void)parse_report_csv(text);  // validates the layout
    print_table(p.stem().string().substr(7), text);
  }
  if (fs::exists(dir / "transfer.csv")) print_table("transfer", read_text(dir / "transfer.csv"));
}

template <class Opts, class Fn>
std::shared_ptr<Opts> bind(CLI::App* sub, const Global& g, Fn fn) {
  auto opts = std::make_shared<Opts>();
  sub->callback([opts, &g, fn] { fn(g, *opts); });
  return opts;
}

}  // namespace

void add_synth(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("synth", "Write the bundled synthetic corpus (pcaps and manifest)");
  auto o = bind<SynthOpts>(sub, g, run_synth);
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--flows-per-class", o->flows_per_class, "Flows per application class")->capture_default_str();
  sub->add_option("--seed", o->seed, "Generator seed")->capture_default_str();
}

void add_ingest(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("ingest", "Parse, label, split and balance captures into a dataset bundle");
  auto o = bind<IngestOpts>(sub, g, run_ingest);
  sub->add_option("manifest", o->manifest, "CSV with columns path,label")->required();
  sub->add_option("--out", o->out, "Bundle directory")->required();
  sub->add_option("--timeout-s", o->timeout_s, "Flow inactivity timeout in seconds")->capture_default_str();
  sub->add_option("--balance-target", o->balance_target, "Training samples per class (default: median)");
  sub->add_option("--seed", o->seed, "Master seed")->capture_default_str();
}

void add_train(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("train", "Train a classifier on a dataset bundle");
  auto o = bind<TrainOpts>(sub, g, run_train);
  sub->add_option("bundle", o->bundle, "Dataset bundle directory")->required();
  sub->add_option("--out", o->out, "Output directory (model.antm, metrics.csv, history.csv)")->required();
  sub->add_option("--encoding", o->encoding, "PC_HP, PC_P, FCC_HP, FCC_P, FTSC_PS or FTSC_IAT")->capture_default_str();
  sub->add_option("--arch", o->arch, "cnn or sae")->capture_default_str();
  sub->add_option("--layers", o->layers, "Layer chain, e.g. conv16x7/3,relu,pool2,flatten,dense64,relu");
  sub->add_option("--n", o->n, "Packets per flow-content window")->capture_default_str();
  sub->add_option("--m", o->m, "Packets per time-series window")->capture_default_str();
  sub->add_option("--max-pkt-size", o->max_pkt_size, "Bytes per packet slot")->capture_default_str();
  sub->add_option("--packets-per-flow", o->packets_per_flow, "Packet encodings: samples per flow, 0 keeps all")
      ->capture_default_str();
  sub->add_option("--epochs", o->train.epochs)->capture_default_str();
  sub->add_option("--batch", o->train.batch_size)->capture_default_str();
  sub->add_option("--lr", o->train.learning_rate)->capture_default_str();
  sub->add_option("--momentum", o->train.momentum)->capture_default_str();
  sub->add_option("--patience", o->train.patience, "Early-stopping patience in epochs, 0 disables")
      ->capture_default_str();
  sub->add_option("--seed", o->train.seed)->capture_default_str();
}

void add_eval(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("eval", "Score a model on one split of a bundle");
  auto o = bind<EvalOpts>(sub, g, run_eval);
  sub->add_option("model", o->model, "Model file")->required();
  sub->add_option("bundle", o->bundle, "Dataset bundle directory")->required();
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--split", o->split, "train, validation or test")->capture_default_str();
}

void add_attack(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("attack", "Generate per-class perturbations and score them");
  auto o = bind<AttackOpts>(sub, g, run_attack);
  sub->add_option("model", o->model, "Model file")->required();
  sub->add_option("bundle", o->bundle, "Dataset bundle directory")->required();
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--attack", o->attack, "advpad, advpay or advburst");
  sub->add_option("--plan", o->plan, "Experiment plan JSON; flags below override it");
  sub->add_option("--location", o->location, "advpad: start or end");
  sub->add_option("--dummy-index", o->dummy_index, "advpay: after-first-forward or a slot index");
  sub->add_option("--burst", o->burst, "advburst: first-forward, first-backward or a burst index");
  sub->add_option("--grid", o->grid, "Comma-separated strengths (OH %, payload bytes or dummy count)");
  sub->add_option("--classes", o->classes, "Comma-separated class labels or indices (default: all)");
  sub->add_option("--variants", o->variants, "Subset of no_attack,adv,rand,adv_port,rand_port,port");
  sub->add_option("--iters", o->iters, "Generation iterations");
  sub->add_option("--batch", o->batch, "Generation batch size");
  sub->add_option("--eps", o->eps, "Step size");
  sub->add_option("--update", o->update, "gradient (default) or sign");
  sub->add_option("--runs", o->runs, "Random-baseline runs");
  sub->add_option("--seed", o->seed, "Master seed");
  sub->add_option("--port-lo", o->port_lo, "Lowest port for the port attack");
  sub->add_option("--port-hi", o->port_hi, "Highest port for the port attack");
  sub->add_option("--max-gen-samples", o->max_gen, "Cap on validation items per class");
  sub->add_option("--max-eval-samples", o->max_eval, "Cap on test items per class");
}

void add_transfer(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("transfer", "Score a target model with perturbations saved by `attack`");
  auto o = bind<TransferOpts>(sub, g, run_transfer_cmd);
  sub->add_option("source", o->source, "Model the perturbations were generated against")->required();
  sub->add_option("target", o->target, "Model to score")->required();
  sub->add_option("uaps", o->uaps, "Output directory of an attack run")->required();
  sub->add_option("bundle", o->bundle, "Dataset bundle directory")->required();
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--plan", o->plan, "Experiment plan (default: <uaps>/plan.json)");
}

void add_report(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("report", "Print the CSV tables of a train, eval, attack or transfer run");
  auto o = bind<ReportOpts>(sub, g, run_report);
  sub->add_option("dir", o->dir, "Run output directory")->required();
}

}  // namespace ant::cli
