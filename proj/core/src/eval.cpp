#include "ant/eval.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "ant/binio.hpp"
#include "ant/error.hpp"
#include "ant/rng.hpp"
#include "json_util.hpp"

namespace ant {

using detail::json;

namespace {

constexpr std::array<std::string_view, kVariantCount> kVariantNames = {"no_attack", "adv",       "rand",
                                                                        "adv_port",  "rand_port", "port"};

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::size_t index_of(Variant v) { return static_cast<std::size_t>(v); }

}  // namespace

std::string_view to_string(Variant v) { return kVariantNames[index_of(v)]; }

Variant parse_variant(std::string_view name) {
  for (std::size_t i = 0; i < kVariantCount; ++i) {
    if (kVariantNames[i] == name) return kAllVariants[i];
  }
  throw UsageError("unknown attack variant '" + std::string(name) +
                   "' (expected no_attack, adv, rand, adv_port, rand_port or port)");
}

bool uses_ports(Variant v) { return v == Variant::adv_port || v == Variant::rand_port || v == Variant::port; }

std::vector<double> default_strengths(AttackKind kind) {
  switch (kind) {
    case AttackKind::adv_pad: return {0, 10, 20, 30, 40, 50};
    case AttackKind::adv_pay: return {10, 100, 300, 500, 750, 1000, 1200, 1400};
    case AttackKind::adv_burst: return {1, 3, 5, 7, 10, 12, 15, 17, 20};
  }
  return {};
}

ExperimentPlan default_plan(AttackKind kind) {
  ExperimentPlan p;
  switch (kind) {
    case AttackKind::adv_pad: p.attack = AdvPadConfig{}; break;
    case AttackKind::adv_pay: p.attack = AdvPayConfig{}; break;
    case AttackKind::adv_burst: p.attack = AdvBurstConfig{}; break;
  }
  p.strengths = default_strengths(kind);
  p.gen = default_gen_params(kind);
  return p;
}

AttackConfig with_strength(const AttackConfig& attack, double strength) {
  if (!(strength >= 0.0) || !std::isfinite(strength)) throw UsageError("attack strength must be non-negative");
  AttackConfig out = attack;
  std::visit(
      [&](auto& c) {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, AdvPadConfig>) {
          c.overhead_pct = strength;
        } else {
          if (strength != std::floor(strength)) throw UsageError("payload size and dummy count must be integers");
          if constexpr (std::is_same_v<C, AdvPayConfig>) {
            c.payload_size = static_cast<std::size_t>(strength);
          } else {
            c.dummy_count = static_cast<std::size_t>(strength);
          }
        }
      },
      out);
  return out;
}

std::string plan_to_json(const ExperimentPlan& plan) {
  json variants = json::array();
  for (Variant v : plan.variants) variants.push_back(std::string(to_string(v)));
  json j{{"attack", detail::attack_json(plan.attack)},
         {"strengths", plan.strengths},
         {"target_classes", plan.target_classes},
         {"variants", variants},
         {"gen", detail::gen_json(plan.gen)},
         {"rand_runs", plan.rand_runs},
         {"ports", {{"lo", plan.ports.lo}, {"hi", plan.ports.hi}}},
         {"seed", plan.seed},
         {"max_gen_samples", plan.max_gen_samples},
         {"max_eval_samples", plan.max_eval_samples}};
  return j.dump(2) + "\n";
}

ExperimentPlan plan_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    const AttackConfig attack = detail::attack_from_json(j.at("attack"));
    ExperimentPlan p = default_plan(attack_kind(attack));
    p.attack = attack;
    if (j.contains("strengths")) p.strengths = j["strengths"].get<std::vector<double>>();
    if (j.contains("target_classes")) p.target_classes = j["target_classes"].get<std::vector<int>>();
    if (j.contains("variants")) {
      p.variants.clear();
      for (const auto& v : j["variants"]) p.variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (j.contains("gen")) p.gen = detail::gen_from_json(j["gen"], p.gen);
    p.rand_runs = j.value("rand_runs", p.rand_runs);
    if (j.contains("ports")) {
      p.ports.lo = j["ports"].value("lo", p.ports.lo);
      p.ports.hi = j["ports"].value("hi", p.ports.hi);
    }
    p.seed = j.value("seed", p.seed);
    p.max_gen_samples = j.value("max_gen_samples", p.max_gen_samples);
    p.max_eval_samples = j.value("max_eval_samples", p.max_eval_samples);
    return p;
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad experiment plan: ") + e.what());
  }
}

std::optional<double> AttackReport::overall(std::size_t row, Variant v) const {
  double hit = 0.0;
  double total = 0.0;
  for (const auto& c : classes) {
    if (row >= c.rows.size() || !c.rows[row][v]) return std::nullopt;
    hit += *c.rows[row][v] * static_cast<double>(c.eval_samples);
    total += static_cast<double>(c.eval_samples);
  }
  if (total == 0.0) return std::nullopt;
  return hit / total;
}

// ---- experiment -------------------------------------------------------------

namespace {

// Items of one class under one encoding: packets for PC models, flows otherwise.
struct Pool {
  std::vector<Packet> packets;
  std::vector<std::uint64_t> packet_flow;
  std::vector<Flow> flows;

  std::size_t size() const { return flows.empty() ? packets.size() : flows.size(); }
};

Pool make_pool(std::span<const Flow> flows, int cls, const EncodingParams& enc, std::size_t cap,
               std::uint64_t seed) {
  Pool all;
  const bool packet_level = category(enc.kind) == InputCategory::packet;
  for (const Flow& f : flows) {
    if (f.label != cls) continue;
    if (packet_level) {
      for (const Packet& p : f.packets) {
        if (p.payload.empty()) continue;
        all.packets.push_back(p);
        all.packet_flow.push_back(f.id);
      }
    } else if (encodable(f, enc)) {
      all.flows.push_back(f);
    }
  }
  if (cap == 0 || all.size() <= cap) return all;

  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  Pool out;
  for (std::size_t i : idx) {
    if (packet_level) {
      out.packets.push_back(std::move(all.packets[i]));
      out.packet_flow.push_back(all.packet_flow[i]);
    } else {
      out.flows.push_back(std::move(all.flows[i]));
    }
  }
  return out;
}

Pool port_randomized(const Pool& pool, EncodingKind kind, const PortRange& range, std::uint64_t seed) {
  Pool out;
  out.packet_flow = pool.packet_flow;
  for (std::size_t i = 0; i < pool.packets.size(); ++i) {
    out.packets.push_back(randomize_ports(pool.packets[i], pool.packet_flow[i], kind, range, seed));
  }
  for (const Flow& f : pool.flows) out.flows.push_back(randomize_ports(f, kind, range, seed));
  return out;
}

bool is_identity(const Uap& uap) {
  return std::visit(
      [](const auto& c) {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, AdvPadConfig>) {
          return c.overhead_pct == 0.0;
        } else if constexpr (std::is_same_v<C, AdvPayConfig>) {
          return c.payload_size == 0;
        } else {
          return c.dummy_count == 0;
        }
      },
      uap.attack);
}

class Scorer {
 public:
  Scorer(const nn::Model& model, int cls) : model_(model), cls_(cls) {}

  // Recall (percent) with `uap` applied, or clean when null. Flows lacking
  // the selected burst are scored unperturbed; `skipped` counts them.
  double recall(const Pool& pool, const Uap* uap, std::size_t* skipped = nullptr) const {
    if (pool.size() == 0) return 0.0;
    if (uap && is_identity(*uap)) uap = nullptr;
    std::size_t hit = 0;
    std::size_t miss_burst = 0;
    const EncodingParams& enc = model_.encoding;
    const NormStats* stats = model_.norm_stats ? &*model_.norm_stats : nullptr;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      std::vector<float> x;
      if (!pool.flows.empty()) {
        const Flow& f = pool.flows[i];
        if (!uap) {
          x = encode_flow(f, enc, stats);
        } else if (std::holds_alternative<AdvBurstConfig>(uap->attack)) {
          auto s = splice_advburst(f, uap->values, enc, std::get<AdvBurstConfig>(uap->attack), *uap->norm_stats);
          if (s) {
            x = std::move(s->input);
          } else {
            ++miss_burst;
            x = encode_flow(f, enc, stats);
          }
        } else {
          x = apply_advpay(f, *uap);
        }
      } else {
        x = uap ? apply_advpad(pool.packets[i], *uap) : encode_packet(pool.packets[i], enc.kind, enc.max_pkt_size);
      }
      hit += nn::predict(model_, x) == cls_;
    }
    if (skipped) *skipped = miss_burst;
    return 100.0 * static_cast<double>(hit) / static_cast<double>(pool.size());
  }

 private:
  const nn::Model& model_;
  int cls_;
};

void check_pair(const nn::Model& source, const nn::Model& target) {
  if (source.encoding.kind != target.encoding.kind || source.encoding.input_length() != target.encoding.input_length()) {
    throw UsageError("source and target models use different encodings (" +
                     std::string(to_string(source.encoding.kind)) + " vs " +
                     std::string(to_string(target.encoding.kind)) + ")");
  }
  if (source.labels != target.labels) throw UsageError("source and target models have different label sets");
}

void check_hygiene(std::span<const Flow> validation, std::span<const Flow> test) {
  std::set<std::uint64_t> ids;
  for (const Flow& f : validation) ids.insert(f.id);
  for (const Flow& f : test) {
    if (ids.count(f.id)) {
      throw DataError("flow " + std::to_string(f.id) + " appears in both the generation and the scoring split");
    }
  }
}

std::vector<Variant> resolve_variants(const ExperimentPlan& plan, EncodingKind kind) {
  if (plan.variants.empty()) {
    std::vector<Variant> out;
    for (Variant v : kAllVariants) {
      if (!uses_ports(v) || has_headers(kind)) out.push_back(v);
    }
    return out;
  }
  for (Variant v : plan.variants) {
    if (uses_ports(v) && !has_headers(kind)) {
      throw UsageError("variant " + std::string(to_string(v)) + " needs an encoding with transport headers");
    }
  }
  return plan.variants;
}

bool wants(std::span<const Variant> vs, Variant v) { return std::find(vs.begin(), vs.end(), v) != vs.end(); }

std::string context(const std::string& label, double strength) {
  return " (class " + label + ", strength " + number(strength) + ")";
}

template <class E>
[[noreturn]] void rethrow_with(const E& e, const std::string& where) {
  throw E(std::string(e.what()) + where);
}

}  // namespace

namespace {

struct ClassSetup {
  int cls = 0;
  std::string label;
  Pool gen_pool;
  Pool eval_pool;
  std::optional<Pool> ported;
  double clean = 0.0;
  std::optional<double> port;
};

struct JobResult {
  StrengthRow row;
  std::vector<RandRun> rand_runs;
  GridLog log;
  std::optional<Uap> generated;
  std::exception_ptr error;
};

struct JobContext {
  const nn::Model& source;
  const nn::Model& target;
  const ExperimentPlan& plan;
  const UapProvider& provider;
  const std::vector<Variant>& variants;
  AttackKind kind;
  std::uint64_t port_seed;
};

void run_job(const JobContext& ctx, const ClassSetup& cs, double strength, JobResult& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& variants = ctx.variants;
  const int cls = cs.cls;
  const auto ucls = static_cast<std::uint64_t>(cls);
  const auto bits = std::bit_cast<std::uint64_t>(strength);
  GridLog& log = out.log;
  log.class_index = cls;
  log.strength = strength;
  log.gen_seed = derive_seed(ctx.plan.seed, "gen", {ucls, bits});
  log.rand_seed = derive_seed(ctx.plan.seed, "rand", {ucls, bits});
  log.port_seed = ctx.port_seed;

  StrengthRow& row = out.row;
  row.strength = strength;
  if (wants(variants, Variant::no_attack)) row[Variant::no_attack] = cs.clean;
  if (cs.port) row[Variant::port] = cs.port;

  const Scorer scorer(ctx.target, cls);
  const AttackConfig cfg = with_strength(ctx.plan.attack, strength);
  if (wants(variants, Variant::adv) || wants(variants, Variant::adv_port)) {
    std::optional<Uap> uap;
    // a zero-size perturbation is never generated or stored
    if (is_identity(uap_template(cfg, ctx.source, cls))) {
      uap = uap_template(cfg, ctx.source, cls);
    } else if (ctx.provider) {
      uap = ctx.provider(cls, strength);
      if (!uap) throw DataError("no perturbation available");
    } else {
      GenParams gp = ctx.plan.gen;
      gp.seed = log.gen_seed;
      GenStats stats;
      IterationHook hook = [&](std::size_t, double loss, std::span<const float>) { log.final_loss = loss; };
      switch (ctx.kind) {
        case AttackKind::adv_pad:
          uap = gen_advpad(cs.gen_pool.packets, cls, ctx.source, std::get<AdvPadConfig>(cfg), gp, hook, &stats);
          break;
        case AttackKind::adv_pay:
          uap = gen_advpay(cs.gen_pool.flows, cls, ctx.source, std::get<AdvPayConfig>(cfg), gp, hook, &stats);
          break;
        case AttackKind::adv_burst:
          uap = gen_advburst(cs.gen_pool.flows, cls, ctx.source, std::get<AdvBurstConfig>(cfg), gp, hook, &stats);
          break;
      }
      log.skipped = stats.skipped;
      out.generated = uap;
    }
    if (uap->target_class != cls || attack_kind(uap->attack) != ctx.kind) {
      throw DataError("perturbation does not match the requested class or attack");
    }
    if (wants(variants, Variant::adv)) row[Variant::adv] = scorer.recall(cs.eval_pool, &*uap);
    if (wants(variants, Variant::adv_port)) row[Variant::adv_port] = scorer.recall(*cs.ported, &*uap);
  }

  if (wants(variants, Variant::rand) || wants(variants, Variant::rand_port)) {
    const auto rands = rand_baseline(uap_template(cfg, ctx.source, cls), ctx.plan.rand_runs, log.rand_seed);
    for (Variant v : {Variant::rand, Variant::rand_port}) {
      if (!wants(variants, v)) continue;
      const Pool& pool = v == Variant::rand ? cs.eval_pool : *cs.ported;
      double sum = 0.0;
      for (std::size_t r = 0; r < rands.size(); ++r) {
        const double rec = scorer.recall(pool, &rands[r]);
        out.rand_runs.push_back({strength, v, r, rec});
        sum += rec;
      }
      row[v] = sum / static_cast<double>(rands.size());
    }
  }
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run_job_guarded(const JobContext& ctx, const ClassSetup& cs, double strength, JobResult& out) {
  const std::string where = context(cs.label, strength);
  try {
    try {
      run_job(ctx, cs, strength, out);
    } catch (const UsageError& e) {
      rethrow_with(e, where);
    } catch (const DataError& e) {
      rethrow_with(e, where);
    } catch (const ComputeError& e) {
      rethrow_with(e, where);
    }
  } catch (...) {
    out.error = std::current_exception();
  }
}

}  // namespace

AttackReport run_transfer(const nn::Model& source, const nn::Model& target, std::span<const Flow> validation,
                          std::span<const Flow> test, const ExperimentPlan& plan, const UapProvider& provider,
                          const RunOptions& options) {
  check_pair(source, target);
  const AttackKind kind = attack_kind(plan.attack);
  if (!compatible(kind, target.encoding.kind)) {
    // uap_template raises the descriptive compatibility error
    (void)uap_template(plan.attack, target, 0);
  }
  check_hygiene(validation, test);
  if (plan.rand_runs == 0) throw UsageError("random baseline needs at least one run");
  const auto variants = resolve_variants(plan, target.encoding.kind);
  const EncodingKind ek = target.encoding.kind;

  AttackReport report;
  report.attack = kind;
  report.encoding = ek;
  report.labels = target.labels;
  report.source_model_id = nn::model_id(source);
  report.target_model_id = &source == &target ? report.source_model_id : nn::model_id(target);
  {
    const NormStats* stats = target.norm_stats ? &*target.norm_stats : nullptr;
    const auto samples = encode_flows(test, target.encoding, stats);
    report.clean = nn::evaluate(target, samples);
  }

  std::vector<int> classes = plan.target_classes;
  if (classes.empty()) {
    for (std::size_t c = 0; c < target.class_count(); ++c) classes.push_back(static_cast<int>(c));
  }
  const std::uint64_t port_seed = derive_seed(plan.seed, "port");
  const bool any_port =
      wants(variants, Variant::port) || wants(variants, Variant::adv_port) || wants(variants, Variant::rand_port);

  std::vector<ClassSetup> setups;
  for (int cls : classes) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= target.class_count()) {
      throw UsageError("target class " + std::to_string(cls) + " is out of range");
    }
    ClassSetup cs;
    cs.cls = cls;
    cs.label = target.labels.at(static_cast<std::size_t>(cls));
    const auto ucls = static_cast<std::uint64_t>(cls);
    if (!provider) {
      cs.gen_pool = make_pool(validation, cls, source.encoding, plan.max_gen_samples,
                              derive_seed(plan.seed, "sample", {ucls, 0}));
    }
    cs.eval_pool =
        make_pool(test, cls, target.encoding, plan.max_eval_samples, derive_seed(plan.seed, "sample", {ucls, 1}));
    if (cs.eval_pool.size() == 0) throw DataError("class " + cs.label + " has no test samples");
    if (has_headers(ek) && any_port) cs.ported = port_randomized(cs.eval_pool, ek, plan.ports, port_seed);
    const Scorer scorer(target, cls);
    cs.clean = scorer.recall(cs.eval_pool, nullptr);
    if (cs.ported && wants(variants, Variant::port)) cs.port = scorer.recall(*cs.ported, nullptr);
    setups.push_back(std::move(cs));
  }

  const JobContext ctx{source, target, plan, provider, variants, kind, port_seed};
  const std::size_t per_class = plan.strengths.size();
  const std::size_t jobs = setups.size() * per_class;
  std::vector<JobResult> results(jobs);
  auto job = [&](std::size_t j) { run_job_guarded(ctx, setups[j / per_class], plan.strengths[j % per_class], results[j]); };

  // Finalizes job j on the calling thread; returns false after the first error.
  auto finish = [&](std::size_t j) {
    JobResult& r = results[j];
    if (r.error) std::rethrow_exception(r.error);
    const ClassSetup& cs = setups[j / per_class];
    if (j % per_class == 0) {
      ClassReport cr;
      cr.class_index = cs.cls;
      cr.label = cs.label;
      cr.gen_samples = cs.gen_pool.size();
      cr.eval_samples = cs.eval_pool.size();
      report.classes.push_back(std::move(cr));
    }
    ClassReport& cr = report.classes.back();
    if (r.generated && options.on_uap) options.on_uap(cs.cls, r.row.strength, *r.generated);
    r.generated.reset();
    report.log.push_back(r.log);
    cr.rows.push_back(r.row);
    cr.rand_runs.insert(cr.rand_runs.end(), r.rand_runs.begin(), r.rand_runs.end());
    if (options.progress) {
      std::string msg = "class " + cs.label + " strength " + number(r.row.strength) + ":";
      for (Variant v : kAllVariants) {
        if (r.row[v]) msg += " " + std::string(to_string(v)) + "=" + fixed2(*r.row[v]);
      }
      options.progress(msg);
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(options.threads, 1), jobs);
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs; ++j) {
      job(j);
      finish(j);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::atomic<bool>> done(jobs);
    std::mutex mu;
    std::condition_variable cv;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
          job(j);
          {
            std::lock_guard lock(mu);
            done[j] = true;
          }
          cv.notify_all();
        }
      });
    }
    try {
      for (std::size_t j = 0; j < jobs; ++j) {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return done[j].load(); });
        lock.unlock();
        finish(j);
      }
    } catch (...) {
      next = jobs;  // remaining workers stop after their current job
      throw;
    }
  }
  return report;
}

AttackReport run_experiment(const nn::Model& model, std::span<const Flow> validation, std::span<const Flow> test,
                            const ExperimentPlan& plan, const RunOptions& options) {
  return run_transfer(model, model, validation, test, plan, {}, options);
}

// ---- CSV ----------------------------------------------------------------------

namespace {

constexpr std::string_view kReportHeader = "strength,no_attack,adv,rand,adv_port,rand_port,port";

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

std::string_view adv_name(AttackKind k) {
  switch (k) {
    case AttackKind::adv_pad: return "Pad";
    case AttackKind::adv_pay: return "Pay";
    case AttackKind::adv_burst: return "Burst";
  }
  return "";
}

}  // namespace

std::string report_csv(const ClassReport& report) {
  std::string out(kReportHeader);
  out += '\n';
  for (const auto& row : report.rows) {
    out += number(row.strength);
    for (Variant v : kAllVariants) {
      out += ',';
      if (row[v]) out += fixed2(*row[v]);
    }
    out += '\n';
  }
  return out;
}

void write_report_csv(const ClassReport& report, const std::filesystem::path& path) {
  write_text_file(path, report_csv(report));
}

std::vector<StrengthRow> parse_report_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) {
    throw DataError("report CSV must start with the header '" + std::string(kReportHeader) + "'");
  }
  std::vector<StrengthRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != kVariantCount + 1) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(kVariantCount + 1) +
                      " fields");
    }
    StrengthRow row;
    row.strength = parse_number(fields[0], line_no);
    for (std::size_t i = 0; i < kVariantCount; ++i) {
      if (!fields[i + 1].empty()) row.recall[i] = parse_number(fields[i + 1], line_no);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string transfer_csv(const AttackReport& report) {
  std::string out = "attack,parameter,overall_accuracy";
  for (const auto& c : report.classes) out += "," + c.label;
  out += '\n';
  if (report.classes.empty()) return out;

  auto emit = [&](const std::string& name, const std::string& param, std::size_t row, Variant v) {
    std::string line = name + "," + param + ",";
    if (auto acc = report.overall(row, v)) line += fixed2(*acc);
    for (const auto& c : report.classes) {
      line += ',';
      if (row < c.rows.size() && c.rows[row][v]) line += fixed2(*c.rows[row][v]);
    }
    out += line + '\n';
  };
  const std::string suffix(adv_name(report.attack));
  const std::size_t rows = report.classes.front().rows.size();
  if (rows == 0) return out;
  if (report.classes.front().rows[0][Variant::no_attack]) emit("NoAttack", "", 0, Variant::no_attack);
  if (report.classes.front().rows[0][Variant::port]) emit("Port", "", 0, Variant::port);
  const std::array<std::pair<Variant, std::string>, 4> named = {{{Variant::adv, "Adv" + suffix},
                                                                 {Variant::rand, "Rand" + suffix},
                                                                 {Variant::adv_port, "Adv" + suffix + "+Port"},
                                                                 {Variant::rand_port, "Rand" + suffix + "+Port"}}};
  for (std::size_t r = 0; r < rows; ++r) {
    for (const auto& [v, name] : named) {
      if (report.classes.front().rows[r][v]) emit(name, number(report.classes.front().rows[r].strength), r, v);
    }
  }
  return out;
}

std::string metrics_csv(const nn::Metrics& metrics, std::span<const std::string> labels) {
  std::string out = "class,precision,recall,fscore\n";
  for (std::size_t c = 0; c < metrics.classes.size(); ++c) {
    const auto& m = metrics.classes[c];
    out += (c < labels.size() ? labels[c] : std::to_string(c)) + ",";
    if (m.precision_defined) out += fixed2(100.0 * m.precision);
    out += "," + fixed2(100.0 * m.recall) + "," + fixed2(100.0 * m.fscore) + "\n";
  }
  // Micro averages coincide with accuracy for single-label classification.
  const std::string acc = fixed2(100.0 * metrics.accuracy);
  out += "overall," + acc + "," + acc + "," + acc + "\n";
  return out;
}

std::string run_log_jsonl(const AttackReport& report) {
  std::string out;
  for (const auto& g : report.log) {
    const json j{{"class", report.labels.at(static_cast<std::size_t>(g.class_index))},
                 {"strength", g.strength},
                 {"gen_seed", g.gen_seed},
                 {"rand_seed", g.rand_seed},
                 {"port_seed", g.port_seed},
                 {"final_loss", g.final_loss},
                 {"skipped", g.skipped},
                 {"seconds", g.seconds}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace ant
