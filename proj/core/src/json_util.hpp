#pragma once

// JSON forms of attack settings shared by perturbation files and plans.

#include <json.hpp>

#include "ant/attacks.hpp"
#include "ant/error.hpp"

namespace ant::detail {

using nlohmann::json;

inline json attack_json(const AttackConfig& attack) {
  return std::visit(
      [](const auto& c) -> json {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, AdvPadConfig>) {
          return {{"kind", "advpad"},
                  {"location", c.location == PadLocation::start ? "start" : "end"},
                  {"overhead_pct", c.overhead_pct}};
        } else if constexpr (std::is_same_v<C, AdvPayConfig>) {
          return {{"kind", "advpay"},
                  {"payload_size", c.payload_size},
                  {"dummy_index",
                   {{"policy", c.dummy_index.kind == DummyIndexPolicy::Kind::fixed ? "fixed" : "after_first_forward"},
                    {"index", c.dummy_index.index}}}};
        } else {
          const char* pol = c.selected_burst.kind == BurstPolicy::Kind::fixed           ? "fixed"
                            : c.selected_burst.kind == BurstPolicy::Kind::first_forward ? "first_forward"
                                                                                        : "first_backward";
          return {{"kind", "advburst"},
                  {"dummy_count", c.dummy_count},
                  {"selected_burst", {{"policy", pol}, {"index", c.selected_burst.index}}}};
        }
      },
      attack);
}

inline AttackConfig attack_from_json(const json& j) {
  const std::string kind = j.at("kind");
  if (kind == "advpad") {
    return AdvPadConfig{j.at("location") == "end" ? PadLocation::end : PadLocation::start,
                        j.at("overhead_pct").get<double>()};
  }
  if (kind == "advpay") {
    AdvPayConfig c;
    c.payload_size = j.at("payload_size");
    const auto& d = j.at("dummy_index");
    c.dummy_index.kind =
        d.at("policy") == "fixed" ? DummyIndexPolicy::Kind::fixed : DummyIndexPolicy::Kind::after_first_forward;
    c.dummy_index.index = d.at("index");
    return c;
  }
  if (kind == "advburst") {
    AdvBurstConfig c;
    c.dummy_count = j.at("dummy_count");
    const auto& s = j.at("selected_burst");
    const std::string pol = s.at("policy");
    c.selected_burst.kind = pol == "fixed"           ? BurstPolicy::Kind::fixed
                            : pol == "first_forward" ? BurstPolicy::Kind::first_forward
                                                     : BurstPolicy::Kind::first_backward;
    c.selected_burst.index = s.at("index");
    return c;
  }
  throw DataError("unknown attack kind '" + kind + "' in perturbation file");
}


inline json gen_json(const GenParams& g) {
  return {{"iterations", g.iterations},
          {"batch_size", g.batch_size},
          {"epsilon", g.epsilon},
          {"seed", g.seed},
          {"update", g.update == UpdateRule::sign ? "sign" : "gradient"}};
}

// Missing keys keep the values of `base`.
inline GenParams gen_from_json(const json& j, GenParams base) {
  base.iterations = j.value("iterations", base.iterations);
  base.batch_size = j.value("batch_size", base.batch_size);
  base.epsilon = j.value("epsilon", base.epsilon);
  base.seed = j.value("seed", base.seed);
  if (j.contains("update")) {
    const std::string u = j.at("update");
    if (u != "sign" && u != "gradient") throw DataError("update rule must be 'gradient' or 'sign'");
    base.update = u == "sign" ? UpdateRule::sign : UpdateRule::gradient;
  }
  return base;
}

}  // namespace ant::detail
