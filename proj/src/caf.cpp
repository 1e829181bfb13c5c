#include "tpet/caf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tpet/sim.hpp"
#include "tpet/util.hpp"

namespace tpet::caf {

using nlohmann::json;

void CAFConfig::validate() const {
  if (tau_crit <= 0) throw std::invalid_argument("caf: tau_crit must be > 0");
  if (!(epsilon_demand < high_demand))
    throw std::invalid_argument("caf: epsilon_demand must be < high_demand");
  if (interval_seconds < 1) throw std::invalid_argument("caf: interval_seconds must be >= 1");
}

const char* pattern_name(DefectPattern p) {
  switch (p) {
    case DefectPattern::WastedGreenTime: return "Wasted Green Time";
    case DefectPattern::PhaseStarvation: return "Phase Starvation";
    case DefectPattern::PrematurePhaseSwitch: return "Premature Phase Switch";
  }
  return "?";
}

double record_demand(const DecisionRecord& r, int phase) {
  return r.facts.queue[static_cast<size_t>(phase)] + r.facts.pressure[static_cast<size_t>(phase)];
}

int record_active_phase(const DecisionRecord& r) {
  int best = 0;
  for (int p = 1; p < static_cast<int>(r.facts.starvation.size()); ++p)
    if (r.facts.starvation[static_cast<size_t>(p)] < r.facts.starvation[static_cast<size_t>(best)])
      best = p;
  return best;
}

Critique analyze(const std::vector<DecisionRecord>& log, const CAFConfig& cfg) {
  Critique c;
  if (!cfg.enabled || log.empty()) return c;
  const int T = static_cast<int>(log.size());
  const int phases = static_cast<int>(log[0].facts.pressure.size());

  // Wasted Green Time: the selected phase shows near-zero demand. Holding the
  // already-active phase while every phase is empty is exempt.
  for (int t = 0; t < T; ++t) {
    const auto& r = log[static_cast<size_t>(t)];
    if (r.action < 0 || r.action >= phases) continue;
    double d = record_demand(r, r.action);
    if (d >= cfg.epsilon_demand) continue;
    bool all_idle = true;
    for (int p = 0; p < phases; ++p)
      if (record_demand(r, p) >= cfg.epsilon_demand) all_idle = false;
    if (all_idle && r.action == record_active_phase(r)) continue;
    Defect def;
    def.pattern = DefectPattern::WastedGreenTime;
    def.t_begin = def.t_end = t;
    def.phase = r.action;
    def.demand = d;
    c.wasted.push_back(def);
  }

  // Phase Starvation: phase i unserved across a window covering tau_crit
  // seconds while its pressure exceeds the high-demand bound at the window
  // end. Consecutive matches merge into one maximal defect.
  const int window = static_cast<int>(std::ceil(cfg.tau_crit / cfg.interval_seconds)) + 1;
  for (int p = 0; p < phases; ++p) {
    int open_begin = -1, open_end = -1;
    double worst_pressure = 0;
    auto close = [&]() {
      if (open_begin < 0) return;
      Defect def;
      def.pattern = DefectPattern::PhaseStarvation;
      def.t_begin = open_begin - window + 1;
      def.t_end = open_end;
      def.phase = p;
      def.pressure_end = worst_pressure;
      def.duration_s = (open_end - def.t_begin + 1) * cfg.interval_seconds;
      c.starved.push_back(def);
      open_begin = -1;
    };
    int last_served = -1;
    for (int t = 0; t < T; ++t) {
      if (log[static_cast<size_t>(t)].action == p) last_served = t;
      bool instance = t >= window - 1 && last_served < t - window + 1 &&
                      log[static_cast<size_t>(t)].facts.pressure[static_cast<size_t>(p)] >
                          cfg.high_demand;
      if (instance) {
        if (open_begin < 0) {
          open_begin = t;
          worst_pressure = 0;
        }
        open_end = t;
        worst_pressure = std::max(
            worst_pressure, log[static_cast<size_t>(t)].facts.pressure[static_cast<size_t>(p)]);
      } else {
        close();
      }
    }
    close();
  }

  // Premature Phase Switch: the served phase showed high demand at t-1, the
  // agent actually switched away at t, and residual demand still exceeds the
  // bound. Deferred actions never switched, so they cannot match.
  for (int t = 1; t < T; ++t) {
    const auto& prev = log[static_cast<size_t>(t - 1)];
    const auto& cur = log[static_cast<size_t>(t)];
    if (cur.deferred) continue;
    int active = record_active_phase(cur);
    if (cur.action == active) continue;
    if (prev.facts.pressure[static_cast<size_t>(active)] <= cfg.high_demand) continue;
    if (cur.facts.pressure[static_cast<size_t>(active)] <= cfg.residual_demand) continue;
    Defect def;
    def.pattern = DefectPattern::PrematurePhaseSwitch;
    def.t_begin = def.t_end = t;
    def.phase = active;
    def.pressure_prev = prev.facts.pressure[static_cast<size_t>(active)];
    def.pressure_end = cur.facts.pressure[static_cast<size_t>(active)];
    c.premature.push_back(def);
  }

  for (const auto& d : c.starved) c.worst_starvation_s = std::max(c.worst_starvation_s, d.duration_s);
  c.total_wasted_green_s = static_cast<int>(c.wasted.size()) * cfg.interval_seconds;
  return c;
}

Critique merge(const std::vector<Critique>& parts) {
  Critique out;
  for (const auto& p : parts) {
    out.wasted.insert(out.wasted.end(), p.wasted.begin(), p.wasted.end());
    out.starved.insert(out.starved.end(), p.starved.begin(), p.starved.end());
    out.premature.insert(out.premature.end(), p.premature.begin(), p.premature.end());
    out.worst_starvation_s = std::max(out.worst_starvation_s, p.worst_starvation_s);
    out.total_wasted_green_s += p.total_wasted_green_s;
  }
  return out;
}

namespace {

std::string fmt(double v) { return util::fmt_double(v, 1); }

void render_exemplars(std::ostringstream& s, const std::vector<Defect>& defects, int top_k) {
  int shown = 0;
  for (const auto& d : defects) {
    if (shown++ >= top_k) {
      s << "    ... " << (defects.size() - static_cast<size_t>(top_k)) << " more\n";
      break;
    }
    switch (d.pattern) {
      case DefectPattern::WastedGreenTime:
        s << "    decision " << d.t_begin << ": selected phase " << d.phase << " with demand "
          << fmt(d.demand) << " (near zero)\n";
        break;
      case DefectPattern::PhaseStarvation:
        s << "    decisions " << d.t_begin << "-" << d.t_end << ": phase " << d.phase
          << " unserved for " << d.duration_s << " s while pressure reached "
          << fmt(d.pressure_end) << "\n";
        break;
      case DefectPattern::PrematurePhaseSwitch:
        s << "    decision " << d.t_begin << ": switched away from phase " << d.phase
          << " (pressure " << fmt(d.pressure_prev) << " before, residual "
          << fmt(d.pressure_end) << ")\n";
        break;
    }
  }
}

}  // namespace

std::string render_critique(const Critique& c, const sim::MetricsReport& fitness,
                            const CAFConfig& cfg) {
  std::ostringstream s;
  s << "Fitness: ATT " << util::fmt_double(fitness.att) << " s, AQL "
    << util::fmt_double(fitness.aql) << " veh, AWT " << util::fmt_double(fitness.awt)
    << " s (" << fitness.completed << " completed, " << fitness.remaining << " in network)\n";
  if (c.total() == 0) {
    s << "No defect pattern matched.\n";
    return s.str();
  }
  s << "Defects:\n";
  s << "  " << pattern_name(DefectPattern::WastedGreenTime) << ": " << c.wasted.size();
  if (!c.wasted.empty()) s << " (" << c.total_wasted_green_s << " s of green wasted)";
  s << "\n";
  render_exemplars(s, c.wasted, cfg.top_k);
  s << "  " << pattern_name(DefectPattern::PhaseStarvation) << ": " << c.starved.size();
  if (!c.starved.empty()) s << " (worst " << c.worst_starvation_s << " s)";
  s << "\n";
  render_exemplars(s, c.starved, cfg.top_k);
  s << "  " << pattern_name(DefectPattern::PrematurePhaseSwitch) << ": " << c.premature.size()
    << "\n";
  render_exemplars(s, c.premature, cfg.top_k);
  s << "Directives:\n";
  if (!c.wasted.empty())
    s << "  - Avoid giving green to phases with near-zero demand; gate selections on queue or "
         "pressure.\n";
  if (!c.starved.empty())
    s << "  - Add a fairness override: serve a phase when starvation_risk[i] holds or "
         "starvation[i] grows large.\n";
  if (!c.premature.empty())
    s << "  - Hold high-pressure phases longer before switching away.\n";
  return s.str();
}

// ------------------------------------------------------------- persistence

namespace {

json facts_to_json(const ssa::StructuredFacts& f) {
  json j;
  j["congestion"] = ssa::to_string(f.congestion);
  if (f.dominant_flow)
    j["dominant_flow"] = *f.dominant_flow;
  else
    j["dominant_flow"] = nullptr;
  j["starvation_risk"] = f.starvation_risk;
  j["urgency"] = ssa::to_string(f.urgency);
  j["imbalance"] = ssa::to_string(f.imbalance);
  j["pressure"] = f.pressure;
  j["queue"] = f.queue;
  j["wait"] = f.wait;
  j["starvation"] = f.starvation;
  return j;
}

ssa::StructuredFacts facts_from_json(const json& j) {
  ssa::StructuredFacts f;
  f.congestion = ssa::congestion_from_string(j.at("congestion").get<std::string>());
  if (!j.at("dominant_flow").is_null()) f.dominant_flow = j["dominant_flow"].get<int>();
  f.starvation_risk = j.at("starvation_risk").get<std::vector<bool>>();
  f.urgency = ssa::urgency_from_string(j.at("urgency").get<std::string>());
  f.imbalance = ssa::imbalance_from_string(j.at("imbalance").get<std::string>());
  f.pressure = j.at("pressure").get<std::vector<double>>();
  f.queue = j.at("queue").get<std::vector<double>>();
  f.wait = j.at("wait").get<std::vector<double>>();
  f.starvation = j.at("starvation").get<std::vector<double>>();
  return f;
}

json defect_to_json(const Defect& d) {
  return json{{"pattern", pattern_name(d.pattern)},
              {"t_begin", d.t_begin},
              {"t_end", d.t_end},
              {"phase", d.phase},
              {"demand", d.demand},
              {"pressure_prev", d.pressure_prev},
              {"pressure_end", d.pressure_end},
              {"duration_s", d.duration_s}};
}

}  // namespace

std::string decisions_to_jsonl(const std::vector<std::vector<DecisionRecord>>& logs) {
  std::ostringstream s;
  for (size_t i = 0; i < logs.size(); ++i)
    for (const auto& r : logs[i]) {
      json j{{"i", i},
             {"t", r.t},
             {"action", r.action},
             {"deferred", r.deferred},
             {"facts", facts_to_json(r.facts)}};
      s << j.dump() << "\n";
    }
  return s.str();
}

std::vector<std::vector<DecisionRecord>> decisions_from_jsonl(const std::string& text) {
  std::vector<std::vector<DecisionRecord>> logs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("decision log: malformed JSON at line " + std::to_string(lineno));
    try {
      size_t i = j.at("i").get<size_t>();
      if (logs.size() <= i) logs.resize(i + 1);
      DecisionRecord r;
      r.t = j.at("t").get<int>();
      r.action = j.at("action").get<int>();
      r.deferred = j.value("deferred", false);
      r.facts = facts_from_json(j.at("facts"));
      logs[i].push_back(std::move(r));
    } catch (const json::exception& e) {
      throw std::runtime_error("decision log: bad record at line " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return logs;
}

std::string critique_to_json(const Critique& c) {
  json j;
  j["counts"] = {{"wasted_green_time", c.wasted.size()},
                 {"phase_starvation", c.starved.size()},
                 {"premature_phase_switch", c.premature.size()}};
  j["worst_starvation_s"] = c.worst_starvation_s;
  j["total_wasted_green_s"] = c.total_wasted_green_s;
  j["defects"] = json::array();
  for (const auto* list : {&c.wasted, &c.starved, &c.premature})
    for (const auto& d : *list) j["defects"].push_back(defect_to_json(d));
  return j.dump(2) + "\n";
}

}  // namespace tpet::caf
