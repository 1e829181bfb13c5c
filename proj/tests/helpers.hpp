#pragma once

// Shared fixtures for the test suites: tiny hand-made networks and an
// independent brute-force re-implementation of the defect rules.

#include <algorithm>
#include <string>
#include <vector>

#include "tpet/caf.hpp"
#include "tpet/network.hpp"
#include "tpet/sim.hpp"
#include "tpet/ssa.hpp"
#include "tpet/util.hpp"

namespace tpet::testing {

// One single-movement phase per index; NS on even phases, EW on odd.
inline ssa::IntersectionObservation random_view(util::Rng& rng, int phases) {
  ssa::IntersectionObservation v;
  v.active_phase = rng.uniform_int(phases);
  v.interval_seconds = 30;
  for (int p = 0; p < phases; ++p) {
    v.phases.push_back({p});
    v.phase_axis.push_back(p % 2 == 0 ? sim::PhaseAxis::NS : sim::PhaseAxis::EW);
    ssa::MovementObservation mo;
    mo.upstream_queue = rng.uniform_int(50);
    mo.downstream_mean_queue = rng.uniform(0.0, 20.0);
    mo.max_wait = rng.uniform_int(200);
    v.movements.push_back(mo);
  }
  return v;
}

// Every comparison the SSA predicate rules evaluate; a perturbation that
// flips none of them stayed strictly inside every open threshold interval.
inline std::vector<bool> ssa_rule_indicators(const ssa::IntersectionObservation& v,
                                             const ssa::TemporalRegisters& regs,
                                             const ssa::SSAConfig& cfg) {
  int n = static_cast<int>(v.phases.size());
  std::vector<double> pressure(static_cast<size_t>(n));
  std::vector<double> wait(static_cast<size_t>(n));
  for (int p = 0; p < n; ++p) {
    for (int m : v.phases[static_cast<size_t>(p)]) {
      pressure[static_cast<size_t>(p)] += v.movements[static_cast<size_t>(m)].upstream_queue -
                                          v.movements[static_cast<size_t>(m)].downstream_mean_queue;
      wait[static_cast<size_t>(p)] =
          std::max(wait[static_cast<size_t>(p)],
                   static_cast<double>(v.movements[static_cast<size_t>(m)].max_wait));
    }
  }
  std::vector<double> timer = regs.starvation_timer;
  timer.resize(static_cast<size_t>(n), 0.0);
  for (int p = 0; p < n; ++p)
    timer[static_cast<size_t>(p)] =
        p == v.active_phase ? 0.0 : timer[static_cast<size_t>(p)] + v.interval_seconds;

  std::vector<bool> ind;
  double maxp = *std::max_element(pressure.begin(), pressure.end());
  ind.push_back(maxp >= cfg.cut_moderate);
  ind.push_back(maxp >= cfg.cut_high);
  ind.push_back(maxp >= cfg.cut_critical);
  int best = 0;
  for (int p = 1; p < n; ++p)
    if (pressure[static_cast<size_t>(p)] > pressure[static_cast<size_t>(best)]) best = p;
  for (int p = 0; p < n; ++p) ind.push_back(p == best);
  double second = -1e300;
  for (int p = 0; p < n; ++p)
    if (p != best) second = std::max(second, pressure[static_cast<size_t>(p)]);
  ind.push_back(n > 1 && pressure[static_cast<size_t>(best)] - second >= cfg.dominant_margin);
  for (int p = 0; p < n; ++p)
    ind.push_back(pressure[static_cast<size_t>(p)] > cfg.theta_demand &&
                  timer[static_cast<size_t>(p)] > cfg.tau_critical);
  double maxw = *std::max_element(wait.begin(), wait.end());
  ind.push_back(maxw > cfg.urgency_wait);
  double ns = 0, ew = 0;
  for (int p = 0; p < n; ++p) (p % 2 == 0 ? ns : ew) += pressure[static_cast<size_t>(p)];
  double nsc = std::max(ns, 0.0), ewc = std::max(ew, 0.0);
  ind.push_back(nsc > 0 && nsc >= cfg.imbalance_ratio * ewc);
  ind.push_back(ewc > 0 && ewc >= cfg.imbalance_ratio * nsc);
  return ind;
}

inline bool ssa_categoricals_equal(const ssa::StructuredFacts& a, const ssa::StructuredFacts& b) {
  return a.congestion == b.congestion && a.dominant_flow == b.dominant_flow &&
         a.starvation_risk == b.starvation_risk && a.urgency == b.urgency &&
         a.imbalance == b.imbalance;
}

// Boundary -> A -> boundary, one movement, one phase.
inline sim::RoadNetwork chain_network(int travel = 5, int capacity = 30, int min_green = 10,
                                      int yellow = 5) {
  sim::RoadNetwork net;
  net.nodes = {"B_in", "A", "B_out"};
  net.boundary = {0, 2};
  net.links.push_back({0, 0, 1, 1, travel, capacity});
  net.links.push_back({1, 1, 2, 1, travel, capacity});
  sim::Intersection a;
  a.id = "A";
  a.node = 1;
  a.movements = {{0, 0, 1}};
  a.phases = {{0}};
  a.phase_axis = {sim::PhaseAxis::NS};
  a.min_green = min_green;
  a.yellow = yellow;
  net.intersections.push_back(a);
  net.conflicts.push_back({});
  return net;
}

// Two approaches into A, two one-movement phases, two exits.
inline sim::RoadNetwork two_phase_network(int travel = 5, int capacity = 30, int min_green = 10,
                                          int yellow = 5) {
  sim::RoadNetwork net;
  net.nodes = {"B_n", "B_w", "A", "B_s", "B_e"};
  net.boundary = {0, 1, 3, 4};
  net.links.push_back({0, 0, 2, 1, travel, capacity});  // B_n -> A
  net.links.push_back({1, 1, 2, 1, travel, capacity});  // B_w -> A
  net.links.push_back({2, 2, 3, 1, travel, capacity});  // A -> B_s
  net.links.push_back({3, 2, 4, 1, travel, capacity});  // A -> B_e
  sim::Intersection a;
  a.id = "A";
  a.node = 2;
  a.movements = {{0, 0, 2}, {1, 0, 3}};
  a.phases = {{0}, {1}};
  a.phase_axis = {sim::PhaseAxis::NS, sim::PhaseAxis::EW};
  a.min_green = min_green;
  a.yellow = yellow;
  net.intersections.push_back(a);
  net.conflicts.push_back({{0, 1}});
  return net;
}

// Random decision log with freely chosen facts; exercises the analyzers on
// inputs no real episode is guaranteed to produce.
inline std::vector<caf::DecisionRecord> random_log(uint64_t seed, int max_len, int phases) {
  util::Rng rng(util::splitmix64(seed) ^ 0x10C5ULL);
  int len = 1 + rng.uniform_int(max_len);
  std::vector<caf::DecisionRecord> log;
  for (int t = 0; t < len; ++t) {
    caf::DecisionRecord r;
    r.t = t;
    r.action = rng.uniform_int(phases);
    r.deferred = rng.chance(0.1);
    auto& f = r.facts;
    for (int p = 0; p < phases; ++p) {
      f.pressure.push_back(rng.chance(0.3) ? 0.0 : rng.uniform(-5.0, 25.0));
      f.queue.push_back(rng.chance(0.3) ? 0.0 : rng.uniform(0.0, 20.0));
      f.wait.push_back(rng.uniform(0.0, 200.0));
      f.starvation.push_back(rng.uniform(0.0, 300.0));
      f.starvation_risk.push_back(rng.chance(0.15));
    }
    if (rng.chance(0.8)) f.starvation[static_cast<size_t>(rng.uniform_int(phases))] = 0.0;
    log.push_back(std::move(r));
  }
  return log;
}

// Brute-force defect scan: direct quantifier expansion over every decision,
// phase and window, mirroring the formal rules but none of analyze()'s
// incremental bookkeeping.
inline caf::Critique naive_analyze(const std::vector<caf::DecisionRecord>& log,
                                   const caf::CAFConfig& cfg) {
  caf::Critique c;
  if (!cfg.enabled || log.empty()) return c;
  const int T = static_cast<int>(log.size());
  const int phases = static_cast<int>(log[0].facts.pressure.size());

  auto demand = [&](int t, int p) {
    return log[static_cast<size_t>(t)].facts.queue[static_cast<size_t>(p)] +
           log[static_cast<size_t>(t)].facts.pressure[static_cast<size_t>(p)];
  };
  auto active = [&](int t) {
    int best = 0;
    const auto& s = log[static_cast<size_t>(t)].facts.starvation;
    for (int p = 1; p < phases; ++p)
      if (s[static_cast<size_t>(p)] < s[static_cast<size_t>(best)]) best = p;
    return best;
  };
  auto pressure = [&](int t, int p) {
    return log[static_cast<size_t>(t)].facts.pressure[static_cast<size_t>(p)];
  };

  for (int t = 0; t < T; ++t) {
    int i = log[static_cast<size_t>(t)].action;
    if (i < 0 || i >= phases) continue;
    if (demand(t, i) >= cfg.epsilon_demand) continue;
    bool any_demand = false;
    for (int p = 0; p < phases; ++p)
      if (demand(t, p) >= cfg.epsilon_demand) any_demand = true;
    if (!any_demand && i == active(t)) continue;
    caf::Defect d;
    d.pattern = caf::DefectPattern::WastedGreenTime;
    d.t_begin = d.t_end = t;
    d.phase = i;
    d.demand = demand(t, i);
    c.wasted.push_back(d);
  }

  int window = 1;
  while ((window - 1) * cfg.interval_seconds < cfg.tau_crit) ++window;
  for (int p = 0; p < phases; ++p) {
    std::vector<bool> instance(static_cast<size_t>(T), false);
    for (int t = window - 1; t < T; ++t) {
      bool unserved = true;
      for (int k = t - window + 1; k <= t; ++k)
        if (log[static_cast<size_t>(k)].action == p) unserved = false;
      instance[static_cast<size_t>(t)] = unserved && pressure(t, p) > cfg.high_demand;
    }
    for (int t = 0; t < T; ++t) {
      if (!instance[static_cast<size_t>(t)]) continue;
      if (t > 0 && instance[static_cast<size_t>(t - 1)]) continue;  // not a run start
      int end = t;
      while (end + 1 < T && instance[static_cast<size_t>(end + 1)]) ++end;
      caf::Defect d;
      d.pattern = caf::DefectPattern::PhaseStarvation;
      d.t_begin = t - window + 1;
      d.t_end = end;
      d.phase = p;
      for (int k = t; k <= end; ++k)
        if (instance[static_cast<size_t>(k)])
          d.pressure_end = std::max(d.pressure_end, pressure(k, p));
      d.duration_s = (end - d.t_begin + 1) * cfg.interval_seconds;
      c.starved.push_back(d);
    }
  }

  for (int t = 1; t < T; ++t) {
    if (log[static_cast<size_t>(t)].deferred) continue;
    int i = active(t);
    if (log[static_cast<size_t>(t)].action == i) continue;
    if (!(pressure(t - 1, i) > cfg.high_demand)) continue;
    if (!(pressure(t, i) > cfg.residual_demand)) continue;
    caf::Defect d;
    d.pattern = caf::DefectPattern::PrematurePhaseSwitch;
    d.t_begin = d.t_end = t;
    d.phase = i;
    d.pressure_prev = pressure(t - 1, i);
    d.pressure_end = pressure(t, i);
    c.premature.push_back(d);
  }

  for (const auto& d : c.starved)
    c.worst_starvation_s = std::max(c.worst_starvation_s, d.duration_s);
  c.total_wasted_green_s = static_cast<int>(c.wasted.size()) * cfg.interval_seconds;
  return c;
}

inline bool defects_equal(const caf::Defect& a, const caf::Defect& b) {
  return a.pattern == b.pattern && a.t_begin == b.t_begin && a.t_end == b.t_end &&
         a.phase == b.phase && a.demand == b.demand && a.pressure_prev == b.pressure_prev &&
         a.pressure_end == b.pressure_end && a.duration_s == b.duration_s;
}

inline bool critiques_equal(const caf::Critique& a, const caf::Critique& b) {
  if (a.wasted.size() != b.wasted.size() || a.starved.size() != b.starved.size() ||
      a.premature.size() != b.premature.size())
    return false;
  for (size_t i = 0; i < a.wasted.size(); ++i)
    if (!defects_equal(a.wasted[i], b.wasted[i])) return false;
  for (size_t i = 0; i < a.starved.size(); ++i)
    if (!defects_equal(a.starved[i], b.starved[i])) return false;
  for (size_t i = 0; i < a.premature.size(); ++i)
    if (!defects_equal(a.premature[i], b.premature[i])) return false;
  return true;
}

}  // namespace tpet::testing
