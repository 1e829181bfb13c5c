#include "tpet/baselines.hpp"

#include <memory>
#include <stdexcept>

#include "tpet/util.hpp"

namespace tpet::baselines {

sim::Controller random_controller(uint64_t seed) {
  auto rng = std::make_shared<util::Rng>(util::splitmix64(seed) ^ 0xBA5EBA11ULL);
  return [rng](const sim::SimState&, const sim::RoadNetwork& net,
               const std::vector<ssa::StructuredFacts>&) {
    std::vector<int> actions(net.intersections.size());
    for (size_t i = 0; i < actions.size(); ++i)
      actions[i] = rng->uniform_int(static_cast<int>(net.intersections[i].phases.size()));
    return actions;
  };
}

sim::Controller fixed_time_controller(const sim::RoadNetwork& net, const sim::SimConfig& cfg,
                                      const FixedTimePlan& plan) {
  // One resolved plan per intersection.
  auto plans = std::make_shared<std::vector<std::vector<std::pair<int, int>>>>();
  for (const auto& inter : net.intersections) {
    std::vector<std::pair<int, int>> p;
    if (plan.entries.empty()) {
      for (size_t ph = 0; ph < inter.phases.size(); ++ph)
        p.emplace_back(static_cast<int>(ph), cfg.decision_interval);
    } else {
      std::vector<bool> covered(inter.phases.size(), false);
      for (auto [phase, dur] : plan.entries) {
        if (phase < 0 || phase >= static_cast<int>(inter.phases.size()))
          throw std::invalid_argument("fixed-time plan: phase " + std::to_string(phase) +
                                      " unknown at intersection '" + inter.id + "'");
        if (dur < inter.min_green)
          throw std::invalid_argument("fixed-time plan: duration " + std::to_string(dur) +
                                      " below min green at intersection '" + inter.id + "'");
        covered[static_cast<size_t>(phase)] = true;
        p.emplace_back(phase, dur);
      }
      for (size_t ph = 0; ph < covered.size(); ++ph)
        if (!covered[ph])
          throw std::invalid_argument("fixed-time plan: phase " + std::to_string(ph) +
                                      " never covered at intersection '" + inter.id + "'");
    }
    plans->push_back(std::move(p));
  }

  return [plans](const sim::SimState& st, const sim::RoadNetwork& net,
                 const std::vector<ssa::StructuredFacts>&) {
    std::vector<int> actions(net.intersections.size());
    for (size_t i = 0; i < actions.size(); ++i) {
      const auto& p = (*plans)[i];
      int64_t cycle = 0;
      for (auto [_, dur] : p) cycle += dur;
      int64_t pos = st.clock % cycle;
      int phase = p.back().first;
      for (auto [ph, dur] : p) {
        if (pos < dur) {
          phase = ph;
          break;
        }
        pos -= dur;
      }
      actions[i] = phase;
    }
    return actions;
  };
}

sim::Controller max_pressure_controller() {
  return [](const sim::SimState& st, const sim::RoadNetwork& net,
            const std::vector<ssa::StructuredFacts>&) {
    std::vector<int> actions(net.intersections.size());
    for (size_t i = 0; i < actions.size(); ++i) {
      int best = 0;
      double best_p = sim::phase_pressure(st, net, static_cast<int>(i), 0);
      for (int p = 1; p < static_cast<int>(net.intersections[i].phases.size()); ++p) {
        double v = sim::phase_pressure(st, net, static_cast<int>(i), p);
        if (v > best_p) {
          best_p = v;
          best = p;
        }
      }
      actions[i] = best;
    }
    return actions;
  };
}

sim::Controller policy_controller(dsl::PolicyProgram program) {
  auto prog = std::make_shared<dsl::PolicyProgram>(std::move(program));
  return [prog](const sim::SimState&, const sim::RoadNetwork& net,
                const std::vector<ssa::StructuredFacts>& facts) {
    std::vector<int> actions(net.intersections.size());
    for (size_t i = 0; i < actions.size(); ++i) actions[i] = dsl::evaluate(*prog, facts[i]);
    return actions;
  };
}

}  // namespace tpet::baselines
