#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tpet/dsl.hpp"
#include "tpet/sim.hpp"

namespace tpet::baselines {

struct FixedTimePlan {
  std::vector<std::pair<int, int>> entries;  // (phase id, green duration s)
};

// Uniform phase draw per intersection per decision, seeded.
sim::Controller random_controller(uint64_t seed);

// Cycles the plan ignoring state; the phase at clock t follows cumulative
// durations modulo the cycle length. Validates the plan against every
// intersection (durations >= min_green, every phase covered). An empty plan
// means round-robin with one decision interval per phase.
sim::Controller fixed_time_controller(const sim::RoadNetwork& net, const sim::SimConfig& cfg,
                                      const FixedTimePlan& plan = {});

// argmax of sim::phase_pressure per intersection, ties to the lowest index.
sim::Controller max_pressure_controller();

// Evaluates a parsed policy on each intersection's structured facts.
sim::Controller policy_controller(dsl::PolicyProgram program);

}  // namespace tpet::baselines
