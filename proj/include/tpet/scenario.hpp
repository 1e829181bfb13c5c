#pragma once

#include <cstdint>
#include <string>

#include "tpet/network.hpp"

namespace tpet::scenario {

enum class Kind { Symmetric, Asymmetric, Surge };

Kind kind_from_string(const std::string& s);  // throws std::invalid_argument

struct GridSpec {
  int rows = 1;
  int cols = 1;  // both within [1, 4]
};

struct Scenario {
  sim::RoadNetwork network;
  sim::FlowSpec flows;
  std::string network_json;
  std::string flows_json;
};

// Parameterized grid with three-lane approaches (right/through/left lanes),
// four phases per intersection (NS through, EW through, NS left, EW left) and
// the named demand pattern. Per-entry rates carry a small seed-derived jitter,
// so generation is deterministic in the seed. The surge kind doubles the EW
// through demand inside [surge_start, surge_end).
struct ScenarioParams {
  int64_t horizon = 3600;
  double surge_start = 1200;
  double surge_end = 2400;
  double surge_factor = 2.0;
};

Scenario generate(Kind kind, const GridSpec& grid, uint64_t seed,
                  const ScenarioParams& params = {});

}  // namespace tpet::scenario
