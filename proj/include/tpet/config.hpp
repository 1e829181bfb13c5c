#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpet/baselines.hpp"
#include "tpet/caf.hpp"
#include "tpet/engine.hpp"
#include "tpet/evolution.hpp"
#include "tpet/sim.hpp"
#include "tpet/ssa.hpp"

namespace tpet::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string network_path;
  std::string flows_path;
  std::string out_dir = "out";
  int64_t horizon = 3600;
  std::vector<uint64_t> seeds = {1, 2, 3};

  sim::SimConfig sim;
  ssa::SSAConfig ssa;
  caf::CAFConfig caf;
  evo::EvolutionConfig evolution;
  llm::EngineSettings engine;
  std::string engine_kind = "mock";  // mock | remote
  uint64_t mock_seed = 7;
  baselines::FixedTimePlan fixed_time_plan;  // empty = round robin

  void validate() const;  // throws ConfigError
};

// Every section is optional and falls back to the defaults above.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace tpet::config
