#pragma once

#include <string>
#include <vector>

#include "tpet/config.hpp"

namespace tpet::cli {

// Stable exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitEngineExhausted = 3;

// controller spec: random | fixedtime | maxpressure | policy:<file>
int cmd_simulate(const config::RunConfig& cfg, const std::string& controller_spec);
int cmd_evolve(const config::RunConfig& cfg);
int cmd_analyze(const config::RunConfig& cfg, const std::string& log_path,
                const std::string& out_path);
int cmd_compare(const config::RunConfig& cfg, const std::vector<std::string>& policy_files);
int cmd_gen_scenario(const std::string& kind, const std::string& grid, uint64_t seed,
                     const std::string& out_dir);
int cmd_dump_vocab(const config::RunConfig& cfg);

}  // namespace tpet::cli
