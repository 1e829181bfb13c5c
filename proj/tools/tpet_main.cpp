#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tpet/commands.hpp"
#include "tpet/network.hpp"
#include "tpet/util.hpp"

using namespace tpet;

namespace {

config::RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) {
    config::RunConfig cfg;
    return cfg;
  }
  return config::load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tpet - traffic signal policy evolution laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<uint64_t> seed_override;
  app.add_option("--config", config_path, "run configuration file (JSON)");
  app.add_option("--seed", seed_override, "override the config seed list");

  auto* sim_cmd = app.add_subcommand("simulate", "run one episode per seed, write logs");
  std::string controller = "maxpressure";
  sim_cmd->add_option("--controller", controller,
                      "random | fixedtime | maxpressure | policy:<file>");

  auto* evolve_cmd = app.add_subcommand("evolve", "run the evolution loop, write best policy");
  std::string engine_kind;
  evolve_cmd->add_option("--engine", engine_kind, "mock | remote (overrides config)");

  auto* analyze_cmd = app.add_subcommand("analyze", "critique a decision log");
  std::string log_path, out_path;
  analyze_cmd->add_option("log", log_path, "decision log (JSON-lines)")->required();
  analyze_cmd->add_option("--out", out_path, "structured critique output path");

  auto* compare_cmd = app.add_subcommand("compare", "baselines (and policies) on shared seeds");
  std::vector<std::string> policies;
  compare_cmd->add_option("--policy", policies, "policy file(s) to include");

  auto* gen_cmd = app.add_subcommand("gen-scenario", "write network and flow files");
  std::string kind = "symmetric", grid = "1x1", out_dir = "scenario";
  uint64_t gen_seed = 1;
  gen_cmd->add_option("kind", kind, "symmetric | asymmetric | surge")->required();
  gen_cmd->add_option("--grid", grid, "rows x cols, 1x1 up to 4x4");
  gen_cmd->add_option("--seed", gen_seed, "generation seed");
  gen_cmd->add_option("--out", out_dir, "output directory");

  auto* vocab_cmd = app.add_subcommand("dump-vocab", "print the SSA predicate vocabulary");

  CLI11_PARSE(app, argc, argv);

  try {
    config::RunConfig cfg = load_config_or_default(config_path);
    if (!seed_override.empty()) cfg.seeds = seed_override;
    if (!engine_kind.empty()) cfg.engine_kind = engine_kind;
    cfg.validate();

    if (sim_cmd->parsed()) return cli::cmd_simulate(cfg, controller);
    if (evolve_cmd->parsed()) return cli::cmd_evolve(cfg);
    if (analyze_cmd->parsed()) return cli::cmd_analyze(cfg, log_path, out_path);
    if (compare_cmd->parsed()) return cli::cmd_compare(cfg, policies);
    if (gen_cmd->parsed()) return cli::cmd_gen_scenario(kind, grid, gen_seed, out_dir);
    if (vocab_cmd->parsed()) return cli::cmd_dump_vocab(cfg);
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kExitValidation;
  } catch (const sim::NetworkError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return cli::kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return cli::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitRuntime;
  }
  return cli::kExitOk;
}
