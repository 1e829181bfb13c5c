#include "tpet/commands.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "tpet/baselines.hpp"
#include "tpet/scenario.hpp"
#include "tpet/util.hpp"

namespace tpet::cli {

using nlohmann::json;

namespace {

struct LoadedEnv {
  sim::RoadNetwork net;
  sim::FlowSpec flows;
};

LoadedEnv load_env(const config::RunConfig& cfg) {
  if (cfg.network_path.empty() || cfg.flows_path.empty())
    throw config::ConfigError("config must name 'network' and 'flows' files");
  LoadedEnv env;
  env.net = sim::load_network(util::read_file(cfg.network_path));
  env.flows = sim::load_flows(util::read_file(cfg.flows_path), env.net);
  return env;
}

dsl::Signature signature_for(const sim::RoadNetwork& net) {
  int n = -1;
  for (const auto& inter : net.intersections) {
    int p = static_cast<int>(inter.phases.size());
    n = n < 0 ? p : std::min(n, p);
  }
  dsl::Signature sig;
  sig.phase_count = std::max(n, 1);
  return sig;
}

sim::Controller make_controller(const std::string& spec, const config::RunConfig& cfg,
                                const sim::RoadNetwork& net, uint64_t seed) {
  if (spec == "random") return baselines::random_controller(seed);
  if (spec == "fixedtime")
    return baselines::fixed_time_controller(net, cfg.sim, cfg.fixed_time_plan);
  if (spec == "maxpressure") return baselines::max_pressure_controller();
  if (spec.rfind("policy:", 0) == 0) {
    std::string path = spec.substr(7);
    dsl::PolicySource src{util::read_file(path), path, 0};
    auto parsed = dsl::parse(src, signature_for(net));
    if (!parsed.ok())
      throw config::ConfigError("policy file " + path + ": " + parsed.error.to_string());
    return baselines::policy_controller(*parsed.program);
  }
  throw config::ConfigError("unknown controller '" + spec +
                            "' (expected random|fixedtime|maxpressure|policy:<file>)");
}

std::string metrics_row(const std::string& name, const sim::MetricsReport& m) {
  std::ostringstream s;
  s << std::left << std::setw(22) << name << std::right << std::setw(10)
    << util::fmt_double(m.att) << std::setw(10) << util::fmt_double(m.aql) << std::setw(10)
    << util::fmt_double(m.awt) << std::setw(12) << m.completed << std::setw(11) << m.remaining;
  return s.str();
}

const char* metrics_header() {
  return "controller                   ATT       AQL       AWT   completed  remaining";
}

struct MeanStd {
  double mean = 0, std_dev = 0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  // Identical samples (deterministic controllers) report exactly zero spread.
  bool all_equal = true;
  for (double x : xs)
    if (x != xs.front()) all_equal = false;
  if (all_equal) {
    r.mean = xs.front();
    return r;
  }
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double acc = 0;
  for (double x : xs) acc += (x - r.mean) * (x - r.mean);
  r.std_dev = std::sqrt(acc / static_cast<double>(xs.size()));
  return r;
}

std::string ms(const MeanStd& v) {
  return util::fmt_double(v.mean) + " +- " + util::fmt_double(v.std_dev);
}

evo::EvalEnv eval_env(const config::RunConfig& cfg, const LoadedEnv& env) {
  evo::EvalEnv e;
  e.net = &env.net;
  e.flows = &env.flows;
  e.horizon = cfg.horizon;
  e.sim = cfg.sim;
  e.ssa = cfg.ssa;
  e.caf = cfg.caf;
  e.fitness = cfg.evolution.fitness;
  return e;
}

}  // namespace

int cmd_simulate(const config::RunConfig& cfg, const std::string& controller_spec) {
  LoadedEnv env = load_env(cfg);
  std::cout << metrics_header() << "\n";
  std::vector<double> att, aql, awt;
  for (uint64_t seed : cfg.seeds) {
    auto controller = make_controller(controller_spec, cfg, env.net, seed);
    auto ep = sim::run_episode(env.net, env.flows, controller, cfg.horizon, seed, cfg.sim,
                               cfg.ssa);
    if (ep.aborted) {
      std::cerr << "episode aborted: " << ep.error << "\n";
      return kExitRuntime;
    }
    std::string tag = "seed" + std::to_string(seed);
    util::write_file_atomic(cfg.out_dir + "/events_" + tag + ".jsonl",
                            sim::events_to_jsonl(ep.events));
    util::write_file_atomic(cfg.out_dir + "/decisions_" + tag + ".jsonl",
                            caf::decisions_to_jsonl(ep.decisions));
    util::write_file_atomic(cfg.out_dir + "/metrics_" + tag + ".json",
                            sim::metrics_to_json(ep.metrics));
    std::cout << metrics_row(controller_spec + " @" + tag, ep.metrics) << "\n";
    att.push_back(ep.metrics.att);
    aql.push_back(ep.metrics.aql);
    awt.push_back(ep.metrics.awt);
  }
  std::cout << controller_spec << " mean: ATT " << ms(mean_std(att)) << ", AQL "
            << ms(mean_std(aql)) << ", AWT " << ms(mean_std(awt)) << "\n";
  return kExitOk;
}

int cmd_compare(const config::RunConfig& cfg, const std::vector<std::string>& policy_files) {
  LoadedEnv env = load_env(cfg);
  std::vector<std::string> specs = {"random", "fixedtime", "maxpressure"};
  for (const auto& p : policy_files) specs.push_back("policy:" + p);

  std::cout << "rows: controllers on identical seeds; columns: mean +- std over "
            << cfg.seeds.size() << " seed(s)\n";
  if (cfg.seeds.size() == 1)
    std::cout << "note: single seed, std reported as 0\n";
  std::ostringstream table;
  table << std::left << std::setw(24) << "controller" << std::setw(20) << "ATT(s)"
        << std::setw(20) << "AQL(veh)" << std::setw(20) << "AWT(s)" << "\n";
  json summary;
  for (const auto& spec : specs) {
    std::vector<double> att, aql, awt;
    for (uint64_t seed : cfg.seeds) {
      auto controller = make_controller(spec, cfg, env.net, seed);
      auto ep =
          sim::run_episode(env.net, env.flows, controller, cfg.horizon, seed, cfg.sim, cfg.ssa);
      if (ep.aborted) {
        std::cerr << "episode aborted: " << ep.error << "\n";
        return kExitRuntime;
      }
      att.push_back(ep.metrics.att);
      aql.push_back(ep.metrics.aql);
      awt.push_back(ep.metrics.awt);
    }
    auto a = mean_std(att), q = mean_std(aql), w = mean_std(awt);
    table << std::left << std::setw(24) << spec << std::setw(20) << ms(a) << std::setw(20)
          << ms(q) << std::setw(20) << ms(w) << "\n";
    summary[spec] = {{"att", {{"mean", a.mean}, {"std", a.std_dev}}},
                     {"aql", {{"mean", q.mean}, {"std", q.std_dev}}},
                     {"awt", {{"mean", w.mean}, {"std", w.std_dev}}}};
  }
  std::cout << table.str();
  util::write_file_atomic(cfg.out_dir + "/compare.json", summary.dump(2) + "\n");
  return kExitOk;
}

int cmd_evolve(const config::RunConfig& cfg) {
  LoadedEnv env = load_env(cfg);
  evo::EvalEnv e = eval_env(cfg, env);

  evo::EvolutionConfig evo_cfg = cfg.evolution;
  if (evo_cfg.eval_seeds.empty() || evo_cfg.eval_seeds == std::vector<uint64_t>{1})
    evo_cfg.eval_seeds = cfg.seeds;

  bool exhausted = false;
  std::vector<double> best_fitness;
  for (int run = 0; run < evo_cfg.runs; ++run) {
    std::unique_ptr<evo::MutationEngine> engine;
    if (cfg.engine_kind == "mock") {
      engine = std::make_unique<llm::MockEngine>(cfg.mock_seed + static_cast<uint64_t>(run),
                                                 e.phase_count());
    } else {
      engine = std::make_unique<llm::RemoteEngine>(cfg.engine);  // throws without the token
    }
    auto result = evo::evolve(e, *engine, evo_cfg);
    std::string tag = "run" + std::to_string(run);
    util::write_file_atomic(cfg.out_dir + "/history_" + tag + ".jsonl",
                            evo::history_to_jsonl(result.history));
    util::write_file_atomic(cfg.out_dir + "/best_" + tag + ".tpet", result.best.source.text);
    util::write_file_atomic(cfg.out_dir + "/critique_" + tag + ".txt", result.best.critique_text);
    best_fitness.push_back(result.best.fitness);
    std::cout << tag << ": best fitness " << util::fmt_double(result.best.fitness) << " ("
              << result.best.name << ", " << result.per_generation.size() << " generations)"
              << (result.status == evo::RunStatus::EngineExhausted ? " [engine exhausted]" : "")
              << "\n";
    if (result.status == evo::RunStatus::EngineExhausted) exhausted = true;
  }
  auto stat = mean_std(best_fitness);
  json summary{{"best_fitness", best_fitness},
               {"mean", stat.mean},
               {"std", stat.std_dev},
               {"runs", evo_cfg.runs}};
  util::write_file_atomic(cfg.out_dir + "/summary.json", summary.dump(2) + "\n");
  std::cout << "best fitness over " << evo_cfg.runs << " run(s): " << ms(stat) << "\n";
  return exhausted ? kExitEngineExhausted : kExitOk;
}

int cmd_analyze(const config::RunConfig& cfg, const std::string& log_path,
                const std::string& out_path) {
  caf::CAFConfig caf_cfg = cfg.caf;
  caf_cfg.interval_seconds = cfg.sim.decision_interval;
  auto logs = caf::decisions_from_jsonl(util::read_file(log_path));
  std::vector<caf::Critique> parts;
  for (const auto& log : logs) parts.push_back(caf::analyze(log, caf_cfg));
  caf::Critique critique = caf::merge(parts);
  // A bare log carries no fitness context; the summary line shows zeros.
  std::cout << caf::render_critique(critique, sim::MetricsReport{}, caf_cfg);
  std::string out = out_path.empty() ? cfg.out_dir + "/critique.json" : out_path;
  util::write_file_atomic(out, caf::critique_to_json(critique));
  return kExitOk;
}

int cmd_gen_scenario(const std::string& kind_s, const std::string& grid_s, uint64_t seed,
                     const std::string& out_dir) {
  scenario::Kind kind = scenario::kind_from_string(kind_s);
  scenario::GridSpec grid;
  size_t x = grid_s.find('x');
  if (x == std::string::npos)
    throw config::ConfigError("grid must look like 2x2 (rows x cols)");
  grid.rows = std::stoi(grid_s.substr(0, x));
  grid.cols = std::stoi(grid_s.substr(x + 1));
  auto sc = scenario::generate(kind, grid, seed);
  util::write_file_atomic(out_dir + "/network.json", sc.network_json);
  util::write_file_atomic(out_dir + "/flows.json", sc.flows_json);
  std::cout << "wrote " << out_dir << "/network.json and " << out_dir << "/flows.json ("
            << sc.network.intersections.size() << " intersections, " << sc.flows.size()
            << " flow entries)\n";
  return kExitOk;
}

int cmd_dump_vocab(const config::RunConfig& cfg) {
  std::cout << ssa::vocabulary_description(cfg.ssa);
  return kExitOk;
}

}  // namespace tpet::cli
