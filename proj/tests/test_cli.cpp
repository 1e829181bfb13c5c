#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "tpet/commands.hpp"
#include "tpet/dsl.hpp"
#include "tpet/scenario.hpp"
#include "tpet/util.hpp"

using namespace tpet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path.string() : (path / child).string();
  }
};

config::RunConfig scenario_config(const TempDir& dir, scenario::Kind kind) {
  auto sc = scenario::generate(kind, {1, 1}, 42);
  util::write_file_atomic(dir.str("network.json"), sc.network_json);
  util::write_file_atomic(dir.str("flows.json"), sc.flows_json);
  config::RunConfig cfg;
  cfg.network_path = dir.str("network.json");
  cfg.flows_path = dir.str("flows.json");
  cfg.out_dir = dir.str("out");
  cfg.seeds = {1, 2};
  return cfg;
}

}  // namespace

TEST_CASE("gen-scenario writes loadable files, deterministically per seed") {
  TempDir dir("tpet_cli_gen");
  CHECK(cli::cmd_gen_scenario("asymmetric", "1x1", 7, dir.str("a")) == cli::kExitOk);
  auto net = sim::load_network(util::read_file(dir.str("a/network.json")));
  auto flows = sim::load_flows(util::read_file(dir.str("a/flows.json")), net);
  CHECK(net.intersections.size() == 1);
  CHECK(!flows.empty());

  CHECK(cli::cmd_gen_scenario("asymmetric", "1x1", 7, dir.str("b")) == cli::kExitOk);
  CHECK(util::read_file(dir.str("a/network.json")) == util::read_file(dir.str("b/network.json")));
  CHECK(util::read_file(dir.str("a/flows.json")) == util::read_file(dir.str("b/flows.json")));

  CHECK(cli::cmd_gen_scenario("surge", "2x2", 7, dir.str("c")) == cli::kExitOk);
  auto net2 = sim::load_network(util::read_file(dir.str("c/network.json")));
  CHECK(net2.intersections.size() == 4);

  CHECK_THROWS(cli::cmd_gen_scenario("asymmetric", "9x9", 7, dir.str("d")));
  CHECK_THROWS(cli::cmd_gen_scenario("rush", "1x1", 7, dir.str("e")));
}

TEST_CASE("surge scenario doubles the EW through rate inside the window") {
  auto base = scenario::generate(scenario::Kind::Surge, {1, 1}, 11);
  double steady = 0, windowed = 0;
  for (const auto& e : base.flows) {
    if (!e.rate) continue;
    if (e.start == 0)
      steady += *e.rate;
    else
      windowed += *e.rate;
  }
  CHECK(windowed > 0);
  // The window entries replicate the EW through demand (surge factor 2).
  double ew_through = 0;
  for (const auto& e : base.flows)
    if (e.start == 0 && e.route.size() == 2 && e.rate) {
      // 1x1 through routes have 2 links; EW ones enter from B_W*/B_E*.
      const auto& from = base.network.nodes[base.network.links[e.route[0]].from];
      if (from[2] == 'W' || from[2] == 'E') ew_through += *e.rate;
    }
  CHECK(windowed == doctest::Approx(ew_through).epsilon(0.2));
}

TEST_CASE("cmd_simulate smoke: files written, deterministic per seed") {
  TempDir dir("tpet_cli_sim");
  auto cfg = scenario_config(dir, scenario::Kind::Symmetric);
  cfg.seeds = {5};
  REQUIRE(cli::cmd_simulate(cfg, "maxpressure") == cli::kExitOk);
  CHECK(fs::exists(dir.str("out/events_seed5.jsonl")));
  CHECK(fs::exists(dir.str("out/decisions_seed5.jsonl")));
  CHECK(fs::exists(dir.str("out/metrics_seed5.json")));
  auto first = util::read_file(dir.str("out/events_seed5.jsonl"));
  auto metrics = json::parse(util::read_file(dir.str("out/metrics_seed5.json")));
  CHECK(metrics["completed"].get<int>() > 0);

  REQUIRE(cli::cmd_simulate(cfg, "maxpressure") == cli::kExitOk);
  CHECK(util::read_file(dir.str("out/events_seed5.jsonl")) == first);

  SUBCASE("decision log written by simulate round-trips through analyze") {
    REQUIRE(cli::cmd_analyze(cfg, dir.str("out/decisions_seed5.jsonl"), dir.str("out/c.json")) ==
            cli::kExitOk);
    CHECK(fs::exists(dir.str("out/c.json")));
  }
}

TEST_CASE("cmd_simulate rejects an invalid policy file with a diagnostic") {
  TempDir dir("tpet_cli_badpolicy");
  auto cfg = scenario_config(dir, scenario::Kind::Symmetric);
  util::write_file_atomic(dir.str("bad.tpet"), "IF pressure > THEN ELSE");
  CHECK_THROWS_AS(cli::cmd_simulate(cfg, "policy:" + dir.str("bad.tpet")),
                  config::ConfigError);
  CHECK_THROWS_AS(cli::cmd_simulate(cfg, "hovercraft"), config::ConfigError);
}

TEST_CASE("cmd_analyze matches the hand-derived fixture counts") {
  TempDir dir("tpet_cli_analyze");
  config::RunConfig cfg;
  cfg.out_dir = dir.str("out");
  REQUIRE(cli::cmd_analyze(cfg, "fixtures/decision_log.jsonl", dir.str("critique.json")) ==
          cli::kExitOk);
  auto critique = json::parse(util::read_file(dir.str("critique.json")));
  CHECK(critique["counts"]["wasted_green_time"] == 1);
  CHECK(critique["counts"]["phase_starvation"] == 1);
  CHECK(critique["counts"]["premature_phase_switch"] == 1);
  CHECK(critique["worst_starvation_s"] == 210);

  SUBCASE("empty log file gives the zero critique") {
    util::write_file_atomic(dir.str("empty.jsonl"), "");
    REQUIRE(cli::cmd_analyze(cfg, dir.str("empty.jsonl"), dir.str("c2.json")) == cli::kExitOk);
    auto c2 = json::parse(util::read_file(dir.str("c2.json")));
    CHECK(c2["counts"]["wasted_green_time"] == 0);
  }
  SUBCASE("a truncated line is reported by number") {
    auto good = util::read_file("fixtures/decision_log.jsonl");
    size_t pos = 0;
    for (int i = 0; i < 6; ++i) pos = good.find('\n', pos) + 1;
    good.insert(pos, "{broken");
    util::write_file_atomic(dir.str("bad.jsonl"), good);
    try {
      cli::cmd_analyze(cfg, dir.str("bad.jsonl"), dir.str("c3.json"));
      FAIL("expected error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
  }
}

TEST_CASE("cmd_compare emits the summary with zero std for deterministic controllers") {
  TempDir dir("tpet_cli_compare");
  auto cfg = scenario_config(dir, scenario::Kind::Asymmetric);
  cfg.horizon = 1200;
  cfg.seeds = {1, 2};
  REQUIRE(cli::cmd_compare(cfg, {}) == cli::kExitOk);
  auto summary = json::parse(util::read_file(dir.str("out/compare.json")));
  // Random varies across seeds; FixedTime and MaxPressure are state-blind or
  // state-deterministic, but their per-seed ATT differs because arrivals
  // differ. Zero-variance rows need identical seeds; covered in acceptance.
  CHECK(summary.contains("random"));
  CHECK(summary.contains("fixedtime"));
  CHECK(summary.contains("maxpressure"));
  CHECK(summary["maxpressure"]["att"]["mean"].get<double>() > 0);
}

TEST_CASE("cmd_evolve smoke with the mock engine") {
  TempDir dir("tpet_cli_evolve");
  auto cfg = scenario_config(dir, scenario::Kind::Surge);
  cfg.horizon = 600;
  cfg.seeds = {1};
  cfg.evolution.population = 4;
  cfg.evolution.elites = 2;
  cfg.evolution.inner_iterations = 2;
  cfg.evolution.runs = 2;
  REQUIRE(cli::cmd_evolve(cfg) == cli::kExitOk);
  CHECK(fs::exists(dir.str("out/history_run0.jsonl")));
  CHECK(fs::exists(dir.str("out/best_run0.tpet")));
  CHECK(fs::exists(dir.str("out/best_run1.tpet")));
  auto summary = json::parse(util::read_file(dir.str("out/summary.json")));
  CHECK(summary["best_fitness"].size() == 2);
  CHECK(summary["mean"].get<double>() > 0);

  // Every history line is valid JSON.
  std::istringstream hist(util::read_file(dir.str("out/history_run0.jsonl")));
  std::string line;
  int lines = 0;
  while (std::getline(hist, line)) {
    if (line.empty()) continue;
    CHECK(!json::parse(line, nullptr, false).is_discarded());
    ++lines;
  }
  CHECK(lines > 0);

  // The best policy file parses under the scenario signature.
  auto best = util::read_file(dir.str("out/best_run0.tpet"));
  auto parsed = dsl::parse({best, "", 0}, dsl::Signature{4, 12, 16});
  CHECK(parsed.ok());
}

TEST_CASE("cmd_evolve with the remote engine fails fast without the token") {
  TempDir dir("tpet_cli_evolve_remote");
  auto cfg = scenario_config(dir, scenario::Kind::Symmetric);
  cfg.engine_kind = "remote";
  cfg.engine.auth_env = "TPET_TOKEN_DEFINITELY_NOT_SET";
  CHECK_THROWS_AS(cli::cmd_evolve(cfg), std::invalid_argument);
}

TEST_CASE("run config parsing") {
  SUBCASE("defaults apply and sections override") {
    auto cfg = config::parse_run_config(R"({
      "network": "n.json", "flows": "f.json", "seeds": [4],
      "sim": {"decision_interval": 15},
      "ssa": {"tau_critical": 60},
      "evolution": {"population": 5, "elites": 2},
      "engine": {"model": "test-model"}
    })");
    CHECK(cfg.sim.decision_interval == 15);
    CHECK(cfg.caf.interval_seconds == 15);  // follows the sim interval
    CHECK(cfg.ssa.tau_critical == 60);
    CHECK(cfg.evolution.population == 5);
    CHECK(cfg.engine.model == "test-model");
    CHECK(cfg.caf.high_demand == 8.0);  // untouched default
  }
  SUBCASE("invalid sections are rejected") {
    CHECK_THROWS_AS(config::parse_run_config(R"({"horizon": 37})"), config::ConfigError);
    CHECK_THROWS_AS(config::parse_run_config(R"({"evolution": {"population": 2, "elites": 5}})"),
                    config::ConfigError);
    CHECK_THROWS_AS(config::parse_run_config(R"({"engine_kind": "psychic"})"),
                    config::ConfigError);
    CHECK_THROWS_AS(config::parse_run_config("not json"), config::ConfigError);
  }
  SUBCASE("round-trips through its serializer") {
    config::RunConfig cfg;
    cfg.network_path = "x.json";
    cfg.flows_path = "y.json";
    cfg.evolution.fitness.awt = 0.5;
    auto again = config::parse_run_config(config::run_config_to_json(cfg));
    CHECK(again.network_path == "x.json");
    CHECK(again.evolution.fitness.awt == 0.5);
    CHECK(config::run_config_to_json(again) == config::run_config_to_json(cfg));
  }
}
