#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tpet/baselines.hpp"
#include "tpet/engine.hpp"
#include "tpet/evolution.hpp"
#include "tpet/scenario.hpp"

using namespace tpet;

namespace {

scenario::Scenario& surge_scenario() {
  static scenario::Scenario sc = scenario::generate(scenario::Kind::Surge, {1, 1}, 42);
  return sc;
}

evo::EvalEnv make_env(const scenario::Scenario& sc, int64_t horizon = 1800) {
  evo::EvalEnv env;
  env.net = &sc.network;
  env.flows = &sc.flows;
  env.horizon = horizon;
  return env;
}

evo::Candidate fake(double fitness, double awt, int generation) {
  evo::Candidate c;
  c.valid = true;
  c.fitness = fitness;
  c.metrics.awt = awt;
  c.generation = generation;
  return c;
}

}  // namespace

TEST_CASE("select_elites") {
  SUBCASE("lowest fitness wins, in order") {
    std::vector<evo::Candidate> pop{fake(290, 0, 0), fake(270, 0, 0), fake(310, 0, 0),
                                    fake(265, 0, 0)};
    auto elites = evo::select_elites(pop, 3);
    REQUIRE(elites.size() == 3);
    CHECK(elites[0].fitness == 265);
    CHECK(elites[1].fitness == 270);
    CHECK(elites[2].fitness == 290);
  }
  SUBCASE("ATT tie breaks on lower AWT") {
    std::vector<evo::Candidate> pop{fake(300, 40, 0), fake(300, 36, 1)};
    auto elites = evo::select_elites(pop, 1);
    CHECK(elites[0].metrics.awt == 36);
  }
  SUBCASE("AWT tie breaks on earlier generation") {
    std::vector<evo::Candidate> pop{fake(300, 40, 2), fake(300, 40, 1)};
    auto elites = evo::select_elites(pop, 1);
    CHECK(elites[0].generation == 1);
  }
  SUBCASE("k beyond the population returns everything") {
    std::vector<evo::Candidate> pop{fake(1, 0, 0), fake(2, 0, 0), fake(3, 0, 0)};
    CHECK(evo::select_elites(pop, 5).size() == 3);
  }
  SUBCASE("invalid candidates never reach the elite set") {
    std::vector<evo::Candidate> pop{fake(1, 0, 0)};
    evo::Candidate bad;
    bad.valid = false;
    bad.fitness = -1;
    pop.push_back(bad);
    auto elites = evo::select_elites(pop, 2);
    CHECK(elites.size() == 1);
  }
}

TEST_CASE("evaluate_candidate") {
  auto env = make_env(surge_scenario());
  std::vector<uint64_t> seeds{1, 2};

  SUBCASE("the MaxPressure-equivalent program scores exactly the baseline's ATT") {
    auto c = evo::evaluate_candidate({"ELSE argmax(pressure)", "seed", 0}, env, seeds);
    REQUIRE(c.valid);
    double att = 0;
    for (auto s : seeds)
      att += sim::run_episode(*env.net, *env.flows, baselines::max_pressure_controller(),
                              env.horizon, s, env.sim, env.ssa)
                 .metrics.att;
    att /= static_cast<double>(seeds.size());
    CHECK(c.fitness == doctest::Approx(att).epsilon(1e-12));
  }
  SUBCASE("invalid source is rejected with the diagnostic") {
    auto c = evo::evaluate_candidate({"IF pressure > THEN", "bad", 0}, env, seeds);
    CHECK(!c.valid);
    CHECK(!c.diagnostic.empty());
  }
  SUBCASE("evaluation is deterministic") {
    auto a = evo::evaluate_candidate({"ELSE argmax(queue)", "", 0}, env, seeds);
    auto b = evo::evaluate_candidate({"ELSE argmax(queue)", "", 0}, env, seeds);
    CHECK(a.fitness == b.fitness);
    CHECK(a.critique_text == b.critique_text);
  }
}

TEST_CASE("build_prompt") {
  auto env = make_env(surge_scenario());
  auto elite = evo::evaluate_candidate({"ELSE argmax(pressure)", "e0", 0}, env, {1});
  REQUIRE(elite.valid);
  std::string vocab = ssa::vocabulary_description(env.ssa);

  SUBCASE("contains the elite source verbatim and the pattern names") {
    auto p = evo::build_prompt({elite}, vocab, dsl::grammar_ebnf(), "task", {}, 1 << 20);
    auto text = p.to_text(10);
    CHECK(text.find("ELSE argmax(pressure)") != std::string::npos);
    CHECK(text.find(elite.critique_text.substr(0, 30)) != std::string::npos);
    CHECK(text.find("Starvation Risk: High") != std::string::npos);  // vocabulary section
  }
  SUBCASE("identical inputs render identical bytes") {
    auto a = evo::build_prompt({elite}, vocab, dsl::grammar_ebnf(), "task", {}, 1 << 20);
    auto b = evo::build_prompt({elite}, vocab, dsl::grammar_ebnf(), "task", {}, 1 << 20);
    CHECK(a.to_text(20) == b.to_text(20));
  }
  SUBCASE("oversized critiques truncate but sources survive") {
    auto fat = elite;
    fat.critique_text.assign(100000, 'x');
    auto p = evo::build_prompt({fat, elite}, vocab, dsl::grammar_ebnf(), "task", {}, 8000);
    auto text = p.to_text(10);
    CHECK(text.size() < 12000);
    CHECK(text.find("ELSE argmax(pressure)") != std::string::npos);
    CHECK(text.find("[critique truncated]") != std::string::npos);
  }
  SUBCASE("repair notes are listed") {
    auto p = evo::build_prompt({elite}, vocab, dsl::grammar_ebnf(), "task",
                               {"1:3: [syntax] expected 'THEN'"}, 1 << 20);
    CHECK(p.to_text(5).find("expected 'THEN'") != std::string::npos);
  }
}

TEST_CASE("evolve with the mock engine") {
  auto env = make_env(surge_scenario(), 1200);
  evo::EvolutionConfig cfg;
  cfg.population = 6;
  cfg.elites = 2;
  cfg.inner_iterations = 5;
  cfg.eval_seeds = {1};
  cfg.runs = 1;

  SUBCASE("elitism: best fitness never increases") {
    llm::MockEngine engine(99, 4);
    auto result = evo::evolve(env, engine, cfg);
    REQUIRE(result.per_generation.size() == 6);  // seed generation + 5
    for (size_t g = 1; g < result.per_generation.size(); ++g)
      CHECK(result.per_generation[g].best_fitness <=
            result.per_generation[g - 1].best_fitness);
    CHECK(result.status == evo::RunStatus::Completed);
  }
  SUBCASE("bit-identical reproduction under a fixed engine seed") {
    llm::MockEngine e1(123, 4), e2(123, 4);
    auto a = evo::evolve(env, e1, cfg);
    auto b = evo::evolve(env, e2, cfg);
    CHECK(evo::history_to_jsonl(a.history) == evo::history_to_jsonl(b.history));
    CHECK(a.best.fitness == b.best.fitness);
  }
  SUBCASE("parallel evaluation does not change the history") {
    llm::MockEngine e1(7, 4), e2(7, 4);
    auto serial_cfg = cfg;
    serial_cfg.max_parallel = 1;
    auto parallel_cfg = cfg;
    parallel_cfg.max_parallel = 4;
    auto a = evo::evolve(env, e1, serial_cfg);
    auto b = evo::evolve(env, e2, parallel_cfg);
    CHECK(evo::history_to_jsonl(a.history) == evo::history_to_jsonl(b.history));
  }
  SUBCASE("final best never loses to the seeded MaxPressure program") {
    llm::MockEngine engine(5, 4);
    auto result = evo::evolve(env, engine, cfg);
    auto baseline = evo::evaluate_candidate({"ELSE argmax(pressure)", "", 0}, env, cfg.eval_seeds);
    CHECK(result.best.fitness <= baseline.fitness + 1e-12);
  }
  SUBCASE("population accounting: per-generation evaluations stay within the population") {
    llm::MockEngine engine(31, 4);
    auto result = evo::evolve(env, engine, cfg);
    for (const auto& g : result.per_generation) CHECK(g.evaluated <= cfg.population);
  }
}

namespace {

// Engine doubles for the failure-path contracts.
struct EmptyEngine : evo::MutationEngine {
  evo::ProposeResult propose(const evo::PromptState&, int) override { return {}; }
  std::string refine_prompt(const evo::PromptState& p) override { return p.task; }
};

struct DeadEngine : evo::MutationEngine {
  evo::ProposeResult propose(const evo::PromptState&, int) override {
    evo::ProposeResult r;
    r.status = evo::ProposeStatus::Exhausted;
    return r;
  }
  std::string refine_prompt(const evo::PromptState& p) override { return p.task; }
};

struct GarbageEngine : evo::MutationEngine {
  evo::ProposeResult propose(const evo::PromptState&, int n) override {
    evo::ProposeResult r;
    for (int i = 0; i < n; ++i) r.sources.push_back({"NOT A POLICY", "", 0});
    return r;
  }
  std::string refine_prompt(const evo::PromptState& p) override { return p.task; }
};

}  // namespace

TEST_CASE("engine failure contracts") {
  auto env = make_env(surge_scenario(), 600);
  evo::EvolutionConfig cfg;
  cfg.population = 4;
  cfg.elites = 2;
  cfg.inner_iterations = 3;
  cfg.eval_seeds = {1};

  SUBCASE("zero proposals make elites-only generations; the loop continues") {
    EmptyEngine engine;
    auto result = evo::evolve(env, engine, cfg);
    CHECK(result.status == evo::RunStatus::Completed);
    CHECK(result.per_generation.size() == 4);
    CHECK(result.best.valid);
  }
  SUBCASE("exhausted engine terminates with partial history and explicit status") {
    DeadEngine engine;
    auto result = evo::evolve(env, engine, cfg);
    CHECK(result.status == evo::RunStatus::EngineExhausted);
    CHECK(result.best.valid);                   // best-so-far still returned
    CHECK(result.per_generation.size() == 1);   // only the seed generation completed
    CHECK(!result.history.empty());
  }
  SUBCASE("unparseable proposals are recorded with diagnostics and skipped") {
    GarbageEngine engine;
    auto result = evo::evolve(env, engine, cfg);
    CHECK(result.status == evo::RunStatus::Completed);
    int invalid = 0;
    for (const auto& c : result.history)
      if (!c.valid) {
        ++invalid;
        CHECK(!c.diagnostic.empty());
      }
    CHECK(invalid == 3 * 4);  // every proposal of every generation
    CHECK(result.best.valid);
  }
}

TEST_CASE("outer loop runs the prompt refinement hook") {
  auto env = make_env(surge_scenario(), 600);
  evo::EvolutionConfig cfg;
  cfg.population = 4;
  cfg.elites = 2;
  cfg.inner_iterations = 2;
  cfg.outer_iterations = 2;
  cfg.eval_seeds = {1};

  struct CountingEngine : llm::MockEngine {
    using llm::MockEngine::MockEngine;
    int refines = 0;
    std::string refine_prompt(const evo::PromptState& p) override {
      ++refines;
      return p.task + " (refined)";
    }
  } engine(3, 4);

  auto result = evo::evolve(env, engine, cfg);
  CHECK(engine.refines == 1);  // outer=2 refines once, after the first pass
  CHECK(result.per_generation.size() == 5);  // seeds + 2x2 inner generations
}
