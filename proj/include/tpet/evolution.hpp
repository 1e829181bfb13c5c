#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpet/caf.hpp"
#include "tpet/dsl.hpp"
#include "tpet/sim.hpp"

namespace tpet::evo {

struct FitnessWeights {
  double att = 1.0;
  double aql = 0.0;
  double awt = 0.0;

  double scalar(const sim::MetricsReport& m) const {
    return att * m.att + aql * m.aql + awt * m.awt;
  }
};

struct EvolutionConfig {
  int population = 20;
  int elites = 3;
  int inner_iterations = 20;   // MoA generations
  int outer_iterations = 1;    // MoP refinements; 1 leaves the task text fixed
  int runs = 3;
  FitnessWeights fitness;
  std::vector<uint64_t> eval_seeds = {1};
  int retry_budget = 60;  // total invalid candidates tolerated before their
                          // diagnostics stop being fed back
  int max_parallel = 1;
  int max_prompt_bytes = 32768;
  std::string task_description;  // empty selects the built-in text

  void validate() const;  // throws std::invalid_argument
};

struct Candidate {
  std::string name;
  dsl::PolicySource source;
  dsl::PolicyProgram program;
  sim::MetricsReport metrics;  // means over the evaluation seeds
  double fitness = 0;
  caf::Critique critique;
  std::string critique_text;
  std::string parent;
  int generation = 0;
  bool valid = false;
  std::string diagnostic;  // parse / simulation failure, for invalid candidates
};

struct PromptState {
  std::string task;
  std::string grammar;
  std::string vocabulary;
  struct Elite {
    std::string source;
    double fitness = 0;
    std::string critique;
  };
  std::vector<Elite> elites;
  std::vector<std::string> repair_notes;

  // Deterministic rendering; sections ordered task, grammar, vocabulary,
  // elites, instruction.
  std::string to_text(int want_candidates) const;
};

enum class ProposeStatus { Ok, Exhausted };

struct ProposeResult {
  std::vector<dsl::PolicySource> sources;
  int dropped = 0;  // responses without an extractable policy
  ProposeStatus status = ProposeStatus::Ok;
};

// The pluggable mutation engine: remote model or deterministic mock.
class MutationEngine {
 public:
  virtual ~MutationEngine() = default;
  virtual ProposeResult propose(const PromptState& prompt, int n) = 0;
  virtual std::string refine_prompt(const PromptState& prompt) = 0;
};

// Everything a candidate evaluation needs.
struct EvalEnv {
  const sim::RoadNetwork* net = nullptr;
  const sim::FlowSpec* flows = nullptr;
  int64_t horizon = 3600;
  sim::SimConfig sim;
  ssa::SSAConfig ssa;
  caf::CAFConfig caf;
  FitnessWeights fitness;

  int phase_count() const;  // min over intersections; the DSL signature
  dsl::Signature signature() const;
};

// Parse, simulate one episode per seed, analyze the first seed's log.
// Scalar fitness is the weighted seed-mean (ATT by default). Parse failures
// return an invalid candidate carrying the diagnostic.
Candidate evaluate_candidate(const dsl::PolicySource& source, const EvalEnv& env,
                             const std::vector<uint64_t>& seeds);

// k lowest-fitness candidates; ties by lower AWT, then earlier generation.
// k larger than the population returns everything.
std::vector<Candidate> select_elites(const std::vector<Candidate>& population, int k);

PromptState build_prompt(const std::vector<Candidate>& elites, const std::string& vocabulary,
                         const std::string& grammar, const std::string& task,
                         const std::vector<std::string>& repair_notes, int max_bytes);

struct GenerationStat {
  int generation = 0;
  double best_fitness = 0;
  int evaluated = 0;
  int invalid = 0;
};

enum class RunStatus { Completed, EngineExhausted };

struct EvolveResult {
  Candidate best;
  std::vector<Candidate> history;  // every candidate ever evaluated or rejected
  std::vector<GenerationStat> per_generation;
  RunStatus status = RunStatus::Completed;
};

// Algorithm: the outer loop refines the task description through the engine,
// the inner loop proposes, evaluates and selects with elitism. Generation 0
// is seeded with the MaxPressure-equivalent program and simple static
// heuristics, so best fitness starts bounded and never increases.
EvolveResult evolve(const EvalEnv& env, MutationEngine& engine, const EvolutionConfig& cfg);

const std::string& default_task_description();
const std::vector<std::string>& seed_sources();

std::string history_to_jsonl(const std::vector<Candidate>& history);

}  // namespace tpet::evo
