#include "tpet/evolution.hpp"

#include <algorithm>
#include <future>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tpet/baselines.hpp"
#include "tpet/util.hpp"

namespace tpet::evo {

using nlohmann::json;

void EvolutionConfig::validate() const {
  if (population < 1 || elites < 1 || inner_iterations < 1 || outer_iterations < 1 || runs < 1)
    throw std::invalid_argument("evolution: all counts must be >= 1");
  if (elites >= population)
    throw std::invalid_argument("evolution: elite count must be < population size");
  if (eval_seeds.empty()) throw std::invalid_argument("evolution: at least one eval seed");
}

int EvalEnv::phase_count() const {
  int n = -1;
  for (const auto& inter : net->intersections) {
    int p = static_cast<int>(inter.phases.size());
    n = n < 0 ? p : std::min(n, p);
  }
  return std::max(n, 1);
}

dsl::Signature EvalEnv::signature() const {
  dsl::Signature sig;
  sig.phase_count = phase_count();
  return sig;
}

const std::string& default_task_description() {
  static const std::string t =
      "Design a traffic signal control policy for an intersection with the phases described "
      "below. Each decision picks the phase to hold green for the next interval. Minimize the "
      "average travel time; long waits and starved phases raise it. Respond with improved "
      "policies in the given grammar, one per fenced code block.";
  return t;
}

const std::vector<std::string>& seed_sources() {
  // Generation 0: the MaxPressure-equivalent program plus simple static
  // heuristics (argmax(starvation) cycles phases the way a fixed-time plan
  // does once timers accumulate).
  static const std::vector<std::string> seeds = {
      "ELSE argmax(pressure)\n",
      "ELSE argmax(starvation)\n",
      "ELSE argmax(queue)\n",
      "IF congestion == Low THEN argmax(starvation)\nELSE argmax(pressure)\n",
  };
  return seeds;
}

Candidate evaluate_candidate(const dsl::PolicySource& source, const EvalEnv& env,
                             const std::vector<uint64_t>& seeds) {
  Candidate c;
  c.source = source;
  c.name = source.name;
  c.generation = source.generation;

  auto parsed = dsl::parse(source, env.signature());
  if (!parsed.ok()) {
    c.diagnostic = parsed.error.to_string();
    return c;
  }
  c.program = *parsed.program;

  caf::CAFConfig caf_cfg = env.caf;
  caf_cfg.interval_seconds = env.sim.decision_interval;

  sim::MetricsReport mean;
  bool first = true;
  for (uint64_t seed : seeds) {
    auto episode = sim::run_episode(*env.net, *env.flows,
                                    baselines::policy_controller(c.program), env.horizon, seed,
                                    env.sim, env.ssa);
    if (episode.aborted) {
      c.diagnostic = "simulation aborted: " + episode.error;
      return c;
    }
    mean.att += episode.metrics.att;
    mean.aql += episode.metrics.aql;
    mean.awt += episode.metrics.awt;
    mean.completed += episode.metrics.completed;
    mean.remaining += episode.metrics.remaining;
    if (first) {
      std::vector<caf::Critique> parts;
      for (const auto& log : episode.decisions) parts.push_back(caf::analyze(log, caf_cfg));
      c.critique = caf::merge(parts);
      first = false;
    }
  }
  const double n = static_cast<double>(seeds.size());
  mean.att /= n;
  mean.aql /= n;
  mean.awt /= n;
  mean.completed = static_cast<int64_t>(static_cast<double>(mean.completed) / n);
  mean.remaining = static_cast<int64_t>(static_cast<double>(mean.remaining) / n);
  c.metrics = mean;
  c.fitness = env.fitness.scalar(mean);
  c.critique_text = caf::render_critique(c.critique, c.metrics, caf_cfg);
  c.valid = true;
  return c;
}

std::vector<Candidate> select_elites(const std::vector<Candidate>& population, int k) {
  std::vector<Candidate> sorted;
  for (const auto& c : population)
    if (c.valid) sorted.push_back(c);
  std::stable_sort(sorted.begin(), sorted.end(), [](const Candidate& a, const Candidate& b) {
    if (a.fitness != b.fitness) return a.fitness < b.fitness;
    if (a.metrics.awt != b.metrics.awt) return a.metrics.awt < b.metrics.awt;
    return a.generation < b.generation;
  });
  if (static_cast<int>(sorted.size()) > k) sorted.resize(static_cast<size_t>(k));
  return sorted;
}

std::string PromptState::to_text(int want_candidates) const {
  std::ostringstream s;
  s << "== Task ==\n" << task << "\n\n";
  s << "== Policy grammar ==\n" << grammar << "\n";
  s << "== State vocabulary ==\n" << vocabulary << "\n";
  s << "== Current elites ==\n";
  for (size_t i = 0; i < elites.size(); ++i) {
    s << "--- Elite " << (i + 1) << " (fitness " << util::fmt_double(elites[i].fitness)
      << ") ---\n";
    s << "```\n" << elites[i].source;
    if (!elites[i].source.empty() && elites[i].source.back() != '\n') s << "\n";
    s << "```\n" << elites[i].critique;
    if (!elites[i].critique.empty() && elites[i].critique.back() != '\n') s << "\n";
  }
  if (!repair_notes.empty()) {
    s << "== Rejected candidates (fix these mistakes) ==\n";
    for (const auto& note : repair_notes) s << "  - " << note << "\n";
  }
  s << "== Instruction ==\n"
    << "Propose " << want_candidates
    << " improved policies. Address the critiques above. Output each policy in its own fenced "
       "code block (```) using only the grammar and vocabulary given.\n";
  return s.str();
}

PromptState build_prompt(const std::vector<Candidate>& elites, const std::string& vocabulary,
                         const std::string& grammar, const std::string& task,
                         const std::vector<std::string>& repair_notes, int max_bytes) {
  PromptState p;
  p.task = task.empty() ? default_task_description() : task;
  p.grammar = grammar;
  p.vocabulary = vocabulary;
  p.repair_notes = repair_notes;
  for (const auto& e : elites)
    p.elites.push_back({e.source.text, e.fitness, e.critique_text});

  // Size bound: critiques shrink first, sources are never dropped.
  size_t size = p.to_text(1).size();
  if (static_cast<int>(size) > max_bytes && !p.elites.empty()) {
    size_t critique_bytes = 0;
    for (const auto& e : p.elites) critique_bytes += e.critique.size();
    size_t base = size - critique_bytes;
    size_t budget = static_cast<size_t>(max_bytes) > base
                        ? (static_cast<size_t>(max_bytes) - base) / p.elites.size()
                        : 0;
    for (auto& e : p.elites)
      if (e.critique.size() > budget) {
        e.critique.resize(budget);
        e.critique += "\n[critique truncated]\n";
      }
  }
  return p;
}

namespace {

std::string candidate_name(int generation, int index) {
  std::ostringstream s;
  s << "g" << generation << "_c" << index;
  return s.str();
}

std::vector<Candidate> evaluate_batch(const std::vector<dsl::PolicySource>& sources,
                                      const EvalEnv& env, const std::vector<uint64_t>& seeds,
                                      int max_parallel) {
  std::vector<Candidate> out(sources.size());
  if (max_parallel <= 1 || sources.size() <= 1) {
    for (size_t i = 0; i < sources.size(); ++i) out[i] = evaluate_candidate(sources[i], env, seeds);
    return out;
  }
  // Episodes are independent; results land by index so scheduling order
  // cannot leak into the history.
  size_t next = 0;
  while (next < sources.size()) {
    size_t batch = std::min(static_cast<size_t>(max_parallel), sources.size() - next);
    std::vector<std::future<Candidate>> futs;
    for (size_t k = 0; k < batch; ++k)
      futs.push_back(std::async(std::launch::async, [&, idx = next + k] {
        return evaluate_candidate(sources[idx], env, seeds);
      }));
    for (size_t k = 0; k < batch; ++k) out[next + k] = futs[k].get();
    next += batch;
  }
  return out;
}

}  // namespace

EvolveResult evolve(const EvalEnv& env, MutationEngine& engine, const EvolutionConfig& cfg) {
  cfg.validate();
  EvolveResult result;
  std::string task = cfg.task_description.empty() ? default_task_description() : cfg.task_description;
  const std::string vocabulary = ssa::vocabulary_description(env.ssa);
  const std::string& grammar = dsl::grammar_ebnf();

  // Generation 0: seeded candidates.
  std::vector<dsl::PolicySource> initial;
  int idx = 0;
  for (const auto& text : seed_sources()) {
    dsl::PolicySource s{text, candidate_name(0, idx++), 0};
    initial.push_back(std::move(s));
  }
  std::vector<Candidate> evaluated =
      evaluate_batch(initial, env, cfg.eval_seeds, cfg.max_parallel);
  for (auto& c : evaluated) {
    c.parent = "seed";
    result.history.push_back(c);
  }
  std::vector<Candidate> elites = select_elites(evaluated, cfg.elites);
  if (elites.empty()) throw std::runtime_error("evolve: no seed candidate evaluated successfully");
  result.per_generation.push_back(
      {0, elites.front().fitness, static_cast<int>(evaluated.size()), 0});

  int invalid_budget = cfg.retry_budget;
  std::vector<std::string> repair_notes;
  int generation = 0;

  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    if (outer > 0) {
      PromptState p = build_prompt(elites, vocabulary, grammar, task, {}, cfg.max_prompt_bytes);
      task = engine.refine_prompt(p);
    }
    for (int inner = 0; inner < cfg.inner_iterations; ++inner) {
      ++generation;
      PromptState prompt =
          build_prompt(elites, vocabulary, grammar, task, repair_notes, cfg.max_prompt_bytes);
      repair_notes.clear();

      ProposeResult proposed = engine.propose(prompt, cfg.population);
      if (proposed.status == ProposeStatus::Exhausted && proposed.sources.empty()) {
        result.status = RunStatus::EngineExhausted;
        result.best = elites.front();
        return result;
      }

      std::vector<dsl::PolicySource> sources = std::move(proposed.sources);
      if (static_cast<int>(sources.size()) > cfg.population)
        sources.resize(static_cast<size_t>(cfg.population));
      for (size_t i = 0; i < sources.size(); ++i) {
        sources[i].name = candidate_name(generation, static_cast<int>(i));
        sources[i].generation = generation;
      }

      std::vector<Candidate> fresh = evaluate_batch(sources, env, cfg.eval_seeds, cfg.max_parallel);
      int invalid = 0;
      for (auto& c : fresh) {
        c.parent = elites.front().name;
        if (!c.valid) {
          ++invalid;
          if (invalid_budget > 0) {
            --invalid_budget;
            repair_notes.push_back(c.diagnostic);
          }
        }
        result.history.push_back(c);
      }

      // Elites survive unchanged (cached fitness); zero valid proposals make
      // an elites-only generation.
      std::vector<Candidate> pool = elites;
      for (auto& c : fresh)
        if (c.valid) pool.push_back(std::move(c));
      elites = select_elites(pool, cfg.elites);
      result.per_generation.push_back({generation, elites.front().fitness,
                                       static_cast<int>(fresh.size()), invalid});
    }
  }

  result.best = elites.front();
  return result;
}

std::string history_to_jsonl(const std::vector<Candidate>& history) {
  std::ostringstream s;
  for (const auto& c : history) {
    json j{{"name", c.name},
           {"generation", c.generation},
           {"parent", c.parent},
           {"valid", c.valid},
           {"source", c.source.text}};
    if (c.valid) {
      j["fitness"] = c.fitness;
      j["att"] = c.metrics.att;
      j["aql"] = c.metrics.aql;
      j["awt"] = c.metrics.awt;
      j["defects"] = c.critique.total();
    } else {
      j["diagnostic"] = c.diagnostic;
    }
    s << j.dump() << "\n";
  }
  return s.str();
}

}  // namespace tpet::evo
