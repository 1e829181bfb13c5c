#pragma once

#include <string>
#include <vector>

#include "tpet/ssa.hpp"

namespace tpet::sim {
struct MetricsReport;
}

namespace tpet::caf {

// One entry of the simulation log L: facts seen at decision t, action taken.
struct DecisionRecord {
  int t = 0;  // decision index, contiguous from 0
  ssa::StructuredFacts facts;
  int action = 0;
  bool deferred = false;  // the switch was denied by min-green this decision
};

struct CAFConfig {
  double tau_crit = 120.0;       // s; starvation window
  double epsilon_demand = 1.0;   // vehicles; near-zero demand bound
  double high_demand = 8.0;      // vehicles; high-demand bound (pressure)
  double residual_demand = 5.0;  // vehicles; premature-switch residual bound
  int interval_seconds = 30;     // s between decisions, for window arithmetic
  int top_k = 5;                 // exemplars per pattern in rendered text
  // Ablation switch: analysis disabled, critiques carry only the fitness.
  bool enabled = true;

  void validate() const;  // throws std::invalid_argument
};

enum class DefectPattern { WastedGreenTime, PhaseStarvation, PrematurePhaseSwitch };

const char* pattern_name(DefectPattern p);

struct Defect {
  DefectPattern pattern{};
  int t_begin = 0;  // decision index interval; equal endpoints for point defects
  int t_end = 0;
  int phase = 0;
  // Evidence; which fields are meaningful depends on the pattern.
  double demand = 0.0;         // wasted green: demand of the selected phase
  double pressure_prev = 0.0;  // premature switch: pressure before the switch
  double pressure_end = 0.0;   // starvation / premature: pressure at the match
  int duration_s = 0;          // starvation: unserved stretch in seconds
};

struct Critique {
  std::vector<Defect> wasted;
  std::vector<Defect> starved;
  std::vector<Defect> premature;
  int worst_starvation_s = 0;
  int total_wasted_green_s = 0;

  int total() const {
    return static_cast<int>(wasted.size() + starved.size() + premature.size());
  }
};

// The formal rules share two derived quantities; both analyze() and any
// independent re-checker must use the same definitions:
//   demand(t, p)  = facts.queue[p] + facts.pressure[p]
//   active(t)     = lowest phase index minimizing facts.starvation[p]
double record_demand(const DecisionRecord& r, int phase);
int record_active_phase(const DecisionRecord& r);

// Heuristic-driven back-tracing over one intersection's decision log.
Critique analyze(const std::vector<DecisionRecord>& log, const CAFConfig& cfg);

Critique merge(const std::vector<Critique>& parts);

// Deterministic text block: fitness summary, per-pattern counts, top-k
// exemplar traces, and one-line improvement directives.
std::string render_critique(const Critique& critique, const sim::MetricsReport& fitness,
                            const CAFConfig& cfg = {});

// Decision-log persistence: JSON-lines, one record per line with its
// intersection index. Loader throws std::runtime_error naming the bad line.
std::string decisions_to_jsonl(const std::vector<std::vector<DecisionRecord>>& logs);
std::vector<std::vector<DecisionRecord>> decisions_from_jsonl(const std::string& text);

std::string critique_to_json(const Critique& critique);

}  // namespace tpet::caf
