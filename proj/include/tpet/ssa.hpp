#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tpet/network.hpp"

namespace tpet::ssa {

enum class Congestion { Low, Moderate, High, Critical };
enum class Urgency { Normal, Critical };
enum class Imbalance { None, NSDominant, EWDominant };

const char* to_string(Congestion c);
const char* to_string(Urgency u);
const char* to_string(Imbalance i);
Congestion congestion_from_string(const std::string& s);
Urgency urgency_from_string(const std::string& s);
Imbalance imbalance_from_string(const std::string& s);

struct SSAConfig {
  double theta_demand = 5.0;   // vehicles; demand gate of the starvation rule
  double tau_critical = 120.0; // s; timer gate of the starvation rule
  // Congestion cut points on max phase pressure (strictly increasing).
  // Critical from cut_critical up, High from cut_high, Moderate from
  // cut_moderate; everything below is Low (cut_low marks the nominal floor).
  double cut_low = 5.0;
  double cut_moderate = 15.0;
  double cut_high = 25.0;
  double cut_critical = 40.0;
  double urgency_wait = 90.0;     // s; Queue Urgency trigger on max wait
  double imbalance_ratio = 1.5;   // > 1
  double dominant_margin = 2.0;   // vehicles; strict argmax margin
  // Ablation switch: categorical slots pinned to neutral values, numeric
  // features still emitted.
  bool passthrough = false;

  void validate() const;  // throws std::invalid_argument
};

struct StructuredFacts {
  Congestion congestion = Congestion::Low;
  std::optional<int> dominant_flow;
  std::vector<bool> starvation_risk;  // per phase
  Urgency urgency = Urgency::Normal;
  Imbalance imbalance = Imbalance::None;
  // Numeric companions, phase-indexed; the policy DSL reads these.
  std::vector<double> pressure;
  std::vector<double> queue;
  std::vector<double> wait;        // s, max accumulated wait upstream of the phase
  std::vector<double> starvation;  // s, timer snapshot after the update
};

struct TemporalRegisters {
  std::vector<double> starvation_timer;  // s since last activation, per phase
  std::optional<int> last_action;
  std::optional<StructuredFacts> previous;
};

TemporalRegisters make_registers(int phase_count);

// What the simulator exposes about one intersection at a decision point.
struct MovementObservation {
  int upstream_queue = 0;
  double downstream_mean_queue = 0.0;  // 0 when the movement exits at a boundary
  int max_wait = 0;                    // s, over vehicles queued in the upstream lane
};

struct IntersectionObservation {
  std::vector<MovementObservation> movements;
  std::vector<std::vector<int>> phases;  // movement indices per phase
  std::vector<sim::PhaseAxis> phase_axis;
  int active_phase = 0;
  int interval_seconds = 30;  // time covered since the previous decision
};

// f_SSA: deterministic map from (numeric view, registers) to structured facts
// plus the advanced registers. Stage 1 aggregates metrics and advances the
// persistence timers; stage 2 applies the predicate rules.
std::pair<StructuredFacts, TemporalRegisters> abstract(const IntersectionObservation& view,
                                                       const TemporalRegisters& regs,
                                                       const SSAConfig& cfg);

// Human-readable listing of every predicate, its trigger with the configured
// thresholds, and every numeric feature the policy DSL may reference.
// Byte-stable for a fixed config; embedded verbatim in mutation prompts.
std::string vocabulary_description(const SSAConfig& cfg);

}  // namespace tpet::ssa
