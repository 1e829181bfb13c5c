#include "tpet/ssa.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "tpet/util.hpp"

namespace tpet::ssa {

const char* to_string(Congestion c) {
  switch (c) {
    case Congestion::Low: return "Low";
    case Congestion::Moderate: return "Moderate";
    case Congestion::High: return "High";
    case Congestion::Critical: return "Critical";
  }
  return "Low";
}

const char* to_string(Urgency u) { return u == Urgency::Critical ? "Critical" : "Normal"; }

const char* to_string(Imbalance i) {
  switch (i) {
    case Imbalance::NSDominant: return "NS_Dominant";
    case Imbalance::EWDominant: return "EW_Dominant";
    default: return "None";
  }
}

Congestion congestion_from_string(const std::string& s) {
  if (s == "Low") return Congestion::Low;
  if (s == "Moderate") return Congestion::Moderate;
  if (s == "High") return Congestion::High;
  if (s == "Critical") return Congestion::Critical;
  throw std::invalid_argument("unknown congestion level: " + s);
}

Urgency urgency_from_string(const std::string& s) {
  if (s == "Normal") return Urgency::Normal;
  if (s == "Critical") return Urgency::Critical;
  throw std::invalid_argument("unknown urgency level: " + s);
}

Imbalance imbalance_from_string(const std::string& s) {
  if (s == "None") return Imbalance::None;
  if (s == "NS_Dominant") return Imbalance::NSDominant;
  if (s == "EW_Dominant") return Imbalance::EWDominant;
  throw std::invalid_argument("unknown imbalance level: " + s);
}

void SSAConfig::validate() const {
  if (!(cut_low < cut_moderate && cut_moderate < cut_high && cut_high < cut_critical))
    throw std::invalid_argument("ssa: congestion cut points must be strictly increasing");
  if (imbalance_ratio <= 1.0) throw std::invalid_argument("ssa: imbalance_ratio must be > 1");
  for (double v : {theta_demand, tau_critical, urgency_wait, dominant_margin})
    if (v <= 0) throw std::invalid_argument("ssa: thresholds must be > 0");
}

TemporalRegisters make_registers(int phase_count) {
  TemporalRegisters r;
  r.starvation_timer.assign(static_cast<size_t>(phase_count), 0.0);
  return r;
}

std::pair<StructuredFacts, TemporalRegisters> abstract(const IntersectionObservation& view,
                                                       const TemporalRegisters& regs,
                                                       const SSAConfig& cfg) {
  const int n = static_cast<int>(view.phases.size());
  StructuredFacts f;
  f.pressure.resize(n);
  f.queue.resize(n);
  f.wait.resize(n);
  f.starvation.resize(n);
  f.starvation_risk.assign(n, false);

  // Stage 1: instantaneous aggregates plus persistence-timer advance.
  for (int p = 0; p < n; ++p) {
    double pressure = 0, queue = 0, wait = 0;
    for (int m : view.phases[p]) {
      const auto& mo = view.movements[m];
      pressure += mo.upstream_queue - mo.downstream_mean_queue;
      queue += mo.upstream_queue;
      wait = std::max(wait, static_cast<double>(mo.max_wait));
    }
    f.pressure[p] = pressure;
    f.queue[p] = queue;
    f.wait[p] = wait;
  }

  TemporalRegisters out = regs;
  if (static_cast<int>(out.starvation_timer.size()) != n)
    out.starvation_timer.assign(n, 0.0);
  for (int p = 0; p < n; ++p) {
    if (p == view.active_phase)
      out.starvation_timer[p] = 0.0;
    else
      out.starvation_timer[p] += view.interval_seconds;
  }
  for (int p = 0; p < n; ++p) f.starvation[p] = out.starvation_timer[p];

  // Stage 2: predicate generation.
  if (!cfg.passthrough) {
    double max_pressure = f.pressure.empty() ? 0.0 : *std::max_element(f.pressure.begin(), f.pressure.end());
    if (max_pressure >= cfg.cut_critical)
      f.congestion = Congestion::Critical;
    else if (max_pressure >= cfg.cut_high)
      f.congestion = Congestion::High;
    else if (max_pressure >= cfg.cut_moderate)
      f.congestion = Congestion::Moderate;
    else
      f.congestion = Congestion::Low;

    int best = 0;
    for (int p = 1; p < n; ++p)
      if (f.pressure[p] > f.pressure[best]) best = p;
    double second = -1e300;
    for (int p = 0; p < n; ++p)
      if (p != best) second = std::max(second, f.pressure[p]);
    if (n > 1 && f.pressure[best] - second >= cfg.dominant_margin) f.dominant_flow = best;
    if (n == 1) f.dominant_flow = 0;

    for (int p = 0; p < n; ++p)
      f.starvation_risk[p] =
          f.pressure[p] > cfg.theta_demand && out.starvation_timer[p] > cfg.tau_critical;

    double max_wait = f.wait.empty() ? 0.0 : *std::max_element(f.wait.begin(), f.wait.end());
    f.urgency = max_wait > cfg.urgency_wait ? Urgency::Critical : Urgency::Normal;

    double ns = 0, ew = 0;
    for (int p = 0; p < n; ++p) {
      if (view.phase_axis[p] == sim::PhaseAxis::NS) ns += f.pressure[p];
      if (view.phase_axis[p] == sim::PhaseAxis::EW) ew += f.pressure[p];
    }
    double nsc = std::max(ns, 0.0), ewc = std::max(ew, 0.0);
    if (nsc > 0 && nsc >= cfg.imbalance_ratio * ewc)
      f.imbalance = Imbalance::NSDominant;
    else if (ewc > 0 && ewc >= cfg.imbalance_ratio * nsc)
      f.imbalance = Imbalance::EWDominant;
    else
      f.imbalance = Imbalance::None;
  }

  out.previous = f;
  return {f, out};
}

std::string vocabulary_description(const SSAConfig& cfg) {
  using util::fmt_shortest;
  std::ostringstream s;
  s << "Structured state vocabulary (per intersection, per decision)\n"
    << "\n"
    << "Categorical predicates:\n"
    << "  Congestion: Low | Moderate | High | Critical\n"
    << "    from the maximum phase pressure: \"Congestion: Critical\" when >= "
    << fmt_shortest(cfg.cut_critical) << ", High when >= " << fmt_shortest(cfg.cut_high)
    << ", Moderate when >= " << fmt_shortest(cfg.cut_moderate)
    << ", otherwise Low (nominal floor " << fmt_shortest(cfg.cut_low) << ").\n"
    << "    DSL test: congestion == <level>\n"
    << "  Dominant Flow: Phase i\n"
    << "    present when phase i's pressure exceeds every other phase by at least "
    << fmt_shortest(cfg.dominant_margin) << " vehicles.\n"
    << "    DSL test: dominant_flow == <phase> or dominant_flow == None\n"
    << "  Starvation Risk: High (per phase)\n"
    << "    \"Starvation Risk: High\" on phase i when pressure > "
    << fmt_shortest(cfg.theta_demand) << " and starvation_timer > "
    << fmt_shortest(cfg.tau_critical) << " s.\n"
    << "    DSL test: starvation_risk[i]\n"
    << "  Queue Urgency: Normal | Critical\n"
    << "    \"Queue Urgency: Critical\" when the maximum accumulated wait exceeds "
    << fmt_shortest(cfg.urgency_wait) << " s.\n"
    << "    DSL test: urgency == Critical\n"
    << "  Imbalance: None | NS_Dominant | EW_Dominant\n"
    << "    an axis dominates when its aggregate pressure is >= "
    << fmt_shortest(cfg.imbalance_ratio) << "x the other axis.\n"
    << "    DSL test: imbalance == <level>\n"
    << "\n"
    << "Numeric features (phase-indexed; usable in comparisons and argmax/argmin):\n"
    << "  pressure[i]   signed phase pressure, vehicles\n"
    << "  queue[i]      queued vehicles upstream of the phase\n"
    << "  wait[i]       max accumulated wait upstream of the phase, seconds\n"
    << "  starvation[i] seconds since the phase last held green\n";
  if (cfg.passthrough)
    s << "\nPassthrough mode: categorical predicates pinned to Low/None/Normal; "
         "numeric features remain live.\n";
  return s.str();
}

}  // namespace tpet::ssa
