#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tpet/caf.hpp"
#include "tpet/network.hpp"
#include "tpet/ssa.hpp"

namespace tpet::sim {

struct SimConfig {
  int decision_interval = 30;    // s; micro-tick is fixed at 1 s
  double saturation_flow = 1.0;  // vehicles/s discharged per green movement
};

enum class EventKind {
  VehicleEnter,
  VehicleExit,
  VehicleStop,
  VehicleGo,
  PhaseSwitch,
  PhaseSwitchDeferred
};

const char* event_kind_name(EventKind k);

struct SimEvent {
  EventKind kind{};
  int64_t t = 0;
  int64_t subject = 0;  // vehicle id, or intersection index for phase events
  std::string detail;
};

struct Vehicle {
  int id = -1;
  int flow = -1;      // index into SimState::routes
  int route_pos = 0;  // index of the current link within the route
  int64_t enter_time = -1;
  int64_t stationary = 0;  // accumulated s at rest
  enum class Loc { Outside, Traveling, Queued, Pending, Exited } loc = Loc::Outside;
  int64_t arrive_at = 0;  // when Traveling: tick the end of the link is reached
};

struct LaneState {
  std::vector<int> q;  // vehicle ids, front first
};

struct LinkState {
  std::vector<LaneState> lanes;
  std::vector<int> pending;  // arrived vehicles waiting for lane space
  int traveling = 0;
  int queued() const;
  int occupancy() const;
};

struct SignalState {
  int active_phase = 0;
  int64_t elapsed_green = 0;  // s on the active phase, excludes yellow
  int yellow_left = 0;        // s; all-red clearance in progress while > 0
  int pending_phase = -1;     // activates when yellow_left reaches 0
};

struct ScheduledArrival {
  double time = 0;
  int flow = -1;
};

struct SimState {
  int64_t clock = 0;
  std::vector<Vehicle> vehicles;
  std::vector<LinkState> links;
  std::vector<SignalState> signals;  // per intersection
  int64_t entered = 0;
  int64_t exited = 0;
  int64_t stationary_integral = 0;  // sum over ticks of stationary vehicle counts

  // Arrival machinery, frozen at init so stepping needs no flow spec.
  std::vector<std::vector<int>> routes;  // per flow entry
  std::vector<ScheduledArrival> schedule;
  size_t next_arrival = 0;
  std::vector<std::vector<int>> entry_wait;        // per link: ids waiting to enter
  std::map<int64_t, std::vector<int>> arrive_due;  // tick -> vehicle ids
  std::vector<std::vector<double>> discharge_carry;  // per intersection, per movement

  int64_t in_network() const;
};

struct MetricsReport {
  double att = 0;  // s, mean travel time of completed vehicles
  double aql = 0;  // vehicles, time-averaged stationary count
  double awt = 0;  // s, mean accumulated stationary time per vehicle
  int64_t completed = 0;
  int64_t remaining = 0;
};

SimState init_state(const RoadNetwork& net, const FlowSpec& flows, const SimConfig& cfg,
                    uint64_t seed);

// Advance one decision interval of 1 s micro-ticks. `actions` selects the
// phase per intersection; a change first runs the yellow clearance, a change
// requested before min-green elapses is deferred (with an event), an invalid
// phase index is a hard error. Events are appended to `events`.
void step(SimState& state, const RoadNetwork& net, const SimConfig& cfg,
          const std::vector<int>& actions, std::vector<SimEvent>& events);

// Signed phase pressure: sum over the phase's movements of upstream lane
// queue minus downstream mean per-lane queue (0 past a boundary).
double phase_pressure(const SimState& state, const RoadNetwork& net, int intersection,
                      int phase);

ssa::IntersectionObservation observe(const SimState& state, const RoadNetwork& net,
                                     const SimConfig& cfg, int intersection);

// Metrics recomputed purely from the event log.
// ATT: mean(exit - enter) over completed vehicles (0 when none completed).
// AQL: time average over micro-ticks of the stationary vehicle count.
// AWT: mean accumulated stationary time over all entered vehicles; open
// stationary spells are truncated at the horizon.
MetricsReport compute_metrics(const std::vector<SimEvent>& events, int64_t horizon);

using Controller = std::function<std::vector<int>(
    const SimState&, const RoadNetwork&, const std::vector<ssa::StructuredFacts>&)>;

struct EpisodeResult {
  std::vector<std::vector<caf::DecisionRecord>> decisions;  // [intersection][decision]
  std::vector<SimEvent> events;
  MetricsReport metrics;
  bool aborted = false;
  std::string error;
};

// Runs `horizon / decision_interval` decisions. The controller sees the raw
// state plus the per-intersection structured facts; facts and actions land in
// the decision log. Identical inputs give bit-identical outputs. A throwing
// controller aborts the episode, returning the partial log and the error.
EpisodeResult run_episode(const RoadNetwork& net, const FlowSpec& flows,
                          const Controller& controller, int64_t horizon, uint64_t seed,
                          const SimConfig& cfg = {}, const ssa::SSAConfig& ssa_cfg = {});

std::string events_to_jsonl(const std::vector<SimEvent>& events);
std::vector<SimEvent> events_from_jsonl(const std::string& text);
std::string metrics_to_json(const MetricsReport& m);

}  // namespace tpet::sim
