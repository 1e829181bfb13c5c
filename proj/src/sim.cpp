#include "tpet/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tpet/util.hpp"

namespace tpet::sim {

using nlohmann::json;

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::VehicleEnter: return "vehicle-enter";
    case EventKind::VehicleExit: return "vehicle-exit";
    case EventKind::VehicleStop: return "vehicle-stop";
    case EventKind::VehicleGo: return "vehicle-go";
    case EventKind::PhaseSwitch: return "phase-switch";
    case EventKind::PhaseSwitchDeferred: return "phase-switch-deferred";
  }
  return "?";
}

int LinkState::queued() const {
  int n = static_cast<int>(pending.size());
  for (const auto& l : lanes) n += static_cast<int>(l.q.size());
  return n;
}

int LinkState::occupancy() const { return traveling + queued(); }

int64_t SimState::in_network() const {
  int64_t n = 0;
  for (const auto& v : vehicles)
    if (v.loc == Vehicle::Loc::Traveling || v.loc == Vehicle::Loc::Queued ||
        v.loc == Vehicle::Loc::Pending)
      ++n;
  return n;
}

SimState init_state(const RoadNetwork& net, const FlowSpec& flows, const SimConfig& cfg,
                    uint64_t seed) {
  (void)cfg;
  SimState st;
  st.links.resize(net.links.size());
  for (size_t l = 0; l < net.links.size(); ++l)
    st.links[l].lanes.resize(static_cast<size_t>(net.links[l].lanes));
  st.signals.resize(net.intersections.size());
  st.entry_wait.resize(net.links.size());
  st.discharge_carry.resize(net.intersections.size());
  for (size_t i = 0; i < net.intersections.size(); ++i)
    st.discharge_carry[i].assign(net.intersections[i].movements.size(), 0.0);

  st.routes.reserve(flows.size());
  for (const auto& f : flows) st.routes.push_back(f.route);

  // Arrival schedule, frozen up front: Poisson entries draw exponential gaps
  // from a per-entry stream, deterministic schedules are used verbatim.
  for (size_t f = 0; f < flows.size(); ++f) {
    const auto& e = flows[f];
    if (e.rate) {
      util::Rng rng(util::splitmix64(seed) ^ util::splitmix64(0xA1217EULL + f));
      double t = e.start;
      while (true) {
        t += rng.exponential(*e.rate);
        if (t > e.end) break;
        st.schedule.push_back({t, static_cast<int>(f)});
      }
    }
    for (double t : e.times)
      if (t >= e.start && t <= e.end) st.schedule.push_back({t, static_cast<int>(f)});
  }
  std::stable_sort(st.schedule.begin(), st.schedule.end(),
                   [](const ScheduledArrival& a, const ScheduledArrival& b) {
                     if (a.time != b.time) return a.time < b.time;
                     return a.flow < b.flow;
                   });
  return st;
}

namespace {

void activate_pending(SimState& st, const RoadNetwork& net, std::vector<SimEvent>& events) {
  for (size_t i = 0; i < st.signals.size(); ++i) {
    auto& sig = st.signals[i];
    if (sig.yellow_left == 0 && sig.pending_phase >= 0) {
      int from = sig.active_phase;
      sig.active_phase = sig.pending_phase;
      sig.pending_phase = -1;
      sig.elapsed_green = 0;
      std::fill(st.discharge_carry[i].begin(), st.discharge_carry[i].end(), 0.0);
      events.push_back({EventKind::PhaseSwitch, st.clock, static_cast<int64_t>(i),
                        net.intersections[i].id + ": phase " + std::to_string(from) + " -> " +
                            std::to_string(sig.active_phase)});
    }
  }
}

void schedule_traversal(SimState& st, const RoadNetwork& net, int vid, int link, int64_t now) {
  auto& v = st.vehicles[vid];
  v.loc = Vehicle::Loc::Traveling;
  v.arrive_at = now + net.links[link].travel_time;
  st.links[link].traveling += 1;
  st.arrive_due[v.arrive_at].push_back(vid);
}

// Pick the shortest eligible lane with room; ties to the lowest lane index.
int pick_lane(const SimState& st, const RoadNetwork& net, int link,
              const std::vector<int>& lanes) {
  int best = -1;
  size_t best_size = 0;
  for (int ln : lanes) {
    const auto& q = st.links[link].lanes[ln].q;
    if (static_cast<int>(q.size()) >= net.links[link].capacity) continue;
    if (best < 0 || q.size() < best_size) {
      best = ln;
      best_size = q.size();
    }
  }
  return best;
}

// Lanes of `link` whose movements serve the vehicle's next hop (or every
// lane when the vehicle exits past this link).
std::vector<int> lanes_for_next_hop(const SimState& st, const RoadNetwork& net,
                                    const Vehicle& v, int link) {
  const auto& route = st.routes[v.flow];
  if (v.route_pos + 1 >= static_cast<int>(route.size())) {
    std::vector<int> all(net.links[link].lanes);
    for (int i = 0; i < net.links[link].lanes; ++i) all[static_cast<size_t>(i)] = i;
    return all;
  }
  int ix = net.intersection_at(net.links[link].to);
  std::vector<int> lanes;
  for (int m : net.movements_between(ix, link, route[v.route_pos + 1])) {
    int ln = net.intersections[ix].movements[m].in_lane;
    if (std::find(lanes.begin(), lanes.end(), ln) == lanes.end()) lanes.push_back(ln);
  }
  std::sort(lanes.begin(), lanes.end());
  return lanes;
}

// Place an arrived vehicle into a lane queue, or park it in the pending
// buffer when every eligible lane is at capacity.
void join_queue(SimState& st, const RoadNetwork& net, int vid, int link,
                std::vector<SimEvent>& events, bool emit_stop) {
  auto& v = st.vehicles[vid];
  auto lanes = lanes_for_next_hop(st, net, v, link);
  int ln = pick_lane(st, net, link, lanes);
  if (ln >= 0) {
    st.links[link].lanes[ln].q.push_back(vid);
    v.loc = Vehicle::Loc::Queued;
    if (emit_stop)
      events.push_back({EventKind::VehicleStop, st.clock, vid,
                        "link " + std::to_string(link) + " lane " + std::to_string(ln)});
  } else {
    st.links[link].pending.push_back(vid);
    v.loc = Vehicle::Loc::Pending;
    if (emit_stop)
      events.push_back(
          {EventKind::VehicleStop, st.clock, vid, "link " + std::to_string(link) + " pending"});
  }
}

void micro_tick(SimState& st, const RoadNetwork& net, const SimConfig& cfg,
                std::vector<SimEvent>& events) {
  const int64_t t = st.clock;

  // 1. Phase activations whose clearance expired.
  activate_pending(st, net, events);

  // 2. Discharge green movements at the saturation flow, gated by downstream
  //    room. FIFO within a lane: a front vehicle bound elsewhere blocks the
  //    movements behind it.
  for (size_t i = 0; i < st.signals.size(); ++i) {
    auto& sig = st.signals[i];
    if (sig.yellow_left > 0) continue;  // all red while clearing
    const auto& inter = net.intersections[i];
    for (int m : inter.phases[static_cast<size_t>(sig.active_phase)]) {
      const auto& mv = inter.movements[static_cast<size_t>(m)];
      auto& carry = st.discharge_carry[i][static_cast<size_t>(m)];
      carry += cfg.saturation_flow;
      int budget = static_cast<int>(carry);
      carry -= budget;
      auto& lane = st.links[mv.in_link].lanes[static_cast<size_t>(mv.in_lane)];
      while (budget > 0 && !lane.q.empty()) {
        int vid = lane.q.front();
        auto& v = st.vehicles[vid];
        const auto& route = st.routes[v.flow];
        int next = route[static_cast<size_t>(v.route_pos) + 1];
        if (next != mv.out_link) break;  // front vehicle needs another movement
        const auto& nl = net.links[next];
        if (st.links[next].occupancy() >= nl.lanes * nl.capacity) break;  // spillback
        lane.q.erase(lane.q.begin());
        v.route_pos += 1;
        events.push_back({EventKind::VehicleGo, t, vid,
                          "link " + std::to_string(mv.in_link) + " -> " + std::to_string(next)});
        schedule_traversal(st, net, vid, next, t);
        budget -= 1;
      }
    }
  }

  // 3. Flow arrivals reaching their entry time queue up outside the network.
  while (st.next_arrival < st.schedule.size() &&
         st.schedule[st.next_arrival].time <= static_cast<double>(t)) {
    const auto& a = st.schedule[st.next_arrival];
    Vehicle v;
    v.id = static_cast<int>(st.vehicles.size());
    v.flow = a.flow;
    st.vehicles.push_back(v);
    st.entry_wait[static_cast<size_t>(st.routes[a.flow].front())].push_back(v.id);
    st.next_arrival += 1;
  }

  // 4. Admissions: entry queues drain into their first link while it has room.
  for (size_t l = 0; l < st.entry_wait.size(); ++l) {
    auto& waiting = st.entry_wait[l];
    const auto& lk = net.links[l];
    while (!waiting.empty() && st.links[l].occupancy() < lk.lanes * lk.capacity) {
      int vid = waiting.front();
      waiting.erase(waiting.begin());
      auto& v = st.vehicles[vid];
      v.enter_time = t;
      st.entered += 1;
      events.push_back({EventKind::VehicleEnter, t, vid, "link " + std::to_string(l)});
      schedule_traversal(st, net, vid, static_cast<int>(l), t);
    }
  }

  // 5. Pending buffers retry lane placement with the space freed this tick.
  for (size_t l = 0; l < st.links.size(); ++l) {
    auto& pending = st.links[l].pending;
    for (size_t k = 0; k < pending.size();) {
      int vid = pending[k];
      auto lanes = lanes_for_next_hop(st, net, st.vehicles[vid], static_cast<int>(l));
      int ln = pick_lane(st, net, static_cast<int>(l), lanes);
      if (ln >= 0) {
        st.links[l].lanes[static_cast<size_t>(ln)].q.push_back(vid);
        st.vehicles[vid].loc = Vehicle::Loc::Queued;
        pending.erase(pending.begin() + static_cast<long>(k));
      } else {
        ++k;
      }
    }
  }

  // 6. Stop-line arrivals: traversals finishing now either exit at a
  //    boundary or join a queue.
  if (auto due = st.arrive_due.find(t); due != st.arrive_due.end()) {
    for (int vid : due->second) {
      auto& v = st.vehicles[vid];
      int link = st.routes[v.flow][static_cast<size_t>(v.route_pos)];
      st.links[link].traveling -= 1;
      bool last = v.route_pos + 1 >= static_cast<int>(st.routes[v.flow].size());
      if (last && net.is_boundary(net.links[link].to)) {
        v.loc = Vehicle::Loc::Exited;
        st.exited += 1;
        events.push_back({EventKind::VehicleExit, t, vid, "link " + std::to_string(link)});
      } else {
        join_queue(st, net, vid, link, events, true);
      }
    }
    st.arrive_due.erase(due);
  }

  // 7. Stationary accounting.
  int64_t stationary = 0;
  for (auto& link : st.links) {
    for (auto& lane : link.lanes)
      for (int vid : lane.q) {
        st.vehicles[vid].stationary += 1;
        ++stationary;
      }
    for (int vid : link.pending) {
      st.vehicles[vid].stationary += 1;
      ++stationary;
    }
  }
  st.stationary_integral += stationary;

  // 8. Signal timers.
  for (auto& sig : st.signals) {
    if (sig.yellow_left > 0)
      sig.yellow_left -= 1;
    else
      sig.elapsed_green += 1;
  }

  st.clock += 1;
}

}  // namespace

void step(SimState& st, const RoadNetwork& net, const SimConfig& cfg,
          const std::vector<int>& actions, std::vector<SimEvent>& events) {
  if (actions.size() != st.signals.size())
    throw std::invalid_argument("step: one action per intersection required");

  for (size_t i = 0; i < st.signals.size(); ++i) {
    const auto& inter = net.intersections[i];
    int a = actions[i];
    if (a < 0 || a >= static_cast<int>(inter.phases.size()))
      throw std::out_of_range("step: invalid phase index " + std::to_string(a) +
                              " at intersection '" + inter.id + "'");
    auto& sig = st.signals[i];
    if (sig.yellow_left > 0 || sig.pending_phase >= 0) continue;  // clearing; command ignored
    if (a == sig.active_phase) continue;
    if (sig.elapsed_green < inter.min_green) {
      events.push_back({EventKind::PhaseSwitchDeferred, st.clock, static_cast<int64_t>(i),
                        inter.id + ": wanted phase " + std::to_string(a) + ", held " +
                            std::to_string(sig.elapsed_green) + "s < min green " +
                            std::to_string(inter.min_green) + "s"});
      continue;
    }
    sig.pending_phase = a;
    sig.yellow_left = inter.yellow;
  }

  for (int k = 0; k < cfg.decision_interval; ++k) micro_tick(st, net, cfg, events);
}

double phase_pressure(const SimState& st, const RoadNetwork& net, int intersection, int phase) {
  const auto& inter = net.intersections[static_cast<size_t>(intersection)];
  if (phase < 0 || phase >= static_cast<int>(inter.phases.size()))
    throw std::out_of_range("phase_pressure: invalid phase index " + std::to_string(phase));
  double p = 0;
  for (int m : inter.phases[static_cast<size_t>(phase)]) {
    const auto& mv = inter.movements[static_cast<size_t>(m)];
    double up = static_cast<double>(
        st.links[static_cast<size_t>(mv.in_link)].lanes[static_cast<size_t>(mv.in_lane)].q.size());
    double down = 0;
    const auto& out = net.links[static_cast<size_t>(mv.out_link)];
    if (!net.is_boundary(out.to)) {
      int queued = 0;
      for (const auto& lane : st.links[static_cast<size_t>(mv.out_link)].lanes)
        queued += static_cast<int>(lane.q.size());
      down = static_cast<double>(queued) / out.lanes;
    }
    p += up - down;
  }
  return p;
}

ssa::IntersectionObservation observe(const SimState& st, const RoadNetwork& net,
                                     const SimConfig& cfg, int intersection) {
  const auto& inter = net.intersections[static_cast<size_t>(intersection)];
  ssa::IntersectionObservation view;
  view.phases = inter.phases;
  view.phase_axis = inter.phase_axis;
  view.active_phase = st.signals[static_cast<size_t>(intersection)].active_phase;
  view.interval_seconds = cfg.decision_interval;
  view.movements.resize(inter.movements.size());
  for (size_t m = 0; m < inter.movements.size(); ++m) {
    const auto& mv = inter.movements[m];
    auto& obs = view.movements[m];
    const auto& lane = st.links[static_cast<size_t>(mv.in_link)].lanes[static_cast<size_t>(mv.in_lane)];
    obs.upstream_queue = static_cast<int>(lane.q.size());
    for (int vid : lane.q)
      obs.max_wait = std::max(obs.max_wait, static_cast<int>(st.vehicles[vid].stationary));
    const auto& out = net.links[static_cast<size_t>(mv.out_link)];
    if (!net.is_boundary(out.to)) {
      int queued = 0;
      for (const auto& l : st.links[static_cast<size_t>(mv.out_link)].lanes)
        queued += static_cast<int>(l.q.size());
      obs.downstream_mean_queue = static_cast<double>(queued) / out.lanes;
    }
  }
  return view;
}

MetricsReport compute_metrics(const std::vector<SimEvent>& events, int64_t horizon) {
  struct Tally {
    int64_t enter = -1, exit = -1, open = -1, wait = 0;
  };
  std::map<int64_t, Tally> v;
  int64_t integral = 0;
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::VehicleEnter: v[e.subject].enter = e.t; break;
      case EventKind::VehicleExit: v[e.subject].exit = e.t; break;
      case EventKind::VehicleStop: v[e.subject].open = e.t; break;
      case EventKind::VehicleGo: {
        auto& t = v[e.subject];
        if (t.open >= 0) {
          t.wait += e.t - t.open;
          integral += e.t - t.open;
          t.open = -1;
        }
        break;
      }
      default: break;
    }
  }
  MetricsReport r;
  double travel_sum = 0, wait_sum = 0;
  int64_t entered = 0;
  for (auto& [id, t] : v) {
    if (t.enter < 0) continue;  // phase events share the id space; skip non-vehicles
    ++entered;
    if (t.open >= 0) {  // still stationary at the horizon
      t.wait += horizon - t.open;
      integral += horizon - t.open;
    }
    wait_sum += static_cast<double>(t.wait);
    if (t.exit >= 0) {
      r.completed += 1;
      travel_sum += static_cast<double>(t.exit - t.enter);
    }
  }
  r.remaining = entered - r.completed;
  r.att = r.completed > 0 ? travel_sum / static_cast<double>(r.completed) : 0.0;
  r.awt = entered > 0 ? wait_sum / static_cast<double>(entered) : 0.0;
  r.aql = horizon > 0 ? static_cast<double>(integral) / static_cast<double>(horizon) : 0.0;
  return r;
}

EpisodeResult run_episode(const RoadNetwork& net, const FlowSpec& flows,
                          const Controller& controller, int64_t horizon, uint64_t seed,
                          const SimConfig& cfg, const ssa::SSAConfig& ssa_cfg) {
  if (cfg.decision_interval < 1 || horizon % cfg.decision_interval != 0)
    throw std::invalid_argument("run_episode: horizon must be a multiple of the decision interval");

  EpisodeResult out;
  SimState st = init_state(net, flows, cfg, seed);
  const size_t n = net.intersections.size();
  out.decisions.resize(n);
  std::vector<ssa::TemporalRegisters> regs(n);
  for (size_t i = 0; i < n; ++i)
    regs[i] = ssa::make_registers(static_cast<int>(net.intersections[i].phases.size()));

  const int decisions = static_cast<int>(horizon / cfg.decision_interval);
  for (int k = 0; k < decisions; ++k) {
    std::vector<ssa::StructuredFacts> facts(n);
    for (size_t i = 0; i < n; ++i) {
      auto [f, r] = ssa::abstract(observe(st, net, cfg, static_cast<int>(i)), regs[i], ssa_cfg);
      facts[i] = std::move(f);
      regs[i] = std::move(r);
    }

    std::vector<int> actions;
    try {
      actions = controller(st, net, facts);
    } catch (const std::exception& e) {
      out.aborted = true;
      out.error = e.what();
      break;
    }

    size_t ev_start = out.events.size();
    step(st, net, cfg, actions, out.events);

    for (size_t i = 0; i < n; ++i) {
      bool deferred = false;
      for (size_t e = ev_start; e < out.events.size(); ++e)
        if (out.events[e].kind == EventKind::PhaseSwitchDeferred &&
            out.events[e].subject == static_cast<int64_t>(i))
          deferred = true;
      out.decisions[i].push_back({k, facts[i], actions[i], deferred});
      regs[i].last_action = actions[i];
    }
  }

  out.metrics = compute_metrics(out.events, st.clock);
  return out;
}

std::string events_to_jsonl(const std::vector<SimEvent>& events) {
  std::ostringstream s;
  for (const auto& e : events) {
    json j{{"kind", event_kind_name(e.kind)}, {"t", e.t}, {"id", e.subject}, {"detail", e.detail}};
    s << j.dump() << "\n";
  }
  return s.str();
}

std::vector<SimEvent> events_from_jsonl(const std::string& text) {
  std::vector<SimEvent> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("event log: malformed JSON at line " + std::to_string(lineno));
    SimEvent e;
    std::string kind = j.at("kind").get<std::string>();
    bool found = false;
    for (EventKind k :
         {EventKind::VehicleEnter, EventKind::VehicleExit, EventKind::VehicleStop,
          EventKind::VehicleGo, EventKind::PhaseSwitch, EventKind::PhaseSwitchDeferred})
      if (kind == event_kind_name(k)) {
        e.kind = k;
        found = true;
      }
    if (!found)
      throw std::runtime_error("event log: unknown kind at line " + std::to_string(lineno));
    e.t = j.at("t").get<int64_t>();
    e.subject = j.at("id").get<int64_t>();
    e.detail = j.value("detail", "");
    out.push_back(std::move(e));
  }
  return out;
}

std::string metrics_to_json(const MetricsReport& m) {
  json j{{"att", m.att},
         {"aql", m.aql},
         {"awt", m.awt},
         {"completed", m.completed},
         {"remaining", m.remaining}};
  return j.dump(2) + "\n";
}

}  // namespace tpet::sim
