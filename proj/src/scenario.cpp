#include "tpet/scenario.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

#include "tpet/util.hpp"

namespace tpet::scenario {

Kind kind_from_string(const std::string& s) {
  if (s == "symmetric") return Kind::Symmetric;
  if (s == "asymmetric") return Kind::Asymmetric;
  if (s == "surge") return Kind::Surge;
  throw std::invalid_argument("unknown scenario kind '" + s + "'");
}

namespace {

// Compass sides; an approach is named for the side the traffic comes from.
enum Side { N = 0, E = 1, S = 2, W = 3 };

struct Builder {
  sim::RoadNetwork net;
  std::map<std::pair<int, int>, int> link_ix;  // (from node, to node) -> link id

  int node(const std::string& name) {
    int ix = net.node_index(name);
    if (ix >= 0) return ix;
    net.nodes.push_back(name);
    return static_cast<int>(net.nodes.size()) - 1;
  }

  int link(int from, int to, int lanes, int travel, int capacity) {
    auto key = std::make_pair(from, to);
    auto it = link_ix.find(key);
    if (it != link_ix.end()) return it->second;
    sim::Link l;
    l.id = static_cast<int>(net.links.size());
    l.from = from;
    l.to = to;
    l.lanes = lanes;
    l.travel_time = travel;
    l.capacity = capacity;
    net.links.push_back(l);
    link_ix.emplace(key, l.id);
    return l.id;
  }
};

std::string inode(int r, int c) { return "I" + std::to_string(r) + "_" + std::to_string(c); }

}  // namespace

Scenario generate(Kind kind, const GridSpec& grid, uint64_t seed, const ScenarioParams& params) {
  if (grid.rows < 1 || grid.rows > 4 || grid.cols < 1 || grid.cols > 4)
    throw std::invalid_argument("grid size must be between 1x1 and 4x4");

  const int lanes = 3, travel = 15, capacity = 20;
  Builder b;

  // Intersections and the boundary ring.
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) b.node(inode(r, c));
  for (int c = 0; c < grid.cols; ++c) {
    b.net.boundary.push_back(b.node("B_N" + std::to_string(c)));
    b.net.boundary.push_back(b.node("B_S" + std::to_string(c)));
  }
  for (int r = 0; r < grid.rows; ++r) {
    b.net.boundary.push_back(b.node("B_W" + std::to_string(r)));
    b.net.boundary.push_back(b.node("B_E" + std::to_string(r)));
  }

  // neighbor[side] of an intersection: the adjacent intersection or the
  // boundary node off that side.
  auto neighbor = [&](int r, int c, Side s) -> int {
    switch (s) {
      case N: return r > 0 ? b.node(inode(r - 1, c)) : b.node("B_N" + std::to_string(c));
      case S:
        return r < grid.rows - 1 ? b.node(inode(r + 1, c)) : b.node("B_S" + std::to_string(c));
      case W: return c > 0 ? b.node(inode(r, c - 1)) : b.node("B_W" + std::to_string(r));
      case E:
        return c < grid.cols - 1 ? b.node(inode(r, c + 1)) : b.node("B_E" + std::to_string(r));
    }
    return -1;
  };

  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      int me = b.node(inode(r, c));
      for (Side s : {N, E, S, W}) {
        int other = neighbor(r, c, s);
        b.link(other, me, lanes, travel, capacity);
        b.link(me, other, lanes, travel, capacity);
      }
    }

  // Movements: per approach side, through / left / right with dedicated
  // lanes (right 0, through 1, left 2). Right-hand traffic.
  auto out_side = [](Side from, int turn) -> Side {  // turn: 0 through, 1 left, 2 right
    static const Side through[4] = {S, W, N, E};
    static const Side left[4] = {E, S, W, N};
    static const Side right[4] = {W, N, E, S};
    switch (turn) {
      case 0: return through[from];
      case 1: return left[from];
      default: return right[from];
    }
  };

  b.net.conflicts.clear();
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      sim::Intersection inter;
      inter.id = inode(r, c);
      inter.node = b.node(inter.id);
      inter.min_green = 10;
      inter.yellow = 5;
      std::vector<int> phase_of;  // phase owning each movement
      for (Side from : {N, E, S, W}) {
        int in = b.link_ix.at({neighbor(r, c, from), inter.node});
        for (int turn : {0, 1, 2}) {
          sim::Movement m;
          m.in_link = in;
          m.in_lane = turn == 0 ? 1 : (turn == 1 ? 2 : 0);
          m.out_link = b.link_ix.at({inter.node, neighbor(r, c, out_side(from, turn))});
          inter.movements.push_back(m);
          bool ns_axis = from == N || from == S;
          int phase = turn == 1 ? (ns_axis ? 2 : 3) : (ns_axis ? 0 : 1);
          phase_of.push_back(phase);
        }
      }
      inter.phases = {{}, {}, {}, {}};
      inter.phase_axis = {sim::PhaseAxis::NS, sim::PhaseAxis::EW, sim::PhaseAxis::NS,
                          sim::PhaseAxis::EW};
      for (size_t m = 0; m < phase_of.size(); ++m)
        inter.phases[static_cast<size_t>(phase_of[m])].push_back(static_cast<int>(m));

      std::vector<std::pair<int, int>> conflicts;
      for (size_t a = 0; a < phase_of.size(); ++a)
        for (size_t bb = a + 1; bb < phase_of.size(); ++bb)
          if (phase_of[a] != phase_of[bb])
            conflicts.emplace_back(static_cast<int>(a), static_cast<int>(bb));

      b.net.intersections.push_back(std::move(inter));
      b.net.conflicts.push_back(std::move(conflicts));
    }

  // Demand. Through routes span whole rows/columns; turning routes enter at
  // the grid edge, turn at the first intersection, and run straight out.
  util::Rng jitter(util::splitmix64(seed) ^ 0x5CE7A210ULL);
  sim::FlowSpec flows;
  auto add_flow = [&](const std::vector<int>& route, double rate, double start, double end) {
    if (rate <= 0) return;
    sim::FlowEntry e;
    e.route = route;
    e.rate = rate * jitter.uniform(0.95, 1.05);
    e.start = start;
    e.end = end;
    flows.push_back(std::move(e));
  };

  auto column_route = [&](int c, bool southbound) {
    std::vector<int> route;
    if (southbound) {
      int prev = b.node("B_N" + std::to_string(c));
      for (int r = 0; r < grid.rows; ++r) {
        route.push_back(b.link_ix.at({prev, b.node(inode(r, c))}));
        prev = b.node(inode(r, c));
      }
      route.push_back(b.link_ix.at({prev, b.node("B_S" + std::to_string(c))}));
    } else {
      int prev = b.node("B_S" + std::to_string(c));
      for (int r = grid.rows - 1; r >= 0; --r) {
        route.push_back(b.link_ix.at({prev, b.node(inode(r, c))}));
        prev = b.node(inode(r, c));
      }
      route.push_back(b.link_ix.at({prev, b.node("B_N" + std::to_string(c))}));
    }
    return route;
  };
  auto row_route = [&](int r, bool eastbound) {
    std::vector<int> route;
    if (eastbound) {
      int prev = b.node("B_W" + std::to_string(r));
      for (int c = 0; c < grid.cols; ++c) {
        route.push_back(b.link_ix.at({prev, b.node(inode(r, c))}));
        prev = b.node(inode(r, c));
      }
      route.push_back(b.link_ix.at({prev, b.node("B_E" + std::to_string(r))}));
    } else {
      int prev = b.node("B_E" + std::to_string(r));
      for (int c = grid.cols - 1; c >= 0; --c) {
        route.push_back(b.link_ix.at({prev, b.node(inode(r, c))}));
        prev = b.node(inode(r, c));
      }
      route.push_back(b.link_ix.at({prev, b.node("B_W" + std::to_string(r))}));
    }
    return route;
  };
  // Turn at the first intersection behind the entry, then run straight to
  // the boundary.
  auto turn_route = [&](Side from, int turn) {
    int r = (from == N || from == W) ? 0 : grid.rows - 1;
    int c = (from == N || from == W) ? 0 : grid.cols - 1;
    std::vector<int> route;
    route.push_back(b.link_ix.at({neighbor(r, c, from), b.node(inode(r, c))}));
    Side heading = out_side(from, turn);
    while (true) {
      int here = b.node(inode(r, c));
      int next = neighbor(r, c, heading);
      route.push_back(b.link_ix.at({here, next}));
      if (b.net.is_boundary(next)) break;
      switch (heading) {
        case N: --r; break;
        case S: ++r; break;
        case E: ++c; break;
        case W: --c; break;
      }
    }
    return route;
  };

  const double horizon = static_cast<double>(params.horizon);
  double ns_through = 0.08, ew_through = 0.08, ns_turn = 0.015, ew_turn = 0.015;
  if (kind == Kind::Asymmetric) {
    ew_through = 0.14;
    ns_through = 0.045;
    ns_turn = 0.010;
  } else if (kind == Kind::Surge) {
    // Heavy enough that the doubled window saturates the EW through lanes and
    // MaxPressure visibly starves the side phases.
    ns_through = 0.08;
    ew_through = 0.22;
    ns_turn = 0.012;
    ew_turn = 0.012;
  }

  for (int c = 0; c < grid.cols; ++c) {
    add_flow(column_route(c, true), ns_through, 0, horizon);
    add_flow(column_route(c, false), ns_through, 0, horizon);
  }
  for (int r = 0; r < grid.rows; ++r) {
    add_flow(row_route(r, true), ew_through, 0, horizon);
    add_flow(row_route(r, false), ew_through, 0, horizon);
  }
  for (Side from : {N, E, S, W}) {
    double rate = (from == N || from == S) ? ns_turn : ew_turn;
    add_flow(turn_route(from, 1), rate, 0, horizon);  // left
    add_flow(turn_route(from, 2), rate, 0, horizon);  // right
  }
  if (kind == Kind::Surge) {
    double extra = ew_through * (params.surge_factor - 1.0);
    for (int r = 0; r < grid.rows; ++r) {
      add_flow(row_route(r, true), extra, params.surge_start, params.surge_end);
      add_flow(row_route(r, false), extra, params.surge_start, params.surge_end);
    }
  }

  Scenario out;
  out.network_json = sim::network_to_json(b.net);
  out.flows_json = sim::flows_to_json(flows);
  // Round-trip through the loaders so generated scenarios are validated and
  // callers get exactly what the files would give them.
  out.network = sim::load_network(out.network_json);
  out.flows = sim::load_flows(out.flows_json, out.network);
  return out;
}

}  // namespace tpet::scenario
