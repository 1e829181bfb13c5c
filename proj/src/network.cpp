#include "tpet/network.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tpet::sim {

using nlohmann::json;

int RoadNetwork::node_index(const std::string& name) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i] == name) return static_cast<int>(i);
  return -1;
}

bool RoadNetwork::is_boundary(int node) const {
  return std::find(boundary.begin(), boundary.end(), node) != boundary.end();
}

int RoadNetwork::intersection_at(int node) const {
  for (size_t i = 0; i < intersections.size(); ++i)
    if (intersections[i].node == node) return static_cast<int>(i);
  return -1;
}

std::vector<int> RoadNetwork::movements_between(int ix, int in_link, int out_link) const {
  std::vector<int> out;
  const auto& ms = intersections[ix].movements;
  for (size_t m = 0; m < ms.size(); ++m)
    if (ms[m].in_link == in_link && ms[m].out_link == out_link) out.push_back(static_cast<int>(m));
  return out;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw NetworkError(msg); }

json parse_json(const std::string& document, const char* what) {
  json doc = json::parse(document, nullptr, false);
  if (doc.is_discarded()) fail(std::string(what) + ": not valid JSON");
  return doc;
}

int require_int(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key) || !obj[key].is_number_integer())
    fail(ctx + ": missing or non-integer field '" + key + "'");
  return obj[key].get<int>();
}

std::string require_string(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key) || !obj[key].is_string())
    fail(ctx + ": missing or non-string field '" + key + "'");
  return obj[key].get<std::string>();
}

PhaseAxis axis_from_string(const std::string& s, const std::string& ctx) {
  if (s == "NS") return PhaseAxis::NS;
  if (s == "EW") return PhaseAxis::EW;
  if (s.empty() || s == "none") return PhaseAxis::Unspecified;
  fail(ctx + ": unknown axis '" + s + "' (expected NS, EW or none)");
}

const char* axis_to_string(PhaseAxis a) {
  switch (a) {
    case PhaseAxis::NS: return "NS";
    case PhaseAxis::EW: return "EW";
    default: return "none";
  }
}

// Reachability from any boundary-entry link to any boundary-exit link,
// stepping through declared movements.
void check_connected(const RoadNetwork& net) {
  std::vector<std::vector<int>> adj(net.links.size());
  for (const auto& inter : net.intersections)
    for (const auto& m : inter.movements) adj[m.in_link].push_back(m.out_link);

  std::deque<int> frontier;
  std::vector<bool> seen(net.links.size(), false);
  for (const auto& l : net.links)
    if (net.is_boundary(l.from)) {
      frontier.push_back(l.id);
      seen[l.id] = true;
    }
  if (frontier.empty()) fail("network: no link starts at a boundary node");
  bool exit_reached = false;
  while (!frontier.empty()) {
    int l = frontier.front();
    frontier.pop_front();
    if (net.is_boundary(net.links[l].to)) exit_reached = true;
    for (int n : adj[l])
      if (!seen[n]) {
        seen[n] = true;
        frontier.push_back(n);
      }
  }
  if (!exit_reached) fail("network: no boundary entry is connected to a boundary exit");
}

void validate(const RoadNetwork& net) {
  for (const auto& l : net.links) {
    std::string ctx = "links[" + std::to_string(l.id) + "]";
    if (l.lanes < 1) fail(ctx + ": field 'lanes' must be >= 1");
    if (l.travel_time < 1) fail(ctx + ": field 'travel_time' must be >= 1");
    if (l.capacity < 1) fail(ctx + ": field 'capacity' must be >= 1");
  }

  for (size_t i = 0; i < net.intersections.size(); ++i) {
    const auto& inter = net.intersections[i];
    std::string ctx = "intersections['" + inter.id + "']";
    if (inter.phases.empty()) fail(ctx + ": field 'phases' must list at least one phase");
    if (inter.min_green < 1) fail(ctx + ": field 'min_green' must be >= 1");
    if (inter.yellow < 0) fail(ctx + ": field 'yellow' must be >= 0");

    for (size_t m = 0; m < inter.movements.size(); ++m) {
      const auto& mv = inter.movements[m];
      std::string mctx = ctx + ".movements[" + std::to_string(m) + "]";
      if (mv.in_link < 0 || mv.in_link >= static_cast<int>(net.links.size()))
        fail(mctx + ": field 'in_link' references unknown link");
      if (mv.out_link < 0 || mv.out_link >= static_cast<int>(net.links.size()))
        fail(mctx + ": field 'out_link' references unknown link");
      if (net.links[mv.in_link].to != inter.node)
        fail(mctx + ": in_link does not end at this intersection");
      if (net.links[mv.out_link].from != inter.node)
        fail(mctx + ": out_link does not start at this intersection");
      if (mv.in_lane < 0 || mv.in_lane >= net.links[mv.in_link].lanes)
        fail(mctx + ": field 'in_lane' out of range for the incoming link");
    }

    std::set<std::pair<int, int>> conflict_set;
    for (auto [a, b] : net.conflicts[i]) {
      conflict_set.insert({std::min(a, b), std::max(a, b)});
      if (a < 0 || b < 0 || a >= static_cast<int>(inter.movements.size()) ||
          b >= static_cast<int>(inter.movements.size()))
        fail(ctx + ": conflict pair references unknown movement");
    }

    for (size_t p = 0; p < inter.phases.size(); ++p) {
      const auto& phase = inter.phases[p];
      std::string pctx = ctx + ".phases[" + std::to_string(p) + "]";
      if (phase.empty()) fail(pctx + ": phase must be a nonempty set of movement indices");
      for (int m : phase)
        if (m < 0 || m >= static_cast<int>(inter.movements.size()))
          fail(pctx + ": movement index " + std::to_string(m) + " out of range");
      for (size_t a = 0; a < phase.size(); ++a)
        for (size_t b = a + 1; b < phase.size(); ++b) {
          auto key = std::make_pair(std::min(phase[a], phase[b]), std::max(phase[a], phase[b]));
          if (conflict_set.count(key))
            fail(pctx + ": movements " + std::to_string(key.first) + " and " +
                 std::to_string(key.second) + " conflict per the declared conflict table");
        }
    }
  }

  check_connected(net);
}

}  // namespace

RoadNetwork load_network(const std::string& document) {
  json doc = parse_json(document, "network");
  for (const char* key : {"intersections", "links", "boundary", "conflicts"})
    if (!doc.contains(key)) fail(std::string("network: missing top-level key '") + key + "'");

  RoadNetwork net;
  std::map<std::string, int> node_ix;
  auto intern = [&](const std::string& name) {
    auto it = node_ix.find(name);
    if (it != node_ix.end()) return it->second;
    int ix = static_cast<int>(net.nodes.size());
    net.nodes.push_back(name);
    node_ix.emplace(name, ix);
    return ix;
  };

  std::set<std::string> intersection_names;
  for (const auto& j : doc["intersections"]) {
    std::string name = require_string(j, "id", "intersections[]");
    intersection_names.insert(name);
    intern(name);
  }
  std::set<std::string> boundary_names;
  for (const auto& j : doc["boundary"]) {
    if (!j.is_string()) fail("boundary: entries must be node names");
    boundary_names.insert(j.get<std::string>());
    net.boundary.push_back(intern(j.get<std::string>()));
  }

  for (const auto& j : doc["links"]) {
    Link l;
    l.id = static_cast<int>(net.links.size());
    std::string ctx = "links[" + std::to_string(l.id) + "]";
    std::string from = require_string(j, "from", ctx);
    std::string to = require_string(j, "to", ctx);
    for (const std::string& end : {from, to})
      if (!intersection_names.count(end) && !boundary_names.count(end))
        fail(ctx + ": endpoint '" + end + "' is neither an intersection nor a boundary node");
    l.from = intern(from);
    l.to = intern(to);
    l.lanes = require_int(j, "lanes", ctx);
    l.travel_time = require_int(j, "travel_time", ctx);
    l.capacity = require_int(j, "capacity", ctx);
    net.links.push_back(l);
  }

  for (const auto& j : doc["intersections"]) {
    Intersection inter;
    inter.id = require_string(j, "id", "intersections[]");
    inter.node = net.node_index(inter.id);
    std::string ctx = "intersections['" + inter.id + "']";
    if (!j.contains("movements") || !j["movements"].is_array())
      fail(ctx + ": missing array field 'movements'");
    for (const auto& mj : j["movements"]) {
      Movement m;
      m.in_link = require_int(mj, "in_link", ctx + ".movements[]");
      m.in_lane = mj.value("in_lane", 0);
      m.out_link = require_int(mj, "out_link", ctx + ".movements[]");
      inter.movements.push_back(m);
    }
    if (!j.contains("phases") || !j["phases"].is_array() || j["phases"].empty())
      fail(ctx + ": field 'phases' must be a nonempty array");
    for (const auto& pj : j["phases"]) {
      if (pj.is_array()) {
        inter.phases.push_back(pj.get<std::vector<int>>());
        inter.phase_axis.push_back(PhaseAxis::Unspecified);
      } else if (pj.is_object()) {
        if (!pj.contains("movements") || !pj["movements"].is_array())
          fail(ctx + ": phase object needs array field 'movements'");
        inter.phases.push_back(pj["movements"].get<std::vector<int>>());
        inter.phase_axis.push_back(axis_from_string(pj.value("axis", ""), ctx));
      } else {
        fail(ctx + ": phase entries must be arrays or objects");
      }
    }
    inter.min_green = j.value("min_green", 10);
    inter.yellow = j.value("yellow", 5);
    net.intersections.push_back(std::move(inter));
  }

  net.conflicts.assign(net.intersections.size(), {});
  for (const auto& cj : doc["conflicts"]) {
    std::string name = require_string(cj, "intersection", "conflicts[]");
    int node = net.node_index(name);
    int ix = node < 0 ? -1 : net.intersection_at(node);
    if (ix < 0) fail("conflicts[]: unknown intersection '" + name + "'");
    net.conflicts[ix].emplace_back(require_int(cj, "a", "conflicts[]"),
                                   require_int(cj, "b", "conflicts[]"));
  }

  validate(net);
  return net;
}

FlowSpec load_flows(const std::string& document, const RoadNetwork& net) {
  json doc = parse_json(document, "flows");
  if (!doc.is_array()) fail("flows: top level must be a JSON array");
  FlowSpec flows;
  int idx = 0;
  for (const auto& j : doc) {
    std::string ctx = "flows[" + std::to_string(idx++) + "]";
    FlowEntry e;
    if (!j.contains("route") || !j["route"].is_array() || j["route"].empty())
      fail(ctx + ": field 'route' must be a nonempty array of link ids");
    e.route = j["route"].get<std::vector<int>>();
    for (int l : e.route)
      if (l < 0 || l >= static_cast<int>(net.links.size()))
        fail(ctx + ": route references unknown link " + std::to_string(l));
    if (!net.is_boundary(net.links[e.route.front()].from))
      fail(ctx + ": route must start at a boundary entry link");
    if (!net.is_boundary(net.links[e.route.back()].to))
      fail(ctx + ": route must end at a boundary exit link");
    for (size_t k = 0; k + 1 < e.route.size(); ++k) {
      int a = e.route[k], b = e.route[k + 1];
      if (net.links[a].to != net.links[b].from)
        fail(ctx + ": route links " + std::to_string(a) + " -> " + std::to_string(b) +
             " are not endpoint-connected");
      int ix = net.intersection_at(net.links[a].to);
      if (ix < 0) fail(ctx + ": route passes through a non-intersection node");
      if (net.movements_between(ix, a, b).empty())
        fail(ctx + ": no movement allows " + std::to_string(a) + " -> " + std::to_string(b) +
             " at intersection '" + net.intersections[ix].id + "'");
    }
    if (j.contains("rate")) {
      e.rate = j["rate"].get<double>();
      if (*e.rate <= 0) fail(ctx + ": field 'rate' must be > 0");
    }
    if (j.contains("times")) e.times = j["times"].get<std::vector<double>>();
    if (!e.rate && e.times.empty())
      fail(ctx + ": entry needs either 'rate' or a 'times' schedule");
    e.start = j.value("start", 0.0);
    e.end = j.value("end", e.start);
    if (e.start > e.end) fail(ctx + ": 'start' must be <= 'end'");
    flows.push_back(std::move(e));
  }
  return flows;
}

std::string network_to_json(const RoadNetwork& net) {
  json doc;
  doc["intersections"] = json::array();
  for (const auto& inter : net.intersections) {
    json j;
    j["id"] = inter.id;
    j["movements"] = json::array();
    for (const auto& m : inter.movements)
      j["movements"].push_back({{"in_link", m.in_link}, {"in_lane", m.in_lane}, {"out_link", m.out_link}});
    j["phases"] = json::array();
    for (size_t p = 0; p < inter.phases.size(); ++p)
      j["phases"].push_back(
          {{"movements", inter.phases[p]}, {"axis", axis_to_string(inter.phase_axis[p])}});
    j["min_green"] = inter.min_green;
    j["yellow"] = inter.yellow;
    doc["intersections"].push_back(std::move(j));
  }
  doc["links"] = json::array();
  for (const auto& l : net.links)
    doc["links"].push_back({{"from", net.nodes[l.from]},
                            {"to", net.nodes[l.to]},
                            {"lanes", l.lanes},
                            {"travel_time", l.travel_time},
                            {"capacity", l.capacity}});
  doc["boundary"] = json::array();
  for (int b : net.boundary) doc["boundary"].push_back(net.nodes[b]);
  doc["conflicts"] = json::array();
  for (size_t i = 0; i < net.conflicts.size(); ++i)
    for (auto [a, b] : net.conflicts[i])
      doc["conflicts"].push_back(
          {{"intersection", net.intersections[i].id}, {"a", a}, {"b", b}});
  return doc.dump(2) + "\n";
}

std::string flows_to_json(const FlowSpec& flows) {
  json doc = json::array();
  for (const auto& e : flows) {
    json j;
    j["route"] = e.route;
    if (e.rate) j["rate"] = *e.rate;
    if (!e.times.empty()) j["times"] = e.times;
    j["start"] = e.start;
    j["end"] = e.end;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

}  // namespace tpet::sim
