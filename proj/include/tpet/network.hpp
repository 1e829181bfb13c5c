#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tpet::sim {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PhaseAxis { Unspecified, NS, EW };

// One permitted traversal: incoming link + lane -> outgoing link.
struct Movement {
  int in_link = -1;
  int in_lane = 0;
  int out_link = -1;
};

struct Intersection {
  std::string id;
  int node = -1;  // index into RoadNetwork::nodes
  std::vector<Movement> movements;
  std::vector<std::vector<int>> phases;  // movement indices, mutually non-conflicting
  std::vector<PhaseAxis> phase_axis;     // parallel to phases
  int min_green = 10;                    // s
  int yellow = 5;                        // s
};

struct Link {
  int id = -1;
  int from = -1;  // node index
  int to = -1;
  int lanes = 1;
  int travel_time = 1;  // s, free-flow
  int capacity = 1;     // vehicles per lane
};

struct RoadNetwork {
  std::vector<std::string> nodes;  // intersection and boundary node names
  std::vector<Link> links;
  std::vector<Intersection> intersections;
  std::vector<int> boundary;  // node indices
  // Declared conflict pairs of movement indices, per intersection.
  std::vector<std::vector<std::pair<int, int>>> conflicts;

  int node_index(const std::string& name) const;
  bool is_boundary(int node) const;
  // Intersection index at a node, or -1.
  int intersection_at(int node) const;
  // Movements of intersection `ix` that go from `in_link` to `out_link`.
  std::vector<int> movements_between(int ix, int in_link, int out_link) const;
};

struct FlowEntry {
  std::vector<int> route;      // consecutive link ids, boundary to boundary
  std::optional<double> rate;  // Poisson, vehicles/s
  std::vector<double> times;   // deterministic entry schedule
  double start = 0.0;          // s
  double end = 0.0;            // s
};

using FlowSpec = std::vector<FlowEntry>;

// Parse + validate a network document (JSON text). Throws NetworkError naming
// the offending field on schema violations, in-phase conflicts, or a
// disconnected network.
RoadNetwork load_network(const std::string& document);
FlowSpec load_flows(const std::string& document, const RoadNetwork& net);

std::string network_to_json(const RoadNetwork& net);
std::string flows_to_json(const FlowSpec& flows);

}  // namespace tpet::sim
