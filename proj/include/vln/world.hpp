#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vln/token_seq.hpp"

namespace vln {

using NodeId = std::uint32_t;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

double distance(Vec2 a, Vec2 b);

// Undirected viewpoint graph. Node ids are dense indices 0..n-1; `adjacency`
// is derived from `edges` and kept sorted by neighbor id.
struct NavGraph {
  std::string id;
  std::uint64_t env_seed = 0;
  std::size_t feature_dim = 32;
  std::vector<Vec2> positions;
  std::vector<std::pair<NodeId, NodeId>> edges;  // (a, b) with a < b
  std::vector<std::vector<std::uint32_t>> landmarks;
  std::vector<std::vector<NodeId>> adjacency;

  std::size_t num_nodes() const { return positions.size(); }
  bool has_node(NodeId n) const { return n < positions.size(); }
  double edge_length(NodeId a, NodeId b) const { return distance(positions[a], positions[b]); }

  // Rebuilds adjacency from edges and checks: no self-loops or duplicate
  // edges, connectivity, degree <= max_degree. Throws GenerationError.
  void finalize(std::size_t max_degree = 6);
  bool connected() const;
};

struct Candidate {
  NodeId neighbor = 0;
  std::vector<double> feature;
};

// Panoramic observation: one candidate per neighbor (sorted by id) plus the
// stop action, which always has index candidates.size().
struct Observation {
  NodeId node = 0;
  std::vector<Candidate> candidates;
  std::vector<double> stop_feature;

  std::size_t num_actions() const { return candidates.size() + 1; }
  std::size_t stop_index() const { return candidates.size(); }
  std::span<const double> feature(std::size_t action) const {
    return action == stop_index() ? std::span<const double>(stop_feature)
                                  : std::span<const double>(candidates[action].feature);
  }
};

// Per-direction features: a landmark-keyed appearance vector perturbed by
// hash-seeded per-edge noise, concatenated with the unit bearing from the
// current node to the neighbor, scaled to unit norm.
Observation observe(const NavGraph& graph, NodeId node);
std::vector<double> stop_feature(std::size_t feature_dim);

// Next node for a movement action; nullopt for stop. ActionError when the
// index is out of range.
std::optional<NodeId> step(const NavGraph& graph, NodeId current, std::size_t action);

struct PathResult {
  std::vector<NodeId> path;
  double length = 0.0;
};

// Shortest-path distance from every node to `target` (Dijkstra over
// Euclidean edge lengths).
std::vector<double> distances_to(const NavGraph& graph, NodeId target);

// Minimum-length path; among equal-length paths the lexicographically
// smallest node-id sequence wins.
PathResult shortest_path(const NavGraph& graph, NodeId from, NodeId to);

// Candidate index of the next hop of the shortest path, or the stop index
// when current == goal.
std::size_t expert_action(const NavGraph& graph, NodeId current, NodeId goal);
std::size_t expert_action(const NavGraph& graph, NodeId current, NodeId goal,
                          std::span<const double> dist_to_goal);

double path_length(const NavGraph& graph, std::span<const NodeId> nodes);

// Observations and shortest-path distance tables of one graph, computed once.
// The graph must outlive the environment. Read-only after construction.
class Environment {
 public:
  explicit Environment(const NavGraph& graph);

  const NavGraph& graph() const { return *graph_; }
  const Observation& observation(NodeId node) const;  // LookupError
  std::span<const double> distances_to(NodeId goal) const;
  std::size_t expert_action(NodeId current, NodeId goal) const;

 private:
  const NavGraph* graph_;
  std::vector<Observation> observations_;
  std::vector<std::vector<double>> distances_;  // distances_[goal][node]
};

using Environments = std::map<std::string, Environment, std::less<>>;

struct EpisodeSpec {
  std::string path_id;
  std::string graph_id;
  NodeId start = 0;
  NodeId goal = 0;
  std::vector<NodeId> expert_path;
  std::vector<TokenSeq> instructions;
};

struct WorldSplit {
  std::vector<EpisodeSpec> train_seen;
  std::vector<EpisodeSpec> val_seen;
  std::vector<EpisodeSpec> val_unseen;
  std::vector<EpisodeSpec> test_unseen;
};

enum class SplitName { TrainSeen, ValSeen, ValUnseen, TestUnseen };
std::string_view split_name(SplitName s);
SplitName parse_split(std::string_view s);  // ConfigError
const std::vector<EpisodeSpec>& split_episodes(const WorldSplit& w, SplitName s);
bool is_unseen(SplitName s);

}  // namespace vln
