#include "vln/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "vln/errors.hpp"
#include "vln/rng.hpp"

namespace vln {
namespace {

constexpr std::uint64_t kLandmarkAppearanceSeed = 0x6c616e646d61726bULL;
constexpr std::uint64_t kStopFeatureSeed = 0x73746f7066656174ULL;
constexpr double kEdgeNoiseScale = 0.5;

// Deterministic pseudo-random vector in [-1, 1]^dim.
std::vector<double> hashed_vector(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                                  std::size_t dim) {
  Rng rng(hash_mix(a, b, c, dim));
  std::vector<double> v(dim);
  for (double& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

void normalize(std::vector<double>& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double n = std::sqrt(n2);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

bool on_shortest(double edge, double d_next, double d_here) {
  return std::abs(edge + d_next - d_here) <= 1e-9 * std::max(1.0, d_here);
}

}  // namespace

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

void NavGraph::finalize(std::size_t max_degree) {
  if (positions.empty()) throw GenerationError("graph " + id + " has no nodes");
  if (landmarks.size() != positions.size()) landmarks.resize(positions.size());
  adjacency.assign(positions.size(), {});
  std::set<std::pair<NodeId, NodeId>> seen;
  for (auto& [a, b] : edges) {
    if (a == b) throw GenerationError("self-loop at node " + std::to_string(a) + " in " + id);
    if (a > b) std::swap(a, b);
    if (!has_node(b)) throw GenerationError("edge references unknown node in " + id);
    if (!seen.insert({a, b}).second) {
      throw GenerationError("duplicate edge " + std::to_string(a) + "-" + std::to_string(b) +
                            " in " + id);
    }
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }
  std::sort(edges.begin(), edges.end());
  for (auto& nb : adjacency) {
    std::sort(nb.begin(), nb.end());
    if (nb.size() > max_degree) throw GenerationError("degree above maximum in " + id);
  }
  if (!connected()) throw GenerationError("graph " + id + " is not connected");
}

bool NavGraph::connected() const {
  if (positions.empty()) return true;
  std::vector<bool> reached(positions.size(), false);
  std::vector<NodeId> stack{0};
  reached[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (NodeId v : adjacency[u]) {
      if (!reached[v]) {
        reached[v] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == positions.size();
}

std::vector<double> stop_feature(std::size_t feature_dim) {
  auto v = hashed_vector(kStopFeatureSeed, 0, 0, feature_dim);
  normalize(v);
  return v;
}

Observation observe(const NavGraph& graph, NodeId node) {
  if (!graph.has_node(node)) {
    throw LookupError("node " + std::to_string(node) + " not in graph " + graph.id);
  }
  if (graph.feature_dim < 3) throw ConfigError("feature_dim must be at least 3");
  const std::size_t app_dim = graph.feature_dim - 2;
  Observation obs;
  obs.node = node;
  obs.stop_feature = stop_feature(graph.feature_dim);
  const Vec2 here = graph.positions[node];
  for (NodeId nb : graph.adjacency[node]) {
    std::vector<double> appearance(app_dim, 0.0);
    for (std::uint32_t lm : graph.landmarks[nb]) {
      const auto proto = hashed_vector(kLandmarkAppearanceSeed, lm, 0, app_dim);
      for (std::size_t i = 0; i < app_dim; ++i) appearance[i] += proto[i];
    }
    normalize(appearance);
    const auto noise = hashed_vector(graph.env_seed, node, nb, app_dim);
    for (std::size_t i = 0; i < app_dim; ++i) appearance[i] += kEdgeNoiseScale * noise[i] / std::sqrt(static_cast<double>(app_dim));
    normalize(appearance);

    const Vec2 there = graph.positions[nb];
    const double len = distance(here, there);
    Candidate c;
    c.neighbor = nb;
    c.feature.reserve(graph.feature_dim);
    const double w = std::sqrt(0.5);
    for (double a : appearance) c.feature.push_back(w * a);
    c.feature.push_back(w * (there.x - here.x) / len);
    c.feature.push_back(w * (there.y - here.y) / len);
    normalize(c.feature);
    obs.candidates.push_back(std::move(c));
  }
  return obs;
}

std::optional<NodeId> step(const NavGraph& graph, NodeId current, std::size_t action) {
  if (!graph.has_node(current)) {
    throw LookupError("node " + std::to_string(current) + " not in graph " + graph.id);
  }
  const auto& nb = graph.adjacency[current];
  if (action == nb.size()) return std::nullopt;
  if (action > nb.size()) {
    throw ActionError("action " + std::to_string(action) + " out of range (" +
                      std::to_string(nb.size() + 1) + " actions)");
  }
  return nb[action];
}

std::vector<double> distances_to(const NavGraph& graph, NodeId target) {
  if (!graph.has_node(target)) {
    throw LookupError("node " + std::to_string(target) + " not in graph " + graph.id);
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(graph.num_nodes(), inf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  d[target] = 0.0;
  pq.push({0.0, target});
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > d[u]) continue;
    for (NodeId v : graph.adjacency[u]) {
      const double nd = du + graph.edge_length(u, v);
      if (nd < d[v]) {
        d[v] = nd;
        pq.push({nd, v});
      }
    }
  }
  return d;
}

PathResult shortest_path(const NavGraph& graph, NodeId from, NodeId to) {
  if (!graph.has_node(from)) {
    throw LookupError("node " + std::to_string(from) + " not in graph " + graph.id);
  }
  const auto d = distances_to(graph, to);
  PathResult r;
  r.path.push_back(from);
  NodeId u = from;
  while (u != to) {
    NodeId next = u;
    for (NodeId v : graph.adjacency[u]) {
      if (on_shortest(graph.edge_length(u, v), d[v], d[u])) {
        next = v;
        break;
      }
    }
    if (next == u) throw GenerationError("graph " + graph.id + " is not connected");
    r.length += graph.edge_length(u, next);
    r.path.push_back(next);
    u = next;
  }
  return r;
}

std::size_t expert_action(const NavGraph& graph, NodeId current, NodeId goal,
                          std::span<const double> dist_to_goal) {
  const auto& nb = graph.adjacency.at(current);
  if (current == goal) return nb.size();
  for (std::size_t k = 0; k < nb.size(); ++k) {
    if (on_shortest(graph.edge_length(current, nb[k]), dist_to_goal[nb[k]], dist_to_goal[current])) {
      return k;
    }
  }
  throw GenerationError("no shortest-path successor in graph " + graph.id);
}

std::size_t expert_action(const NavGraph& graph, NodeId current, NodeId goal) {
  if (!graph.has_node(current)) {
    throw LookupError("node " + std::to_string(current) + " not in graph " + graph.id);
  }
  const auto d = distances_to(graph, goal);
  return expert_action(graph, current, goal, d);
}

double path_length(const NavGraph& graph, std::span<const NodeId> nodes) {
  double len = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) len += graph.edge_length(nodes[i - 1], nodes[i]);
  return len;
}

Environment::Environment(const NavGraph& graph) : graph_(&graph) {
  const auto n = static_cast<NodeId>(graph.num_nodes());
  observations_.reserve(n);
  distances_.reserve(n);
  for (NodeId v = 0; v < n; ++v) {
    observations_.push_back(observe(graph, v));
    distances_.push_back(vln::distances_to(graph, v));
  }
}

const Observation& Environment::observation(NodeId node) const {
  if (node >= observations_.size()) {
    throw LookupError("node " + std::to_string(node) + " not in graph " + graph_->id);
  }
  return observations_[node];
}

std::span<const double> Environment::distances_to(NodeId goal) const {
  if (goal >= distances_.size()) {
    throw LookupError("node " + std::to_string(goal) + " not in graph " + graph_->id);
  }
  return distances_[goal];
}

std::size_t Environment::expert_action(NodeId current, NodeId goal) const {
  if (current >= observations_.size()) {
    throw LookupError("node " + std::to_string(current) + " not in graph " + graph_->id);
  }
  return vln::expert_action(*graph_, current, goal, distances_to(goal));
}

std::string_view split_name(SplitName s) {
  switch (s) {
    case SplitName::TrainSeen: return "train_seen";
    case SplitName::ValSeen: return "val_seen";
    case SplitName::ValUnseen: return "val_unseen";
    case SplitName::TestUnseen: return "test_unseen";
  }
  return "unknown";
}

SplitName parse_split(std::string_view s) {
  for (SplitName n : {SplitName::TrainSeen, SplitName::ValSeen, SplitName::ValUnseen,
                      SplitName::TestUnseen}) {
    if (split_name(n) == s) return n;
  }
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

const std::vector<EpisodeSpec>& split_episodes(const WorldSplit& w, SplitName s) {
  switch (s) {
    case SplitName::TrainSeen: return w.train_seen;
    case SplitName::ValSeen: return w.val_seen;
    case SplitName::ValUnseen: return w.val_unseen;
    case SplitName::TestUnseen: return w.test_unseen;
  }
  return w.train_seen;
}

bool is_unseen(SplitName s) { return s == SplitName::ValUnseen || s == SplitName::TestUnseen; }

}  // namespace vln
