#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <set>

#include "fixtures.hpp"
#include "vln/dataset.hpp"
#include "vln/errors.hpp"
#include "vln/rng.hpp"
#include "vln/world.hpp"

using namespace vln;

namespace {

// Hop counts by breadth-first search.
std::vector<std::size_t> bfs_hops(const NavGraph& g, NodeId from) {
  std::vector<std::size_t> d(g.num_nodes(), SIZE_MAX);
  std::deque<NodeId> q{from};
  d[from] = 0;
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop_front();
    for (NodeId v : g.adjacency[u]) {
      if (d[v] == SIZE_MAX) {
        d[v] = d[u] + 1;
        q.push_back(v);
      }
    }
  }
  return d;
}

// Minimum Euclidean length over every simple path, by exhaustive DFS.
double brute_force_length(const NavGraph& g, NodeId from, NodeId to) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> used(g.num_nodes(), false);
  std::function<void(NodeId, double)> dfs = [&](NodeId u, double len) {
    if (len >= best) return;
    if (u == to) {
      best = len;
      return;
    }
    used[u] = true;
    for (NodeId v : g.adjacency[u]) {
      if (!used[v]) dfs(v, len + g.edge_length(u, v));
    }
    used[u] = false;
  };
  dfs(from, 0.0);
  return best;
}

NavGraph chain3() {
  NavGraph g;
  g.id = "chain";
  g.feature_dim = 8;
  g.positions = {{0, 0}, {1, 0}, {2, 0}};
  g.edges = {{0, 1}, {1, 2}};
  g.landmarks = {{0}, {1}, {2}};
  g.finalize();
  return g;
}

}  // namespace

TEST(World, SameSeedSameWorld) {
  const WorldConfig c;
  EXPECT_EQ(world_to_json(generate_world(5, c)), world_to_json(generate_world(5, c)));
  EXPECT_NE(world_to_json(generate_world(5, c)), world_to_json(generate_world(6, c)));
}

TEST(World, SeenAndUnseenGraphsAreDisjoint) {
  WorldConfig c;
  c.num_graphs = 4;
  c.split_ratios = {0.5, 0.25, 0.25};
  const World w = generate_world(1, c);
  std::set<std::string> seen, unseen;
  for (const auto* s : {&w.split.train_seen, &w.split.val_seen}) {
    for (const auto& e : *s) seen.insert(e.graph_id);
  }
  for (const auto* s : {&w.split.val_unseen, &w.split.test_unseen}) {
    for (const auto& e : *s) unseen.insert(e.graph_id);
  }
  EXPECT_EQ(seen.size(), 2u);
  EXPECT_EQ(unseen.size(), 2u);
  for (const auto& g : seen) EXPECT_EQ(unseen.count(g), 0u);
}

TEST(World, DefaultConfigHasFourSplits) {
  const World w = generate_world(1, WorldConfig{});
  EXPECT_GE(w.graphs.size(), 8u);
  std::size_t total = 0;
  for (SplitName s : {SplitName::TrainSeen, SplitName::ValSeen, SplitName::ValUnseen, SplitName::TestUnseen}) {
    EXPECT_FALSE(split_episodes(w.split, s).empty()) << split_name(s);
    total += split_episodes(w.split, s).size();
  }
  EXPECT_GE(total, 200u);
}

TEST(World, ExpertPathsAreShortestByBfsAndBruteForce) {
  const World w = generate_world(2, WorldConfig{});
  for (SplitName s : {SplitName::TrainSeen, SplitName::ValUnseen}) {
    for (const auto& e : split_episodes(w.split, s)) {
      const NavGraph& g = w.graph(e.graph_id);
      EXPECT_EQ(e.expert_path.front(), e.start);
      EXPECT_EQ(e.expert_path.back(), e.goal);
      for (std::size_t i = 1; i < e.expert_path.size(); ++i) {
        const auto& adj = g.adjacency[e.expert_path[i - 1]];
        EXPECT_TRUE(std::binary_search(adj.begin(), adj.end(), e.expert_path[i]));
      }
      // Hop count is at least the BFS distance; length equals the exhaustive minimum.
      EXPECT_GE(e.expert_path.size() - 1, bfs_hops(g, e.start)[e.goal]);
      EXPECT_NEAR(path_length(g, e.expert_path), brute_force_length(g, e.start, e.goal), 1e-12);
    }
  }
}

TEST(World, ShortestPathMatchesBruteForceOnRandomGraphs) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const World w = fixtures::tiny_world(12, 3, seed);
    const NavGraph& g = w.graphs[0];
    for (NodeId a = 0; a < g.num_nodes(); ++a) {
      for (NodeId b = 0; b < g.num_nodes(); ++b) {
        const PathResult p = shortest_path(g, a, b);
        EXPECT_NEAR(p.length, brute_force_length(g, a, b), 1e-12);
        EXPECT_NEAR(path_length(g, p.path), p.length, 1e-12);
        EXPECT_NEAR(distances_to(g, b)[a], p.length, 1e-12);
      }
    }
  }
}

TEST(World, ShortestPathTrivialCases) {
  const NavGraph g = chain3();
  auto self = shortest_path(g, 1, 1);
  EXPECT_EQ(self.path, (std::vector<NodeId>{1}));
  EXPECT_EQ(self.length, 0.0);
  EXPECT_EQ(shortest_path(g, 0, 2).path, (std::vector<NodeId>{0, 1, 2}));
}

TEST(World, ObservationShape) {
  const World w = fixtures::tiny_world(9, 3, 4);
  const NavGraph& g = w.graphs[0];
  for (NodeId n = 0; n < g.num_nodes(); ++n) {
    const Observation o = observe(g, n);
    EXPECT_EQ(o.candidates.size(), g.adjacency[n].size());
    EXPECT_EQ(o.num_actions(), g.adjacency[n].size() + 1);
    EXPECT_EQ(o.stop_index(), o.candidates.size());
    for (std::size_t k = 0; k < o.candidates.size(); ++k) {
      EXPECT_EQ(o.candidates[k].neighbor, g.adjacency[n][k]);
      EXPECT_EQ(o.candidates[k].feature.size(), g.feature_dim);
    }
    EXPECT_EQ(observe(g, n).candidates[0].feature, o.candidates[0].feature);
  }
}

TEST(World, ThreeNeighboursGiveFourActions) {
  NavGraph g;
  g.id = "star";
  g.feature_dim = 8;
  g.positions = {{0, 0}, {1, 0}, {0, 1}, {-1, 0}};
  g.edges = {{0, 1}, {0, 2}, {0, 3}};
  g.landmarks = {{0}, {1}, {2}, {3}};
  g.finalize();
  EXPECT_EQ(observe(g, 0).num_actions(), 4u);
}

TEST(World, EdgeFeaturesDependOnViewingDirection) {
  const World w = fixtures::tiny_world(5, 2, 5);
  const NavGraph& g = w.graphs[0];
  for (auto [a, b] : g.edges) {
    const Observation oa = observe(g, a), ob = observe(g, b);
    const auto ka = std::find(g.adjacency[a].begin(), g.adjacency[a].end(), b) - g.adjacency[a].begin();
    const auto kb = std::find(g.adjacency[b].begin(), g.adjacency[b].end(), a) - g.adjacency[b].begin();
    EXPECT_NE(oa.candidates[ka].feature, ob.candidates[kb].feature);
  }
}

TEST(World, StepTransitions) {
  const NavGraph g = chain3();
  EXPECT_EQ(step(g, 1, observe(g, 1).stop_index()), std::nullopt);
  EXPECT_EQ(step(g, 1, 0), std::optional<NodeId>(0));
  EXPECT_EQ(step(g, 1, 1), std::optional<NodeId>(2));
  EXPECT_THROW(step(g, 1, 3), ActionError);
}

TEST(World, RandomWalkStaysInGraph) {
  const World w = fixtures::tiny_world(12, 3, 6);
  const NavGraph& g = w.graphs[0];
  Rng rng(7);
  for (int walk = 0; walk < 100; ++walk) {
    NodeId cur = static_cast<NodeId>(uniform_index(rng, g.num_nodes()));
    for (int t = 0; t < 10; ++t) {
      const auto next = step(g, cur, uniform_index(rng, g.adjacency[cur].size()));
      ASSERT_TRUE(next.has_value());
      ASSERT_TRUE(g.has_node(*next));
      cur = *next;
    }
  }
}

TEST(World, ExpertActionCases) {
  const NavGraph g = chain3();
  EXPECT_EQ(expert_action(g, 2, 2), observe(g, 2).stop_index());
  EXPECT_EQ(expert_action(g, 0, 2), 0u);  // the only neighbour, node 1
  EXPECT_EQ(observe(g, 0).candidates[0].neighbor, 1u);
}

TEST(World, FollowingTheExpertTakesShortestHops) {
  const World w = generate_world(3, WorldConfig{});
  const Environments envs = make_environments(w);
  for (const auto& g : w.graphs) {
    const Environment& env = envs.at(g.id);
    for (NodeId s = 0; s < g.num_nodes(); ++s) {
      for (NodeId t = 0; t < g.num_nodes(); ++t) {
        const PathResult best = shortest_path(g, s, t);
        NodeId cur = s;
        std::vector<NodeId> nodes{cur};
        for (;;) {
          const std::size_t a = env.expert_action(cur, t);
          const auto next = step(g, cur, a);
          if (!next) break;
          cur = *next;
          nodes.push_back(cur);
          ASSERT_LE(nodes.size(), g.num_nodes());
        }
        EXPECT_EQ(cur, t);
        EXPECT_NEAR(path_length(g, nodes), best.length, 1e-12);
      }
    }
  }
}

TEST(World, JsonRoundTripKeepsObservations) {
  const World w = fixtures::tiny_world(9, 4, 8);
  const World back = world_from_json(world_to_json(w));
  EXPECT_EQ(world_to_json(back), world_to_json(w));
  for (NodeId n = 0; n < 9; ++n) {
    EXPECT_EQ(observe(back.graphs[0], n).candidates[0].feature,
              observe(w.graphs[0], n).candidates[0].feature);
  }
}

TEST(World, InvalidConfigsAreRejected) {
  WorldConfig c;
  c.split_ratios = {0.5, 0.1, 0.1};
  EXPECT_THROW(generate_world(1, c), GenerationError);
  WorldConfig d;
  d.nodes_per_graph = 1;
  EXPECT_THROW(generate_world(1, d), GenerationError);
  EXPECT_THROW(parse_split("train"), ConfigError);
}

TEST(World, EnvironmentRejectsUnknownNode) {
  const World w = fixtures::tiny_world(4, 2, 9);
  const Environment env(w.graphs[0]);
  EXPECT_THROW(env.observation(99), LookupError);
}
