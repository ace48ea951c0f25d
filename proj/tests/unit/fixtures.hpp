#pragma once

#include <cstdint>

#include "vln/agent.hpp"
#include "vln/dataset.hpp"
#include "vln/lm.hpp"

namespace vln::fixtures {

// One seen graph, every episode in train_seen.
inline WorldConfig tiny_config(std::size_t nodes, std::size_t episodes, std::size_t min_path = 2,
                               std::size_t max_path = 4) {
  WorldConfig c;
  c.num_graphs = 1;
  c.nodes_per_graph = nodes;
  c.split_ratios = {1.0, 0.0, 0.0};
  c.episodes_per_graph = episodes;
  c.val_seen_fraction = 0.0;
  c.min_path_nodes = min_path;
  c.max_path_nodes = max_path;
  c.instructions_per_episode = 2;
  c.feature_dim = 8;
  return c;
}

inline World tiny_world(std::size_t nodes, std::size_t episodes, std::uint64_t seed = 3,
                        std::size_t min_path = 2, std::size_t max_path = 4) {
  return generate_world(seed, tiny_config(nodes, episodes, min_path, max_path));
}

inline AgentDims small_dims() { return {6, 5, 4}; }

inline AgentModel small_agent(const World& w, std::uint64_t seed = 11,
                              EncoderKind kind = EncoderKind::Scratch) {
  LMModel lm(kind, w.vocab.size(), 4, seed + 1);
  if (kind != EncoderKind::Scratch) lm.detach_head();
  return AgentModel(std::move(lm), w.config.feature_dim, small_dims(), seed);
}

}  // namespace vln::fixtures
