#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vln/instructions.hpp"
#include "vln/world.hpp"

namespace vln {

struct SplitRatios {
  double seen = 0.5;  // graphs used for train_seen and val_seen
  double val_unseen = 0.25;
  double test_unseen = 0.25;

  bool operator==(const SplitRatios&) const = default;
};

struct WorldConfig {
  std::size_t num_graphs = 16;
  std::size_t nodes_per_graph = 16;
  std::size_t feature_dim = 32;
  std::size_t landmark_vocab_size = 12;
  SplitRatios split_ratios;
  std::size_t episodes_per_graph = 24;
  double val_seen_fraction = 0.2;
  std::size_t max_degree = 6;
  std::size_t min_path_nodes = 4;
  std::size_t max_path_nodes = 7;
  double spacing = 2.2;
  std::size_t instructions_per_episode = 3;
  double rare_rate_seen = 0.05;
  double rare_rate_unseen = 0.35;
  std::size_t max_instruction_tokens = 25;
  std::size_t max_len = kDefaultMaxLen;

  bool operator==(const WorldConfig&) const = default;
};

// Generated environments, their episode splits, and the vocabulary of the
// training instructions. A pure function of (seed, config).
struct World {
  std::uint64_t seed = 0;
  WorldConfig config;
  std::vector<NavGraph> graphs;
  WorldSplit split;
  Vocabulary vocab;

  const NavGraph& graph(const std::string& id) const;  // LookupError
};

World generate_world(std::uint64_t seed, const WorldConfig& config);

// One Environment per graph, keyed by graph id. `world` must outlive the map.
Environments make_environments(const World& world);

// World file (JSON). Loading reproduces identical observations.
std::string world_to_json(const World& world);
World world_from_json(const std::string& text);
void save_world(const std::string& path, const World& world);
World load_world(const std::string& path);

// Corpus file: one JSON object per line {"split", "path_id", "instructions"}.
std::string corpus_jsonl(const World& world);
// Vocabulary file: one token per line, in id order.
std::string vocabulary_lines(const Vocabulary& vocab);
Vocabulary vocabulary_from_lines(const std::string& text);

// All instruction TokenSeqs of a split, flattened in episode order.
std::vector<TokenSeq> split_corpus(const std::vector<EpisodeSpec>& episodes);

}  // namespace vln
