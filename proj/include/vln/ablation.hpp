#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vln/dataset.hpp"
#include "vln/evaluation.hpp"
#include "vln/lm.hpp"
#include "vln/training.hpp"

namespace vln {

struct AblationSpec {
  std::vector<EncoderKind> encoders;
  std::vector<StrategyConfig> strategies;  // rng_seed is ignored; each cell derives its own
  std::vector<std::uint64_t> seeds;
  TrainConfig train;
  PretrainConfig pretrain;
  AgentDims agent;
  Setting setting = Setting::S;
  bool include_test = false;
  // When non-empty, finished cells and pretrained models are stored here and
  // reused on the next call; a cell file that fails its checksum is re-run.
  std::string cache_dir;
  std::function<void(const std::string&)> progress;
};

struct AblationCell {
  EncoderKind encoder = EncoderKind::Scratch;
  StrategyConfig strategy;
  std::uint64_t seed = 0;
  std::vector<SplitReport> reports;  // val_seen, val_unseen[, test_unseen]
  bool reused = false;               // loaded from the cache instead of trained
};

struct AblationRow {
  EncoderKind encoder = EncoderKind::Scratch;
  StrategyConfig strategy;
  std::vector<AblationCell> cells;  // one per seed, in seed order
  std::vector<SplitReport> median;  // per split, metric-wise median over seeds
};

struct AblationTable {
  std::vector<AblationRow> rows;  // encoder-major, strategy-minor
};

// Trains and evaluates every (encoder, strategy, seed) cell. A training abort
// is rethrown with the cell coordinates prepended.
AblationTable ablation_grid(const World& world, const AblationSpec& spec);

// Metric-wise median (mean of the middle pair for even counts).
SplitReport median_report(std::span<const SplitReport> reports);

// Identifier used for cache files, e.g. "scratch-SS-e0.5-seed3".
std::string cell_id(EncoderKind encoder, const StrategyConfig& strategy, std::uint64_t seed);

std::string format_ablation(const AblationTable& table);
std::string ablation_json(const AblationTable& table);

// Pretrains (or loads from cache_dir) the language model a cell uses.
LMModel pretrained_lm(const World& world, EncoderKind kind, const PretrainConfig& cfg,
                      std::uint64_t seed, const std::string& cache_dir = {});

}  // namespace vln
