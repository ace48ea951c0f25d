#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vln/agent.hpp"
#include "vln/dataset.hpp"
#include "vln/lm.hpp"
#include "vln/training.hpp"

namespace vln {

struct EvalConfig {
  Setting setting = Setting::S;
  std::size_t workers = 1;
  bool include_test = false;

  bool operator==(const EvalConfig&) const = default;
};

struct AblationAxes {
  std::vector<EncoderKind> encoders{EncoderKind::Scratch, EncoderKind::Causal, EncoderKind::Masked};
  std::vector<StrategyKind> strategies{StrategyKind::TF, StrategyKind::SF, StrategyKind::SS};
  std::vector<std::uint64_t> seeds{1};

  bool operator==(const AblationAxes&) const = default;
};

// Everything a command needs. Serialised as JSON with sections "seed",
// "world", "grammar", "encoder", "strategy", "train", "pretrain", "agent",
// "eval", "ablate", "out"; every key has a default and unknown keys are
// rejected. The training RNG seed is derived from "seed", not configured.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  WorldConfig world;
  EncoderKind encoder = EncoderKind::Scratch;
  StrategyConfig strategy;
  TrainConfig train;
  PretrainConfig pretrain;
  AgentDims agent;
  EvalConfig eval;
  AblationAxes ablate;
  std::string out_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

// Settings sized for a single CPU core: higher learning rates (same 2:1
// main-to-LM ratio) and short stages. Used by the CLI when --preset desk is
// given and by the acceptance suite.
ExperimentConfig desk_config();

std::string config_to_json(const ExperimentConfig& cfg);
// Values in `text` override `base`. ConfigError on unknown keys, bad types or
// invalid values.
ExperimentConfig config_from_json(std::string_view text, const ExperimentConfig& base = {});

// Child seeds of one experiment seed.
struct RunSeeds {
  std::uint64_t init;
  std::uint64_t pretrain;
  std::uint64_t train;
};
RunSeeds run_seeds(std::uint64_t seed);

// Fresh agent for an encoder kind. Pretrained kinds take `lm` (head detached
// or not); the scratch kind builds its own table.
AgentModel make_agent(const World& world, EncoderKind kind, const LMModel* lm,
                      const AgentDims& dims, std::uint64_t init_seed);

// Hex FNV-1a digest used for cell bookkeeping and output hashing.
std::string fnv1a_hex(std::string_view bytes);

std::string world_config_json(const WorldConfig& c);
std::string train_config_json(const TrainConfig& c);
std::string pretrain_config_json(const PretrainConfig& c);

}  // namespace vln
