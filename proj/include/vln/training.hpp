#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vln/agent.hpp"
#include "vln/checkpoint.hpp"
#include "vln/dataset.hpp"
#include "vln/evaluation.hpp"
#include "vln/optim.hpp"

namespace vln {

// Roll-in strategies. TF always transitions with the expert action, SF with
// an action sampled from the policy, SS flips a Bernoulli(epsilon) coin per
// step. TF and SF run through the SS code path with epsilon 1 and 0.
enum class StrategyKind : std::uint8_t { TF, SF, SS };
std::string_view strategy_name(StrategyKind k);
StrategyKind parse_strategy(std::string_view s);  // ConfigError

struct StrategyConfig {
  StrategyKind kind = StrategyKind::SS;
  double epsilon = 0.5;  // SS only; constant for the whole run
  std::uint64_t rng_seed = 0;

  double effective_epsilon() const;
  void validate() const;  // ConfigError when epsilon is outside [0, 1]
  bool operator==(const StrategyConfig&) const = default;
};

// Returns teacher with probability epsilon, else sampled. Always consumes
// exactly one uniform draw.
std::size_t choose_transition_action(std::size_t teacher, std::size_t sampled, double epsilon,
                                     Rng& rng);

struct EpisodeLoss {
  Var loss;  // mean over roll-in steps of cross-entropy against the expert action
  Trajectory rollin;
  std::vector<double> step_losses;
};

// Roll-in with supervision from the expert at every visited state. Each step
// draws the student action (one uniform) and then the coin (one uniform), so
// every strategy consumes the same randomness. The roll-in ends when the
// transition action is stop or after max_steps.
EpisodeLoss episode_loss(const BoundAgent& agent, const EpisodeSpec& episode,
                         std::span<const TokenSeq> instructions, const Environment& env,
                         const StrategyConfig& strategy, Rng& rng,
                         std::size_t max_steps = kDefaultMaxSteps);

struct TrainConfig {
  std::size_t stage1_epochs = 10;
  std::size_t stage2_epochs = 5;
  std::size_t batch_stage1 = 24;
  std::size_t batch_stage2 = 16;
  double lr_main = 1e-4;
  double lr_lm_finetune = 5e-5;
  double clip_norm = 5.0;
  std::size_t max_steps = kDefaultMaxSteps;
  Setting setting = Setting::S;       // how training examples use instructions
  Setting eval_setting = Setting::S;  // validation protocol
  std::size_t eval_every = 1;         // epochs between validations (0: stage ends only)
  std::size_t eval_workers = 1;

  LrMap lr_map() const { return {lr_main, lr_lm_finetune}; }
  void validate() const;  // ConfigError
  bool operator==(const TrainConfig&) const = default;
};

// Embedding-partition parameters follow the LM's current rate (set by
// set_stage); everything else uses lrs.main.
double parameter_learning_rate(const Parameter& p, const LMModel& lm, const LrMap& lrs);

struct TrainLogRow {
  std::size_t epoch = 0;  // 1-based, counted across both stages
  int stage = 1;
  std::string strategy;
  double epsilon = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_seen_sr, val_seen_spl, val_unseen_sr, val_unseen_spl;
};

std::string log_row_json(const TrainLogRow& row);

struct TrainHooks {
  std::function<void(int stage, const Checkpoint&)> on_stage_end;
  std::function<void(const TrainLogRow&)> on_epoch;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  Checkpoint final_checkpoint;
};

// Two-stage training: stage 1 with the language model frozen (the scratch
// table trains throughout), stage 2 with it unfrozen at lr_lm_finetune.
// Randomness for epoch e of stage s comes from make_rng(strategy.rng_seed,
// "train", s * 1000000 + e). Stage-end checkpoints hold the parameters, the
// optimiser state and "train.stages_done"; passing one as `resume` continues
// after that stage. NumericAbort names the episode whose loss is not finite.
TrainResult train(AgentModel& model, const World& world, const Environments& envs,
                  const StrategyConfig& strategy, const TrainConfig& config,
                  const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

}  // namespace vln
