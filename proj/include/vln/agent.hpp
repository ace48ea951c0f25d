#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vln/autodiff.hpp"
#include "vln/checkpoint.hpp"
#include "vln/layers.hpp"
#include "vln/lm.hpp"
#include "vln/rng.hpp"
#include "vln/world.hpp"

namespace vln {

// How an episode's M instructions reach the agent: one at a time (S) or all at
// once through the mean of their attention contexts (M).
enum class Setting : std::uint8_t { S, M };
std::string_view setting_name(Setting s);
Setting parse_setting(std::string_view s);  // ConfigError

struct AgentDims {
  std::size_t text_hidden = 64;
  std::size_t hidden = 64;
  std::size_t attn_dim = 32;

  bool operator==(const AgentDims&) const = default;
};

inline constexpr std::size_t kDefaultMaxSteps = 10;

// Parameters: the word-embedding function (owned LMModel), the instruction
// encoder LSTM, and the decoder LSTM with its attention projections, text
// bridge, action head and start-of-episode action embedding.
class AgentModel {
 public:
  AgentModel() = default;
  AgentModel(LMModel lm, std::size_t feature_dim, const AgentDims& dims, std::uint64_t seed);

  LMModel& lm() { return lm_; }
  const LMModel& lm() const { return lm_; }
  const AgentDims& dims() const { return dims_; }
  std::size_t feature_dim() const { return feature_dim_; }

  // Every parameter, embedding partition first; each appears exactly once.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  // Encoder and decoder parameters only (not the embedding function).
  std::vector<Parameter>& own_parameters() { return params_; }
  const std::vector<Parameter>& own_parameters() const { return params_; }

  // Tag = encoder kind; records are the parameters in parameters() order.
  Checkpoint to_checkpoint() const;
  // Rebuilds the model, inferring every size from the record shapes.
  static AgentModel from_checkpoint(const Checkpoint& ckpt);
  // Overwrites parameter values from matching records (IoError on mismatch).
  void load_values(const Checkpoint& ckpt);

 private:
  friend struct BoundAgent;
  LMModel lm_;
  AgentDims dims_;
  std::size_t feature_dim_ = 0;
  std::vector<Parameter> params_;
};

// The agent's parameters as leaves of one tape. Trainable binding routes
// gradients into the model; read-only binding (from a const model) never
// produces gradients and is safe to use from several threads.
struct BoundAgent {
  BoundAgent(AgentModel& model, Tape& tape);
  BoundAgent(const AgentModel& model, Tape& tape);

  Tape* tape;
  LMModel* lm_mut = nullptr;
  const LMModel* lm;
  AgentDims dims;
  Var enc_W, enc_b;
  Var dec_W, dec_b;
  Var bridge;       // [text_hidden x hidden], maps h_{t-1} into text-feature space
  Var W_h, W_s;     // visual attention projections
  Var action_head;  // [feature_dim x (hidden + text_hidden)]
  Var start_action;
};

// h^e_1..h^e_L of one instruction, [L x text_hidden].
Var encode_instruction(const BoundAgent& agent, const TokenSeq& x);

struct Attention {
  Var context;
  Var weights;
};

// alpha = softmax(features . memory), context = features^T alpha.
Attention text_attend(Var memory, Var features);
// Arithmetic mean of the per-instruction contexts.
Var aggregate_contexts(std::span<const Var> contexts);
// gamma_j = softmax((W_h h)^T W_s s_j) over the rows of `candidates`
// (movement candidates then stop); context = candidates^T gamma.
Attention visual_attend(Var h_prev, Var candidates, Var W_h, Var W_s);

// [num_actions x d_s] matrix of an observation's candidate features, stop last.
Tensor candidate_matrix(const Observation& obs);

struct AgentState {
  LstmState mem;
  Var prev_action;
  std::vector<Var> features;  // one [L_i x text_hidden] block per instruction
  std::size_t t = 0;
};

AgentState initial_state(const BoundAgent& agent, std::span<const TokenSeq> instructions);

struct StepOutput {
  Var logits;  // num_actions entries, stop last
  AgentState next;
  std::vector<std::vector<double>> alpha;  // per instruction
  std::vector<double> gamma;
};

// One decoder step: text attention with h_{t-1}, context aggregation, visual
// attention, LSTM recurrence on [s_t, a_{t-1}], and candidate scoring
// dot(action_head [h_t; z_t], feature_k). The chosen action's feature must be
// fed back with advance(). UsageError when state.t >= max_steps.
StepOutput decode_step(const BoundAgent& agent, const AgentState& state, const Observation& obs,
                       std::size_t max_steps = kDefaultMaxSteps);
// Records the chosen candidate's feature as a_{t-1} for the next step.
void advance(AgentState& state, const Observation& obs, std::size_t action);

struct Trajectory {
  std::string path_id;
  std::vector<NodeId> nodes;
  std::vector<std::size_t> actions;
  std::vector<std::vector<double>> logits;
  std::vector<std::vector<std::vector<double>>> alpha;  // [step][instruction][position]
  std::vector<std::vector<double>> gamma;
  bool truncated = false;  // step budget ran out before a stop action
};

enum class PolicyMode { Greedy, Sample };

// Lowest index among the maximal logits.
std::size_t argmax(std::span<const double> logits);
// One uniform draw, inverted against softmax(logits).
std::size_t sample_action(std::span<const double> logits, Rng& rng);

// Runs decode_step from the episode start until stop or max_steps. Sample
// mode requires rng.
Trajectory rollout(const AgentModel& model, const EpisodeSpec& episode, const Environment& env,
                   std::span<const TokenSeq> instructions, PolicyMode mode,
                   std::size_t max_steps = kDefaultMaxSteps, Rng* rng = nullptr);

// One JSON object per episode rollout for the trajectory log.
std::string trajectory_json(const Trajectory& traj);

}  // namespace vln
