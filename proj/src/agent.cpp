#include "vln/agent.hpp"

#include <nlohmann/json.hpp>

#include "vln/errors.hpp"

namespace vln {
namespace {

enum Slot : std::size_t {
  kEncW,
  kEncB,
  kDecW,
  kDecB,
  kBridge,
  kWh,
  kWs,
  kActionHead,
  kStartAction,
  kNumSlots
};

std::vector<double> values_of(Var v) {
  auto s = v.value();
  return {s.begin(), s.end()};
}

}  // namespace

std::string_view setting_name(Setting s) { return s == Setting::S ? "S" : "M"; }

Setting parse_setting(std::string_view s) {
  if (s == "S" || s == "s") return Setting::S;
  if (s == "M" || s == "m") return Setting::M;
  throw ConfigError("unknown setting '" + std::string(s) + "' (expected S or M)");
}

AgentModel::AgentModel(LMModel lm, std::size_t feature_dim, const AgentDims& dims,
                       std::uint64_t seed)
    : lm_(std::move(lm)), dims_(dims), feature_dim_(feature_dim) {
  const std::size_t de = lm_.embed_dim();
  const std::size_t th = dims.text_hidden;
  const std::size_t h = dims.hidden;
  const std::size_t a = dims.attn_dim;
  const std::size_t ds = feature_dim;
  if (de == 0 || th == 0 || h == 0 || a == 0 || ds == 0) {
    throw ConfigError("agent dimensions must be positive");
  }
  params_.resize(kNumSlots);
  auto make = [&](Slot s, const char* name, Partition part, Shape shape, std::size_t fan_in,
                  std::size_t fan_out) {
    Parameter& p = params_[s];
    p.name = name;
    p.partition = part;
    p.value = Tensor::zeros(std::move(shape), true);
    if (fan_in > 0) xavier_fill(p.value, derive_seed(seed, name), fan_in, fan_out);
  };
  params_[kEncW] = {"text_enc.W", Partition::TextEncoder, {}};
  params_[kEncB] = {"text_enc.b", Partition::TextEncoder, {}};
  init_lstm(params_[kEncW].value, params_[kEncB].value, de, th, derive_seed(seed, "text_enc"));
  params_[kDecW] = {"decoder.W", Partition::Decoder, {}};
  params_[kDecB] = {"decoder.b", Partition::Decoder, {}};
  init_lstm(params_[kDecW].value, params_[kDecB].value, 2 * ds, h, derive_seed(seed, "decoder"));
  make(kBridge, "bridge", Partition::Decoder, {th, h}, h, th);
  make(kWh, "W_h", Partition::Decoder, {a, h}, h, a);
  make(kWs, "W_s", Partition::Decoder, {a, ds}, ds, a);
  make(kActionHead, "action_head", Partition::Decoder, {ds, h + th}, h + th, ds);
  make(kStartAction, "start_action", Partition::Decoder, {ds}, ds, ds);
}

std::vector<Parameter*> AgentModel::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : lm_.params()) out.push_back(&p);
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> AgentModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const Parameter& p : lm_.params()) out.push_back(&p);
  for (const Parameter& p : params_) out.push_back(&p);
  return out;
}

Checkpoint AgentModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.tag = static_cast<std::uint8_t>(lm_.kind());
  for (const Parameter* p : parameters()) ckpt.add(p->name, p->value);
  return ckpt;
}

void AgentModel::load_values(const Checkpoint& ckpt) {
  for (Parameter* p : parameters()) {
    const Tensor& t = ckpt.at(p->name);
    if (t.shape != p->value.shape) {
      throw IoError("record " + p->name + " has shape " + shape_str(t.shape) + ", expected " +
                    shape_str(p->value.shape));
    }
    p->value.data = t.data;
  }
}

AgentModel AgentModel::from_checkpoint(const Checkpoint& ckpt) {
  LMModel lm = LMModel::from_checkpoint(ckpt);
  AgentDims dims;
  dims.text_hidden = ckpt.at("text_enc.b").size() / 4;
  dims.hidden = ckpt.at("decoder.b").size() / 4;
  dims.attn_dim = ckpt.at("W_h").rows();
  const std::size_t ds = ckpt.at("W_s").cols();
  AgentModel m(std::move(lm), ds, dims, 0);
  m.load_values(ckpt);
  return m;
}

BoundAgent::BoundAgent(AgentModel& model, Tape& t)
    : tape(&t), lm_mut(&model.lm_), lm(&model.lm_), dims(model.dims_) {
  auto& p = model.params_;
  enc_W = t.param(p[kEncW].value);
  enc_b = t.param(p[kEncB].value);
  dec_W = t.param(p[kDecW].value);
  dec_b = t.param(p[kDecB].value);
  bridge = t.param(p[kBridge].value);
  W_h = t.param(p[kWh].value);
  W_s = t.param(p[kWs].value);
  action_head = t.param(p[kActionHead].value);
  start_action = t.param(p[kStartAction].value);
}

BoundAgent::BoundAgent(const AgentModel& model, Tape& t)
    : tape(&t), lm(&model.lm_), dims(model.dims_) {
  const auto& p = model.params_;
  enc_W = t.view(p[kEncW].value);
  enc_b = t.view(p[kEncB].value);
  dec_W = t.view(p[kDecW].value);
  dec_b = t.view(p[kDecB].value);
  bridge = t.view(p[kBridge].value);
  W_h = t.view(p[kWh].value);
  W_s = t.view(p[kWs].value);
  action_head = t.view(p[kActionHead].value);
  start_action = t.view(p[kStartAction].value);
}

Var encode_instruction(const BoundAgent& agent, const TokenSeq& x) {
  Tape& t = *agent.tape;
  Var e = agent.lm_mut != nullptr ? agent.lm_mut->embed(t, x) : agent.lm->embed(t, x);
  const std::size_t L = e.shape()[0];
  LstmState s = lstm_zero_state(t, agent.dims.text_hidden);
  std::vector<Var> hs;
  hs.reserve(L);
  for (std::size_t i = 0; i < L; ++i) {
    s = lstm_step(agent.enc_W, agent.enc_b, row(e, i), s);
    hs.push_back(s.h);
  }
  return stack(hs);
}

Attention text_attend(Var memory, Var features) {
  Var alpha = softmax(matmul(features, memory));
  return {matvec_t(features, alpha), alpha};
}

Var aggregate_contexts(std::span<const Var> contexts) { return mean(contexts); }

Attention visual_attend(Var h_prev, Var candidates, Var W_h, Var W_s) {
  Var key = matvec_t(W_s, matmul(W_h, h_prev));
  Var gamma = softmax(matmul(candidates, key));
  return {matvec_t(candidates, gamma), gamma};
}

Tensor candidate_matrix(const Observation& obs) {
  const std::size_t K = obs.num_actions();
  const std::size_t d = obs.stop_feature.size();
  Tensor m = Tensor::zeros({K, d});
  for (std::size_t k = 0; k < K; ++k) {
    auto f = obs.feature(k);
    if (f.size() != d) throw DimensionError("candidate features of unequal length");
    std::copy(f.begin(), f.end(), m.data.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
  return m;
}

AgentState initial_state(const BoundAgent& agent, std::span<const TokenSeq> instructions) {
  if (instructions.empty()) throw UsageError("an episode needs at least one instruction");
  AgentState s;
  s.mem = lstm_zero_state(*agent.tape, agent.dims.hidden);
  s.prev_action = agent.start_action;
  for (const TokenSeq& x : instructions) s.features.push_back(encode_instruction(agent, x));
  return s;
}

StepOutput decode_step(const BoundAgent& agent, const AgentState& state, const Observation& obs,
                       std::size_t max_steps) {
  if (state.t >= max_steps) {
    throw UsageError("step budget of " + std::to_string(max_steps) + " exhausted");
  }
  Tape& t = *agent.tape;
  StepOutput out;
  Var memory = matmul(agent.bridge, state.mem.h);
  std::vector<Var> contexts;
  contexts.reserve(state.features.size());
  for (Var f : state.features) {
    Attention a = text_attend(memory, f);
    contexts.push_back(a.context);
    out.alpha.push_back(values_of(a.weights));
  }
  Var z = aggregate_contexts(contexts);
  Var S = t.constant(candidate_matrix(obs));
  Attention vis = visual_attend(state.mem.h, S, agent.W_h, agent.W_s);
  out.gamma = values_of(vis.weights);
  out.next = state;
  out.next.mem = lstm_step(agent.dec_W, agent.dec_b, concat(vis.context, state.prev_action), state.mem);
  out.next.t = state.t + 1;
  Var query = matmul(agent.action_head, concat(out.next.mem.h, z));
  out.logits = matmul(S, query);
  return out;
}

void advance(AgentState& state, const Observation& obs, std::size_t action) {
  if (action >= obs.num_actions()) {
    throw ActionError("action " + std::to_string(action) + " out of range for " +
                      std::to_string(obs.num_actions()) + " candidates");
  }
  state.prev_action = state.mem.h.tape->constant(obs.feature(action));
}

std::size_t argmax(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

std::size_t sample_action(std::span<const double> logits, Rng& rng) {
  const std::vector<double> p = softmax_values(logits);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u < acc) return k;
  }
  // Round-off left u above the final partial sum: take the last action with
  // nonzero probability.
  for (std::size_t k = p.size(); k-- > 0;) {
    if (p[k] > 0.0) return k;
  }
  return p.size() - 1;
}

Trajectory rollout(const AgentModel& model, const EpisodeSpec& episode, const Environment& env,
                   std::span<const TokenSeq> instructions, PolicyMode mode, std::size_t max_steps,
                   Rng* rng) {
  if (mode == PolicyMode::Sample && rng == nullptr) throw UsageError("sample mode needs an rng");
  Tape tape;
  BoundAgent agent(model, tape);
  AgentState state = initial_state(agent, instructions);
  Trajectory traj;
  traj.path_id = episode.path_id;
  NodeId node = episode.start;
  traj.nodes.push_back(node);
  while (true) {
    if (state.t >= max_steps) {
      traj.truncated = true;
      break;
    }
    const Observation& obs = env.observation(node);
    StepOutput out = decode_step(agent, state, obs, max_steps);
    std::vector<double> logits = values_of(out.logits);
    const std::size_t action =
        mode == PolicyMode::Greedy ? argmax(logits) : sample_action(logits, *rng);
    traj.actions.push_back(action);
    traj.logits.push_back(std::move(logits));
    traj.alpha.push_back(std::move(out.alpha));
    traj.gamma.push_back(std::move(out.gamma));
    if (action == obs.stop_index()) break;
    node = obs.candidates[action].neighbor;
    traj.nodes.push_back(node);
    state = std::move(out.next);
    advance(state, obs, action);
  }
  return traj;
}

std::string trajectory_json(const Trajectory& traj) {
  nlohmann::json j;
  j["path_id"] = traj.path_id;
  j["nodes"] = traj.nodes;
  j["actions"] = traj.actions;
  j["alpha"] = traj.alpha;
  j["gamma"] = traj.gamma;
  j["truncated"] = traj.truncated;
  return j.dump();
}

}  // namespace vln
