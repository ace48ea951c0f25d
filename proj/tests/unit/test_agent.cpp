#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "vln/agent.hpp"
#include "vln/errors.hpp"
#include "vln/gradcheck.hpp"
#include "vln/rng.hpp"
#include "vln/training.hpp"

using namespace vln;
using vln::fixtures::small_agent;
using vln::fixtures::tiny_world;

namespace {

Tensor random_tensor(Shape s, std::uint64_t seed) {
  Tensor t = Tensor::zeros(std::move(s));
  Rng rng(seed);
  for (auto& v : t.data) v = uniform(rng, -1.0, 1.0);
  return t;
}

std::vector<double> values(Var v) { return {v.value().begin(), v.value().end()}; }

// Decoder whose hidden state is the same constant at every step and whose
// action head points at the stop feature, so stop always has the top logit.
AgentModel stop_agent(const World& w) {
  AgentModel m = small_agent(w);
  Checkpoint c = m.to_checkpoint();
  const std::size_t H = m.dims().hidden;
  for (auto& r : c.records) {
    if (r.name == "decoder.W") std::fill(r.tensor.data.begin(), r.tensor.data.end(), 0.0);
    if (r.name == "decoder.b") {
      for (std::size_t k = 0; k < 4 * H; ++k) {
        const std::size_t gate = k / H;
        r.tensor.data[k] = gate == 0 ? 50.0 : gate == 1 ? -50.0 : gate == 2 ? 1.0 : 50.0;
      }
    }
  }
  const double h0 = std::tanh(std::tanh(1.0));
  const auto stop = stop_feature(w.config.feature_dim);
  for (auto& r : c.records) {
    if (r.name != "action_head") continue;
    std::fill(r.tensor.data.begin(), r.tensor.data.end(), 0.0);
    for (std::size_t i = 0; i < stop.size(); ++i) r.tensor.at(i, 0) = 10.0 * stop[i] / h0;
  }
  m.load_values(c);
  return m;
}

}  // namespace

TEST(Agent, EncoderOutputsOneRowPerToken) {
  const World w = tiny_world(6, 3);
  AgentModel m = small_agent(w);
  Tape tape;
  BoundAgent a(static_cast<const AgentModel&>(m), tape);
  const TokenSeq one{{Vocabulary::kEos}, ""};
  EXPECT_EQ(encode_instruction(a, one).shape(), (Shape{1, m.dims().text_hidden}));
  for (const auto& t : w.split.train_seen[0].instructions) {
    EXPECT_EQ(encode_instruction(a, t).shape()[0], t.tokens.size());
  }
}

TEST(Agent, EncoderProbeGradientCheck) {
  const World w = tiny_world(6, 3);
  AgentModel m = small_agent(w);
  std::vector<Tensor*> ps;
  for (Parameter* p : m.parameters()) {
    if (p->partition == Partition::Decoder) continue;
    p->value.requires_grad = true;
    ps.push_back(&p->value);
  }
  const TokenSeq& x = w.split.train_seen[0].instructions[0];
  const Tensor probe = random_tensor({x.tokens.size(), m.dims().text_hidden}, 3);
  auto r = gradient_check_params(
      [&](Tape& t) {
        BoundAgent a(m, t);
        return sum(mul(encode_instruction(a, x), t.constant(probe)));
      },
      ps, 50, 4);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(Agent, TextAttentionTrivialCases) {
  Tape tape;
  Var mem = tape.constant(std::vector<double>{0.3, -0.2});
  Attention one = text_attend(mem, tape.constant(Tensor::matrix(1, 2, {0.5, 0.7})));
  EXPECT_EQ(values(one.weights), (std::vector<double>{1.0}));
  EXPECT_EQ(values(one.context), (std::vector<double>{0.5, 0.7}));
  Attention same = text_attend(mem, tape.constant(Tensor::matrix(3, 2, {1, 2, 1, 2, 1, 2})));
  for (double a : values(same.weights)) EXPECT_DOUBLE_EQ(a, 1.0 / 3.0);
}

TEST(Agent, TextAttentionMatchesStraightLineFormula) {
  const std::size_t L = 5, d = 4;
  const Tensor F = random_tensor({L, d}, 5);
  const Tensor m = random_tensor({d}, 6);
  // alpha_i = exp(F_i . m) / sum_j exp(F_j . m); c = sum_i alpha_i F_i.
  std::vector<long double> score(L);
  long double z = 0;
  for (std::size_t i = 0; i < L; ++i) {
    score[i] = 0;
    for (std::size_t k = 0; k < d; ++k) score[i] += static_cast<long double>(F.at(i, k)) * m[k];
    z += std::exp(score[i]);
  }
  Tape tape;
  Attention a = text_attend(tape.constant(m), tape.constant(F));
  for (std::size_t i = 0; i < L; ++i) {
    EXPECT_NEAR(a.weights.value()[i], static_cast<double>(std::exp(score[i]) / z), 1e-15);
  }
  for (std::size_t k = 0; k < d; ++k) {
    long double c = 0;
    for (std::size_t i = 0; i < L; ++i) c += std::exp(score[i]) / z * F.at(i, k);
    EXPECT_NEAR(a.context.value()[k], static_cast<double>(c), 1e-15);
  }
}

TEST(Agent, AggregationCases) {
  Tape tape;
  Var c = tape.constant(std::vector<double>{0.1, 0.2, 0.3});
  Var one[] = {c};
  EXPECT_EQ(values(aggregate_contexts(one)), values(c));
  Var two[] = {c, c};
  EXPECT_EQ(values(aggregate_contexts(two)), values(c));
  Var three[] = {tape.constant(std::vector<double>{1, 2}), tape.constant(std::vector<double>{4, -2}),
                 tape.constant(std::vector<double>{-2, 3})};
  const auto z = values(aggregate_contexts(three));
  EXPECT_DOUBLE_EQ(z[0], 1.0);
  EXPECT_DOUBLE_EQ(z[1], 1.0);
}

TEST(Agent, VisualAttentionSymmetryAndOracle) {
  Tape tape;
  const Tensor Wh = random_tensor({3, 4}, 7), Ws = random_tensor({3, 5}, 8);
  const Tensor h = random_tensor({4}, 9);
  Attention same = visual_attend(tape.constant(h), tape.constant(Tensor::matrix(2, 5, {1, 2, 3, 4, 5, 1, 2, 3, 4, 5})),
                                 tape.constant(Wh), tape.constant(Ws));
  EXPECT_EQ(values(same.weights), (std::vector<double>{0.5, 0.5}));

  const Tensor S = random_tensor({4, 5}, 10);
  Attention a = visual_attend(tape.constant(h), tape.constant(S), tape.constant(Wh), tape.constant(Ws));
  // gamma_j proportional to exp((W_h h) . (W_s s_j)).
  std::vector<long double> q(3, 0), score(4, 0);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t k = 0; k < 4; ++k) q[r] += static_cast<long double>(Wh.at(r, k)) * h[k];
  }
  long double z = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t r = 0; r < 3; ++r) {
      long double ws = 0;
      for (std::size_t k = 0; k < 5; ++k) ws += static_cast<long double>(Ws.at(r, k)) * S.at(j, k);
      score[j] += q[r] * ws;
    }
    z += std::exp(score[j]);
  }
  double total = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(a.weights.value()[j], static_cast<double>(std::exp(score[j]) / z), 1e-14);
    total += a.weights.value()[j];
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Agent, DecodeStepShapeAndDeterminism) {
  const World w = tiny_world(9, 3);
  const AgentModel m = small_agent(w);
  const Environment env(w.graphs[0]);
  const auto& e = w.split.train_seen[0];
  const Observation& obs = env.observation(e.start);
  std::vector<double> first;
  for (int rep = 0; rep < 2; ++rep) {
    Tape tape;
    BoundAgent a(m, tape);
    const AgentState s = initial_state(a, e.instructions);
    const StepOutput out = decode_step(a, s, obs);
    EXPECT_EQ(out.logits.size(), obs.num_actions());
    EXPECT_EQ(out.alpha.size(), e.instructions.size());
    if (rep == 0) first = values(out.logits);
    else EXPECT_EQ(values(out.logits), first);
  }
}

TEST(Agent, DecodeStepBudget) {
  const World w = tiny_world(4, 2);
  const AgentModel m = small_agent(w);
  const Environment env(w.graphs[0]);
  Tape tape;
  BoundAgent a(m, tape);
  AgentState s = initial_state(a, w.split.train_seen[0].instructions);
  s.t = 3;
  EXPECT_THROW(decode_step(a, s, env.observation(0), 3), UsageError);
  EXPECT_THROW(advance(s, env.observation(0), 99), ActionError);
}

TEST(Agent, FullStepGradientCheck) {
  const World w = tiny_world(2, 2, 3, 2, 2);
  AgentModel m = small_agent(w);
  const Environments envs = make_environments(w);
  std::vector<Tensor*> ps;
  for (Parameter* p : m.parameters()) {
    p->value.requires_grad = true;
    ps.push_back(&p->value);
  }
  const auto& e = w.split.train_seen[0];
  StrategyConfig sc;
  sc.epsilon = 0.5;
  auto r = gradient_check_params(
      [&](Tape& t) {
        BoundAgent a(m, t);
        Rng rng(5);
        return episode_loss(a, e, e.instructions, envs.at(e.graph_id), sc, rng).loss;
      },
      ps, 50, 6);
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst_coord;
}

TEST(Agent, StopFavouringModelStopsAtStart) {
  const World w = tiny_world(9, 3);
  const AgentModel m = stop_agent(w);
  const Environment env(w.graphs[0]);
  for (const auto& e : w.split.train_seen) {
    const Trajectory t = rollout(m, e, env, e.instructions, PolicyMode::Greedy);
    EXPECT_EQ(t.nodes, (std::vector<NodeId>{e.start}));
    EXPECT_EQ(t.actions.size(), 1u);
    EXPECT_FALSE(t.truncated);
  }
}

TEST(Agent, GreedyRolloutIsDeterministic) {
  const World w = tiny_world(9, 3);
  const AgentModel m = small_agent(w);
  const Environment env(w.graphs[0]);
  const auto& e = w.split.train_seen[1];
  EXPECT_EQ(trajectory_json(rollout(m, e, env, e.instructions, PolicyMode::Greedy)),
            trajectory_json(rollout(m, e, env, e.instructions, PolicyMode::Greedy)));
  EXPECT_THROW(rollout(m, e, env, e.instructions, PolicyMode::Sample), UsageError);
}

TEST(Agent, SampledActionsFollowSoftmax) {
  const std::vector<double> logits{0.3, -1.2, 1.5, 0.0};
  const auto p = softmax_values(logits);
  std::vector<double> count(4, 0);
  Rng rng(12);
  const int n = 10000;
  for (int i = 0; i < n; ++i) count[sample_action(logits, rng)] += 1;
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(count[k] / n, p[k], 0.02) << k;
}

TEST(Agent, SampledFirstStepOfRolloutFollowsSoftmax) {
  const World w = tiny_world(9, 3);
  const AgentModel m = small_agent(w);
  const Environment env(w.graphs[0]);
  const auto& e = w.split.train_seen[0];
  const auto p = softmax_values(rollout(m, e, env, e.instructions, PolicyMode::Greedy).logits[0]);
  std::vector<double> count(p.size(), 0);
  Rng rng(13);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    count[rollout(m, e, env, e.instructions, PolicyMode::Sample, 1, &rng).actions[0]] += 1;
  }
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(count[k] / n, p[k], 0.02) << k;
}

TEST(Agent, ArgmaxPrefersLowestIndexOnTies) {
  EXPECT_EQ(argmax(std::vector<double>{1, 3, 3, 2}), 1u);
}

TEST(Agent, CheckpointRoundTripInfersDims) {
  const World w = tiny_world(6, 3);
  for (auto kind : {EncoderKind::Scratch, EncoderKind::Causal, EncoderKind::Masked}) {
    const AgentModel m = small_agent(w, 4, kind);
    const Checkpoint c = m.to_checkpoint();
    const AgentModel back = AgentModel::from_checkpoint(c);
    EXPECT_EQ(back.dims(), m.dims());
    EXPECT_EQ(back.lm().kind(), kind);
    EXPECT_EQ(encode_checkpoint(back.to_checkpoint()), encode_checkpoint(c));
  }
}

TEST(Agent, SettingNames) {
  EXPECT_EQ(parse_setting("S"), Setting::S);
  EXPECT_EQ(parse_setting("M"), Setting::M);
  EXPECT_THROW(parse_setting("X"), ConfigError);
}
