#include "vln/training.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "vln/errors.hpp"

namespace vln {

std::string_view strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::TF: return "TF";
    case StrategyKind::SF: return "SF";
    case StrategyKind::SS: return "SS";
  }
  return "unknown";
}

StrategyKind parse_strategy(std::string_view s) {
  for (StrategyKind k : {StrategyKind::TF, StrategyKind::SF, StrategyKind::SS}) {
    if (strategy_name(k) == s) return k;
  }
  throw ConfigError("unknown strategy '" + std::string(s) + "' (expected TF, SF or SS)");
}

double StrategyConfig::effective_epsilon() const {
  switch (kind) {
    case StrategyKind::TF: return 1.0;
    case StrategyKind::SF: return 0.0;
    case StrategyKind::SS: return epsilon;
  }
  return epsilon;
}

void StrategyConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ConfigError("epsilon must lie in [0, 1], got " + std::to_string(epsilon));
  }
}

std::size_t choose_transition_action(std::size_t teacher, std::size_t sampled, double epsilon,
                                     Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ConfigError("epsilon must lie in [0, 1], got " + std::to_string(epsilon));
  }
  return uniform01(rng) < epsilon ? teacher : sampled;
}

EpisodeLoss episode_loss(const BoundAgent& agent, const EpisodeSpec& episode,
                         std::span<const TokenSeq> instructions, const Environment& env,
                         const StrategyConfig& strategy, Rng& rng, std::size_t max_steps) {
  const double eps = strategy.effective_epsilon();
  AgentState state = initial_state(agent, instructions);
  EpisodeLoss out;
  out.rollin.path_id = episode.path_id;
  NodeId node = episode.start;
  out.rollin.nodes.push_back(node);
  std::vector<Var> terms;
  while (true) {
    if (state.t >= max_steps) {
      out.rollin.truncated = true;
      break;
    }
    const Observation& obs = env.observation(node);
    StepOutput step = decode_step(agent, state, obs, max_steps);
    const std::size_t teacher = env.expert_action(node, episode.goal);
    Var term = cross_entropy(step.logits, teacher);
    terms.push_back(term);
    out.step_losses.push_back(term.item());
    auto logits = step.logits.value();
    const std::size_t sampled = sample_action(logits, rng);
    const std::size_t action = choose_transition_action(teacher, sampled, eps, rng);
    out.rollin.actions.push_back(action);
    out.rollin.logits.emplace_back(logits.begin(), logits.end());
    out.rollin.alpha.push_back(std::move(step.alpha));
    out.rollin.gamma.push_back(std::move(step.gamma));
    if (action == obs.stop_index()) break;
    node = obs.candidates[action].neighbor;
    out.rollin.nodes.push_back(node);
    state = std::move(step.next);
    advance(state, obs, action);
  }
  Var total = terms.size() == 1 ? terms[0] : sum(concat(terms));
  out.loss = scale(total, 1.0 / static_cast<double>(terms.size()));
  return out;
}

double parameter_learning_rate(const Parameter& p, const LMModel& lm, const LrMap& lrs) {
  return p.partition == Partition::Embedding ? lm.learning_rate() : lrs.main;
}

void TrainConfig::validate() const {
  if (batch_stage1 == 0 || batch_stage2 == 0) throw ConfigError("batch sizes must be positive");
  if (!(lr_main > 0.0) || !(lr_lm_finetune > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(lr_lm_finetune < lr_main)) {
    throw ConfigError("the fine-tuning learning rate must be smaller than the main rate");
  }
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (max_steps == 0) throw ConfigError("max_steps must be positive");
  if (eval_workers == 0) throw ConfigError("eval_workers must be positive");
}

std::string log_row_json(const TrainLogRow& row) {
  nlohmann::ordered_json j;
  j["epoch"] = row.epoch;
  j["stage"] = row.stage;
  j["strategy"] = row.strategy;
  j["epsilon"] = row.epsilon;
  j["train_loss"] = row.train_loss;
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["val_seen_sr"] = opt(row.val_seen_sr);
  j["val_seen_spl"] = opt(row.val_seen_spl);
  j["val_unseen_sr"] = opt(row.val_unseen_sr);
  j["val_unseen_spl"] = opt(row.val_unseen_spl);
  return j.dump();
}

namespace {

struct Example {
  std::size_t episode;
  std::size_t instruction;  // SIZE_MAX: all instructions
};

constexpr std::size_t kAll = static_cast<std::size_t>(-1);

std::vector<Example> make_examples(const std::vector<EpisodeSpec>& eps, Setting setting) {
  std::vector<Example> out;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    if (setting == Setting::M) {
      out.push_back({e, kAll});
    } else {
      for (std::size_t i = 0; i < eps[e].instructions.size(); ++i) out.push_back({e, i});
    }
  }
  return out;
}

Checkpoint stage_checkpoint(const AgentModel& model, const Adamax& opt, int stages_done) {
  Checkpoint ckpt = model.to_checkpoint();
  opt.save(ckpt);
  ckpt.add("train.stages_done", Tensor::scalar(static_cast<double>(stages_done)));
  return ckpt;
}

}  // namespace

TrainResult train(AgentModel& model, const World& world, const Environments& envs,
                  const StrategyConfig& strategy, const TrainConfig& config,
                  const TrainHooks& hooks, const Checkpoint* resume) {
  strategy.validate();
  config.validate();
  const auto& episodes = world.split.train_seen;
  if (episodes.empty()) throw TrainingError("the training split is empty");
  const std::vector<Example> examples = make_examples(episodes, config.setting);
  const LrMap lrs = config.lr_map();

  Adamax opt;
  int stages_done = 0;
  if (resume != nullptr) {
    model.load_values(*resume);
    opt.load(*resume);
    stages_done = static_cast<int>(resume->at("train.stages_done").data.at(0));
  }

  TrainResult result;
  std::vector<Parameter*> params = model.parameters();
  const std::size_t stage_epochs[2] = {config.stage1_epochs, config.stage2_epochs};
  const std::size_t batch_sizes[2] = {config.batch_stage1, config.batch_stage2};
  std::size_t epoch_counter = 0;
  for (int s = 0; s < stages_done && s < 2; ++s) epoch_counter += stage_epochs[s];

  for (int stage = stages_done + 1; stage <= 2; ++stage) {
    set_stage(model.lm(), stage == 1 ? Stage::Embedding : Stage::Finetune, lrs);
    const LMModel& lm = model.lm();
    const auto lr_of = [&](const Parameter& p) { return parameter_learning_rate(p, lm, lrs); };
    const std::size_t epochs = stage_epochs[stage - 1];
    const std::size_t batch = batch_sizes[stage - 1];
    for (std::size_t e = 0; e < epochs; ++e) {
      ++epoch_counter;
      Rng rng = make_rng(strategy.rng_seed, "train", static_cast<std::uint64_t>(stage) * 1000000 + e);
      const std::vector<std::size_t> order = permutation(examples.size(), rng);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        const double inv = 1.0 / static_cast<double>(end - start);
        for (std::size_t k = start; k < end; ++k) {
          const Example& ex = examples[order[k]];
          const EpisodeSpec& ep = episodes[ex.episode];
          std::span<const TokenSeq> instr(ep.instructions);
          if (ex.instruction != kAll) instr = instr.subspan(ex.instruction, 1);
          Tape tape;
          BoundAgent agent(model, tape);
          EpisodeLoss el = episode_loss(agent, ep, instr, envs.at(ep.graph_id), strategy, rng,
                                        config.max_steps);
          const double v = el.loss.item();
          if (!std::isfinite(v)) {
            throw NumericAbort("non-finite loss on episode " + ep.path_id + " (epoch " +
                               std::to_string(epoch_counter) + ", stage " +
                               std::to_string(stage) + ")");
          }
          loss_sum += v;
          tape.backward(scale(el.loss, inv));
        }
        clip_grad_norm(params, config.clip_norm);
        optimize_step(params, opt, lr_of);
      }

      TrainLogRow row;
      row.epoch = epoch_counter;
      row.stage = stage;
      row.strategy = std::string(strategy_name(strategy.kind));
      row.epsilon = strategy.effective_epsilon();
      row.train_loss = loss_sum / static_cast<double>(examples.size());
      const bool last = e + 1 == epochs;
      const bool due = config.eval_every > 0 && (e + 1) % config.eval_every == 0;
      if (last || due) {
        EvalOptions eo;
        eo.max_steps = config.max_steps;
        eo.workers = config.eval_workers;
        if (!world.split.val_seen.empty()) {
          auto r = evaluate(model, envs, world.split.val_seen, config.eval_setting, "val_seen", eo).report;
          row.val_seen_sr = r.sr;
          row.val_seen_spl = r.spl;
        }
        if (!world.split.val_unseen.empty()) {
          auto r = evaluate(model, envs, world.split.val_unseen, config.eval_setting, "val_unseen", eo).report;
          row.val_unseen_sr = r.sr;
          row.val_unseen_spl = r.spl;
        }
      }
      if (hooks.on_epoch) hooks.on_epoch(row);
      result.log.push_back(std::move(row));
    }
    Checkpoint ckpt = stage_checkpoint(model, opt, stage);
    if (hooks.on_stage_end) hooks.on_stage_end(stage, ckpt);
    result.final_checkpoint = std::move(ckpt);
  }
  if (result.final_checkpoint.records.empty()) {
    result.final_checkpoint = stage_checkpoint(model, opt, stages_done);
  }
  return result;
}

}  // namespace vln
