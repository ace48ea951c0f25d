// vlnlab: world generation, LM pretraining, agent training, evaluation,
// ablation grids and corpus statistics. See README.md for usage.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vln/ablation.hpp"
#include "vln/checkpoint.hpp"
#include "vln/errors.hpp"
#include "vln/evaluation.hpp"
#include "vln/experiment.hpp"
#include "vln/instructions.hpp"
#include "vln/training.hpp"

namespace fs = std::filesystem;
using namespace vln;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out;
  std::string preset = "paper";
};

// Flags that override config values; unset optionals leave the config alone.
struct Overrides {
  std::optional<std::string> encoder;
  std::optional<std::string> strategy;
  std::optional<double> epsilon;
  std::optional<std::string> setting;
  std::optional<std::size_t> stage1_epochs;
  std::optional<std::size_t> stage2_epochs;
  std::optional<double> lr;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> pretrain_epochs;
  std::vector<std::string> encoders;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  bool include_test = false;
};

ExperimentConfig resolve(const Common& c, const Overrides& o) {
  ExperimentConfig cfg;
  if (c.preset == "desk") {
    cfg = desk_config();
  } else if (c.preset != "paper") {
    throw ConfigError("unknown preset '" + c.preset + "' (expected paper or desk)");
  }
  if (!c.config_path.empty()) cfg = config_from_json(read_file(c.config_path), cfg);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (o.encoder) cfg.encoder = parse_encoder(*o.encoder);
  if (o.strategy) cfg.strategy.kind = parse_strategy(*o.strategy);
  if (o.epsilon) cfg.strategy.epsilon = *o.epsilon;
  if (o.setting) cfg.eval.setting = parse_setting(*o.setting);
  if (o.stage1_epochs) cfg.train.stage1_epochs = *o.stage1_epochs;
  if (o.stage2_epochs) cfg.train.stage2_epochs = *o.stage2_epochs;
  if (o.lr) {
    const double ratio = cfg.train.lr_lm_finetune / cfg.train.lr_main;
    cfg.train.lr_main = *o.lr;
    cfg.train.lr_lm_finetune = *o.lr * ratio;
  }
  if (o.workers) {
    cfg.eval.workers = *o.workers;
    cfg.train.eval_workers = *o.workers;
  }
  if (o.pretrain_epochs) cfg.pretrain.epochs = *o.pretrain_epochs;
  if (!o.encoders.empty()) {
    cfg.ablate.encoders.clear();
    for (const auto& e : o.encoders) cfg.ablate.encoders.push_back(parse_encoder(e));
  }
  if (!o.strategies.empty()) {
    cfg.ablate.strategies.clear();
    for (const auto& s : o.strategies) cfg.ablate.strategies.push_back(parse_strategy(s));
  }
  if (!o.seeds.empty()) cfg.ablate.seeds = o.seeds;
  if (o.include_test) cfg.eval.include_test = true;
  // Round-trip through JSON so flag values get the same validation as files.
  return config_from_json(config_to_json(cfg), ExperimentConfig{});
}

fs::path out_path(const ExperimentConfig& cfg, const std::string& rel) {
  return fs::path(cfg.out_dir) / rel;
}

void save_config(const ExperimentConfig& cfg, const std::string& command) {
  write_file(out_path(cfg, "config.json").string(), config_to_json(cfg));
  write_file(out_path(cfg, "logs/" + command + ".config.json").string(), config_to_json(cfg));
}

World load_world_arg(const ExperimentConfig& cfg, const std::string& world_arg) {
  const std::string path = world_arg.empty() ? out_path(cfg, "world.json").string() : world_arg;
  return load_world(path);
}

std::string overlap_table(const World& w) {
  const auto train = split_corpus(w.split.train_seen);
  std::string out = "n-gram overlap with train_seen (% of distinct n-grams)\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-3s %10s %12s %12s\n", "n", "val_seen", "val_unseen",
                "test_unseen");
  out += buf;
  for (std::size_t n = 1; n <= 4; ++n) {
    double v[3];
    int k = 0;
    for (SplitName s : {SplitName::ValSeen, SplitName::ValUnseen, SplitName::TestUnseen}) {
      const auto corpus = split_corpus(split_episodes(w.split, s));
      v[k++] = corpus.empty() ? 0.0 : ngram_overlap(train, corpus, n);
    }
    std::snprintf(buf, sizeof buf, "%-3zu %10.1f %12.1f %12.1f\n", n, v[0], v[1], v[2]);
    out += buf;
  }
  return out;
}

std::string split_sizes(const World& w) {
  std::string out;
  char buf[96];
  for (SplitName s : {SplitName::TrainSeen, SplitName::ValSeen, SplitName::ValUnseen,
                      SplitName::TestUnseen}) {
    std::snprintf(buf, sizeof buf, "%-12s %4zu episodes\n", std::string(split_name(s)).c_str(),
                  split_episodes(w.split, s).size());
    out += buf;
  }
  return out;
}

int cmd_genworld(const ExperimentConfig& cfg) {
  save_config(cfg, "genworld");
  const World w = generate_world(cfg.seed, cfg.world);
  save_world(out_path(cfg, "world.json").string(), w);
  write_file(out_path(cfg, "corpus.jsonl").string(), corpus_jsonl(w));
  write_file(out_path(cfg, "vocab.txt").string(), vocabulary_lines(w.vocab));
  const std::string text = split_sizes(w) + "vocabulary   " + std::to_string(w.vocab.size()) +
                           " tokens\n\n" + overlap_table(w);
  write_file(out_path(cfg, "reports/genworld.txt").string(), text);
  std::cout << text;
  return 0;
}

int cmd_stats(const ExperimentConfig& cfg, const std::string& world_arg) {
  save_config(cfg, "stats");
  const World w = load_world_arg(cfg, world_arg);
  std::string text = split_sizes(w);
  char buf[128];
  for (SplitName s : {SplitName::TrainSeen, SplitName::ValSeen, SplitName::ValUnseen,
                      SplitName::TestUnseen}) {
    const auto corpus = split_corpus(split_episodes(w.split, s));
    std::size_t total = 0, lo = SIZE_MAX, hi = 0, unk = 0;
    for (const auto& t : corpus) {
      total += t.tokens.size();
      lo = std::min(lo, t.tokens.size());
      hi = std::max(hi, t.tokens.size());
      for (TokenId id : t.tokens) unk += id == Vocabulary::kUnk;
    }
    const double n = corpus.empty() ? 1.0 : static_cast<double>(corpus.size());
    std::snprintf(buf, sizeof buf, "%-12s tokens/instruction mean %.1f min %zu max %zu, unknown %zu\n",
                  std::string(split_name(s)).c_str(), static_cast<double>(total) / n,
                  corpus.empty() ? 0 : lo, hi, unk);
    text += buf;
  }
  text += "\n" + overlap_table(w);
  write_file(out_path(cfg, "reports/stats.txt").string(), text);
  std::cout << text;
  return 0;
}

int cmd_pretrain(const ExperimentConfig& cfg, const std::string& world_arg) {
  if (cfg.encoder == EncoderKind::Scratch) {
    throw UsageError("the scratch encoder has nothing to pretrain (use --encoder causal|masked)");
  }
  save_config(cfg, "pretrain");
  const World w = load_world_arg(cfg, world_arg);
  const auto corpus = split_corpus(w.split.train_seen);
  const std::string kind(encoder_name(cfg.encoder));
  PretrainResult r = pretrain(corpus, cfg.encoder, w.vocab.size(), cfg.pretrain,
                              run_seeds(cfg.seed).pretrain);
  save_checkpoint(out_path(cfg, "checkpoints/lm-" + kind + ".ckpt").string(), r.model.to_checkpoint());
  std::string log;
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
    nlohmann::ordered_json j{{"epoch", e + 1}, {"loss", r.epoch_loss[e]}, {"perplexity", r.perplexity[e]}};
    log += j.dump() + "\n";
    std::cout << "epoch " << e + 1 << " perplexity " << r.perplexity[e] << "\n";
  }
  write_file(out_path(cfg, "logs/pretrain-" + kind + ".jsonl").string(), log);
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& world_arg, const std::string& lm_arg,
              const std::string& resume_arg) {
  save_config(cfg, "train");
  const World w = load_world_arg(cfg, world_arg);
  const Environments envs = make_environments(w);
  std::optional<LMModel> lm;
  if (cfg.encoder != EncoderKind::Scratch) {
    const std::string path = lm_arg.empty()
        ? out_path(cfg, "checkpoints/lm-" + std::string(encoder_name(cfg.encoder)) + ".ckpt").string()
        : lm_arg;
    lm = LMModel::from_checkpoint(load_checkpoint(path));
  }
  const RunSeeds rs = run_seeds(cfg.seed);
  AgentModel model = make_agent(w, cfg.encoder, lm ? &*lm : nullptr, cfg.agent, rs.init);
  StrategyConfig sc = cfg.strategy;
  sc.rng_seed = rs.train;
  TrainConfig tc = cfg.train;
  tc.eval_setting = cfg.eval.setting;

  std::optional<Checkpoint> resume;
  if (!resume_arg.empty()) resume = load_checkpoint(resume_arg);
  const std::string log_path = out_path(cfg, resume ? "logs/train-resumed.jsonl" : "logs/train.jsonl").string();
  std::string log;
  TrainHooks hooks;
  hooks.on_epoch = [&](const TrainLogRow& row) {
    log += log_row_json(row) + "\n";
    write_file(log_path, log);
    std::cerr << "epoch " << row.epoch << " stage " << row.stage << " loss " << row.train_loss << "\n";
  };
  hooks.on_stage_end = [&](int stage, const Checkpoint& ckpt) {
    save_checkpoint(out_path(cfg, "checkpoints/stage" + std::to_string(stage) + ".ckpt").string(), ckpt);
  };
  train(model, w, envs, sc, tc, hooks, resume ? &*resume : nullptr);
  write_file(log_path, log);
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& world_arg, const std::string& ckpt_arg,
             std::vector<std::string> splits, const std::vector<std::string>& settings) {
  save_config(cfg, "eval");
  const World w = load_world_arg(cfg, world_arg);
  const Environments envs = make_environments(w);
  const std::string path = ckpt_arg.empty() ? out_path(cfg, "checkpoints/stage2.ckpt").string() : ckpt_arg;
  if (!fs::exists(path)) throw IoError("checkpoint '" + path + "' does not exist");
  const AgentModel model = AgentModel::from_checkpoint(load_checkpoint(path));
  if (splits.empty()) {
    splits = {"val_seen", "val_unseen"};
    if (cfg.eval.include_test) splits.push_back("test_unseen");
  }
  std::vector<Setting> modes;
  if (settings.empty()) {
    modes.push_back(cfg.eval.setting);
  } else {
    for (const auto& s : settings) modes.push_back(parse_setting(s));
  }
  EvalOptions eo;
  eo.max_steps = cfg.train.max_steps;
  eo.workers = cfg.eval.workers;
  std::vector<SplitReport> reports;
  for (Setting mode : modes) {
    for (const auto& name : splits) {
      const SplitName s = parse_split(name);
      if (s == SplitName::TestUnseen && !cfg.eval.include_test) {
        throw UsageError("test_unseen is evaluated only with --include-test");
      }
      const Evaluation ev = evaluate(model, envs, split_episodes(w.split, s), mode, name, eo);
      const std::string tag = name + "-" + std::string(setting_name(mode));
      write_file(out_path(cfg, "reports/" + tag + ".json").string(), report_json(ev.report) + "\n");
      write_file(out_path(cfg, "logs/trajectories-" + tag + ".jsonl").string(), trajectory_log(ev));
      reports.push_back(ev.report);
    }
  }
  const std::string table = format_reports(reports);
  write_file(out_path(cfg, "reports/eval.txt").string(), table);
  std::cout << table;
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, const std::string& world_arg) {
  save_config(cfg, "ablate");
  const World w = load_world_arg(cfg, world_arg);
  AblationSpec spec;
  spec.encoders = cfg.ablate.encoders;
  for (StrategyKind k : cfg.ablate.strategies) {
    StrategyConfig sc = cfg.strategy;
    sc.kind = k;
    spec.strategies.push_back(sc);
  }
  spec.seeds = cfg.ablate.seeds;
  spec.train = cfg.train;
  spec.pretrain = cfg.pretrain;
  spec.agent = cfg.agent;
  spec.setting = cfg.eval.setting;
  spec.include_test = cfg.eval.include_test;
  spec.cache_dir = out_path(cfg, "ablation").string();
  spec.progress = [](const std::string& msg) { std::cerr << msg << "\n"; };
  const AblationTable table = ablation_grid(w, spec);
  const std::string text = format_ablation(table);
  write_file(out_path(cfg, "reports/ablation.txt").string(), text);
  write_file(out_path(cfg, "reports/ablation.json").string(), ablation_json(table));
  std::cout << text;
  return 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Root seed");
  app->add_option("--config", c.config_path, "JSON config file (flags win over file values)");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--preset", c.preset, "Base settings: paper (default) or desk");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction-following navigation lab"};
  app.require_subcommand(1);
  Common common;
  Overrides ov;
  std::string world_arg, lm_arg, resume_arg, ckpt_arg;
  std::vector<std::string> splits, settings;

  auto* gen = app.add_subcommand("genworld", "Generate a world, its corpus and vocabulary");
  auto* pre = app.add_subcommand("pretrain", "Pretrain a causal or masked language model");
  auto* trn = app.add_subcommand("train", "Train an agent (both stages)");
  auto* evl = app.add_subcommand("eval", "Evaluate an agent checkpoint");
  auto* abl = app.add_subcommand("ablate", "Run the encoder x strategy x seed grid");
  auto* sts = app.add_subcommand("stats", "Corpus statistics and n-gram overlap");
  for (auto* sub : {gen, pre, trn, evl, abl, sts}) add_common(sub, common);
  for (auto* sub : {pre, trn, evl, abl, sts}) sub->add_option("--world", world_arg, "World file");

  pre->add_option("--encoder,--kind", ov.encoder, "causal or masked");
  pre->add_option("--epochs", ov.pretrain_epochs, "Pretraining epochs");

  trn->add_option("--encoder", ov.encoder, "scratch, causal or masked");
  trn->add_option("--lm", lm_arg, "Pretrained LM checkpoint");
  trn->add_option("--strategy", ov.strategy, "TF, SF or SS");
  trn->add_option("--epsilon", ov.epsilon, "SS teacher probability in [0, 1]");
  trn->add_option("--stage1-epochs", ov.stage1_epochs);
  trn->add_option("--stage2-epochs", ov.stage2_epochs);
  trn->add_option("--lr", ov.lr, "Main learning rate (LM rate keeps its ratio)");
  trn->add_option("--resume", resume_arg, "Stage checkpoint to continue from");
  trn->add_option("--setting", ov.setting, "Validation setting, S or M");
  trn->add_option("--workers", ov.workers, "Validation rollout threads");

  evl->add_option("--checkpoint", ckpt_arg, "Agent checkpoint (default <out>/checkpoints/stage2.ckpt)");
  evl->add_option("--split", splits, "Split to evaluate (repeatable)");
  evl->add_option("--setting", settings, "S or M (repeatable)");
  evl->add_flag("--include-test", ov.include_test, "Allow evaluation on test_unseen");
  evl->add_option("--workers", ov.workers, "Rollout threads");

  abl->add_option("--encoders", ov.encoders, "Encoder axis");
  abl->add_option("--strategies", ov.strategies, "Strategy axis");
  abl->add_option("--seeds", ov.seeds, "Seed axis");
  abl->add_option("--epsilon", ov.epsilon, "SS teacher probability");
  abl->add_option("--setting", ov.setting, "Evaluation setting, S or M");
  abl->add_option("--stage1-epochs", ov.stage1_epochs);
  abl->add_option("--stage2-epochs", ov.stage2_epochs);
  abl->add_flag("--include-test", ov.include_test, "Also report test_unseen");
  abl->add_option("--workers", ov.workers, "Evaluation threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code_for(Error::Category::Usage);
  }

  try {
    const ExperimentConfig cfg = resolve(common, ov);
    if (*gen) return cmd_genworld(cfg);
    if (*sts) return cmd_stats(cfg, world_arg);
    if (*pre) return cmd_pretrain(cfg, world_arg);
    if (*trn) return cmd_train(cfg, world_arg, lm_arg, resume_arg);
    if (*evl) return cmd_eval(cfg, world_arg, ckpt_arg, splits, settings);
    if (*abl) return cmd_ablate(cfg, world_arg);
  } catch (const Error& e) {
    std::cerr << "vlnlab: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "vlnlab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
