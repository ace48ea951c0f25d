#include "vln/experiment.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "vln/errors.hpp"

namespace vln {
namespace {

using ojson = nlohmann::ordered_json;

ojson world_json(const WorldConfig& c) {
  return ojson{{"num_graphs", c.num_graphs},
               {"nodes_per_graph", c.nodes_per_graph},
               {"feature_dim", c.feature_dim},
               {"landmark_vocab_size", c.landmark_vocab_size},
               {"split_ratios",
                {{"seen", c.split_ratios.seen},
                 {"val_unseen", c.split_ratios.val_unseen},
                 {"test_unseen", c.split_ratios.test_unseen}}},
               {"episodes_per_graph", c.episodes_per_graph},
               {"val_seen_fraction", c.val_seen_fraction},
               {"max_degree", c.max_degree},
               {"min_path_nodes", c.min_path_nodes},
               {"max_path_nodes", c.max_path_nodes},
               {"spacing", c.spacing}};
}

ojson grammar_json(const WorldConfig& c) {
  return ojson{{"instructions_per_episode", c.instructions_per_episode},
               {"rare_rate_seen", c.rare_rate_seen},
               {"rare_rate_unseen", c.rare_rate_unseen},
               {"max_instruction_tokens", c.max_instruction_tokens},
               {"max_len", c.max_len}};
}

ojson train_json(const TrainConfig& c) {
  return ojson{{"stage1_epochs", c.stage1_epochs},
               {"stage2_epochs", c.stage2_epochs},
               {"batch_stage1", c.batch_stage1},
               {"batch_stage2", c.batch_stage2},
               {"lr_main", c.lr_main},
               {"lr_lm_finetune", c.lr_lm_finetune},
               {"clip_norm", c.clip_norm},
               {"max_steps", c.max_steps},
               {"setting", std::string(setting_name(c.setting))},
               {"eval_setting", std::string(setting_name(c.eval_setting))},
               {"eval_every", c.eval_every},
               {"eval_workers", c.eval_workers}};
}

ojson pretrain_json(const PretrainConfig& c) {
  return ojson{{"epochs", c.epochs},         {"lr", c.lr},
               {"batch", c.batch},           {"mask_rate", c.mask_rate},
               {"unk_rate", c.unk_rate},     {"embed_dim", c.embed_dim},
               {"clip_norm", c.clip_norm}};
}

// Reads known keys of one JSON object and rejects the rest.
class Section {
 public:
  Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + path(key) + "'");
    }
  }
  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("bad value for '" + path(key) + "'");
    }
  }
  template <typename F>
  void with(const char* key, F&& f) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    Section child(j_.at(key), path(key));
    f(child);
    child.finish();
  }
  template <typename F>
  void text(const char* key, F&& f) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_string()) throw ConfigError("'" + path(key) + "' must be a string");
    f(j_.at(key).get<std::string>());
  }
  const nlohmann::json* raw(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
  const nlohmann::json& j_;
  std::string name_;
  std::set<std::string> used_;
};

void validate(const ExperimentConfig& c) {
  c.strategy.validate();
  c.train.validate();
  if (c.pretrain.epochs == 0 || c.pretrain.batch == 0 || !(c.pretrain.lr > 0.0) ||
      !(c.pretrain.mask_rate > 0.0 && c.pretrain.mask_rate <= 1.0) ||
      !(c.pretrain.unk_rate >= 0.0 && c.pretrain.unk_rate < 1.0) || c.pretrain.embed_dim == 0) {
    throw ConfigError("invalid pretrain section");
  }
  if (c.agent.hidden == 0 || c.agent.text_hidden == 0 || c.agent.attn_dim == 0) {
    throw ConfigError("agent dimensions must be positive");
  }
  if (c.eval.workers == 0) throw ConfigError("eval.workers must be positive");
  if (c.ablate.encoders.empty() || c.ablate.strategies.empty() || c.ablate.seeds.empty()) {
    throw ConfigError("ablation axes must be non-empty");
  }
}

}  // namespace

ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.train.lr_main = 3e-3;
  c.train.lr_lm_finetune = 1.5e-3;
  c.train.stage1_epochs = 20;
  c.train.stage2_epochs = 10;
  c.train.eval_every = 0;
  c.strategy.kind = StrategyKind::SS;
  c.strategy.epsilon = 0.75;
  c.pretrain.epochs = 20;
  c.pretrain.lr = 3e-3;
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["seed"] = c.seed;
  j["world"] = world_json(c.world);
  j["grammar"] = grammar_json(c.world);
  j["encoder"] = std::string(encoder_name(c.encoder));
  j["strategy"] = {{"kind", std::string(strategy_name(c.strategy.kind))},
                   {"epsilon", c.strategy.epsilon}};
  j["train"] = train_json(c.train);
  j["pretrain"] = pretrain_json(c.pretrain);
  j["agent"] = {{"text_hidden", c.agent.text_hidden},
                {"hidden", c.agent.hidden},
                {"attn_dim", c.agent.attn_dim}};
  j["eval"] = {{"setting", std::string(setting_name(c.eval.setting))},
               {"workers", c.eval.workers},
               {"include_test", c.eval.include_test}};
  ojson enc = ojson::array();
  for (EncoderKind k : c.ablate.encoders) enc.push_back(std::string(encoder_name(k)));
  ojson str = ojson::array();
  for (StrategyKind k : c.ablate.strategies) str.push_back(std::string(strategy_name(k)));
  j["ablate"] = {{"encoders", enc}, {"strategies", str}, {"seeds", c.ablate.seeds}};
  j["out"] = c.out_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(std::string_view text, const ExperimentConfig& base) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c = base;
  {
    Section root(doc, "");
    root.get("seed", c.seed);
    root.with("world", [&](Section& s) {
      WorldConfig& w = c.world;
      s.get("num_graphs", w.num_graphs);
      s.get("nodes_per_graph", w.nodes_per_graph);
      s.get("feature_dim", w.feature_dim);
      s.get("landmark_vocab_size", w.landmark_vocab_size);
      s.with("split_ratios", [&](Section& r) {
        r.get("seen", w.split_ratios.seen);
        r.get("val_unseen", w.split_ratios.val_unseen);
        r.get("test_unseen", w.split_ratios.test_unseen);
      });
      s.get("episodes_per_graph", w.episodes_per_graph);
      s.get("val_seen_fraction", w.val_seen_fraction);
      s.get("max_degree", w.max_degree);
      s.get("min_path_nodes", w.min_path_nodes);
      s.get("max_path_nodes", w.max_path_nodes);
      s.get("spacing", w.spacing);
    });
    root.with("grammar", [&](Section& s) {
      s.get("instructions_per_episode", c.world.instructions_per_episode);
      s.get("rare_rate_seen", c.world.rare_rate_seen);
      s.get("rare_rate_unseen", c.world.rare_rate_unseen);
      s.get("max_instruction_tokens", c.world.max_instruction_tokens);
      s.get("max_len", c.world.max_len);
    });
    root.text("encoder", [&](const std::string& v) { c.encoder = parse_encoder(v); });
    root.with("strategy", [&](Section& s) {
      s.text("kind", [&](const std::string& v) { c.strategy.kind = parse_strategy(v); });
      s.get("epsilon", c.strategy.epsilon);
    });
    root.with("train", [&](Section& s) {
      TrainConfig& t = c.train;
      s.get("stage1_epochs", t.stage1_epochs);
      s.get("stage2_epochs", t.stage2_epochs);
      s.get("batch_stage1", t.batch_stage1);
      s.get("batch_stage2", t.batch_stage2);
      s.get("lr_main", t.lr_main);
      s.get("lr_lm_finetune", t.lr_lm_finetune);
      s.get("clip_norm", t.clip_norm);
      s.get("max_steps", t.max_steps);
      s.text("setting", [&](const std::string& v) { t.setting = parse_setting(v); });
      s.text("eval_setting", [&](const std::string& v) { t.eval_setting = parse_setting(v); });
      s.get("eval_every", t.eval_every);
      s.get("eval_workers", t.eval_workers);
    });
    root.with("pretrain", [&](Section& s) {
      PretrainConfig& p = c.pretrain;
      s.get("epochs", p.epochs);
      s.get("lr", p.lr);
      s.get("batch", p.batch);
      s.get("mask_rate", p.mask_rate);
      s.get("unk_rate", p.unk_rate);
      s.get("embed_dim", p.embed_dim);
      s.get("clip_norm", p.clip_norm);
    });
    root.with("agent", [&](Section& s) {
      s.get("text_hidden", c.agent.text_hidden);
      s.get("hidden", c.agent.hidden);
      s.get("attn_dim", c.agent.attn_dim);
    });
    root.with("eval", [&](Section& s) {
      s.text("setting", [&](const std::string& v) { c.eval.setting = parse_setting(v); });
      s.get("workers", c.eval.workers);
      s.get("include_test", c.eval.include_test);
    });
    root.with("ablate", [&](Section& s) {
      if (const auto* e = s.raw("encoders")) {
        if (!e->is_array()) throw ConfigError("'ablate.encoders' must be an array");
        c.ablate.encoders.clear();
        for (const auto& v : *e) {
          if (!v.is_string()) throw ConfigError("'ablate.encoders' entries must be strings");
          c.ablate.encoders.push_back(parse_encoder(v.get<std::string>()));
        }
      }
      if (const auto* e = s.raw("strategies")) {
        if (!e->is_array()) throw ConfigError("'ablate.strategies' must be an array");
        c.ablate.strategies.clear();
        for (const auto& v : *e) {
          if (!v.is_string()) throw ConfigError("'ablate.strategies' entries must be strings");
          c.ablate.strategies.push_back(parse_strategy(v.get<std::string>()));
        }
      }
      s.get("seeds", c.ablate.seeds);
    });
    root.get("out", c.out_dir);
    root.finish();
  }
  validate(c);
  return c;
}

RunSeeds run_seeds(std::uint64_t seed) {
  return {derive_seed(seed, "init"), derive_seed(seed, "pretrain"), derive_seed(seed, "train")};
}

AgentModel make_agent(const World& world, EncoderKind kind, const LMModel* lm,
                      const AgentDims& dims, std::uint64_t init_seed) {
  const std::size_t feature_dim = world.config.feature_dim;
  if (kind == EncoderKind::Scratch) {
    const std::size_t d = lm != nullptr ? lm->embed_dim() : PretrainConfig{}.embed_dim;
    LMModel table(EncoderKind::Scratch, world.vocab.size(), d, derive_seed(init_seed, "embedding"));
    return AgentModel(std::move(table), feature_dim, dims, init_seed);
  }
  if (lm == nullptr || lm->kind() != kind) {
    throw UsageError("encoder '" + std::string(encoder_name(kind)) +
                     "' needs a pretrained language model of the same kind");
  }
  if (lm->vocab_size() != world.vocab.size()) {
    throw ConfigError("language model vocabulary (" + std::to_string(lm->vocab_size()) +
                      ") does not match the world (" + std::to_string(world.vocab.size()) + ")");
  }
  LMModel copy = *lm;
  copy.detach_head();
  return AgentModel(std::move(copy), feature_dim, dims, init_seed);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string world_config_json(const WorldConfig& c) {
  ojson j = world_json(c);
  j["grammar"] = grammar_json(c);
  return j.dump();
}
std::string train_config_json(const TrainConfig& c) { return train_json(c).dump(); }
std::string pretrain_config_json(const PretrainConfig& c) { return pretrain_json(c).dump(); }

}  // namespace vln
