// Acceptance gate: one PASS/FAIL line per criterion. Usage:
//   vln_acceptance [--criteria 1,2,...] [--cache DIR]
// --cache keeps finished replication cells across runs; it is keyed on
// configuration only, so clear it after changing code.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "../replay_oracle.hpp"
#include "vln/ablation.hpp"
#include "vln/checkpoint.hpp"
#include "vln/evaluation.hpp"
#include "vln/experiment.hpp"
#include "vln/gradcheck.hpp"
#include "vln/rng.hpp"
#include "vln/training.hpp"

using namespace vln;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

WorldConfig one_graph(std::size_t nodes, std::size_t episodes, std::size_t min_path, std::size_t max_path) {
  WorldConfig c;
  c.num_graphs = 1;
  c.nodes_per_graph = nodes;
  c.split_ratios = {1.0, 0.0, 0.0};
  c.episodes_per_graph = episodes;
  c.val_seen_fraction = 0.0;
  c.min_path_nodes = min_path;
  c.max_path_nodes = max_path;
  return c;
}

// 1. Reverse-mode vs central differences for a full training step (both
// episodes of a 2-node world, SS roll-in) for every encoder kind, with the
// pretrained kinds in the fine-tuning stage so their weights are checked too.
Outcome gradient_fidelity() {
  const World w = generate_world(5, one_graph(2, 2, 2, 2));
  const Environments envs = make_environments(w);
  double worst = 0;
  std::size_t coords = 0;
  std::string detail;
  bool pass = true;
  for (EncoderKind kind : {EncoderKind::Scratch, EncoderKind::Causal, EncoderKind::Masked}) {
    LMModel lm(kind, w.vocab.size(), 16, 3);
    lm.detach_head();
    AgentModel m(std::move(lm), w.config.feature_dim, AgentDims{}, 4);
    set_stage(m.lm(), Stage::Finetune, LrMap{});
    std::map<Partition, std::vector<Tensor*>> parts;
    for (Parameter* p : m.parameters()) {
      p->value.requires_grad = true;
      parts[p->partition].push_back(&p->value);
    }
    StrategyConfig sc;
    sc.epsilon = 0.5;
    const auto loss = [&](Tape& t) {
      BoundAgent a(m, t);
      Rng rng(9);
      std::vector<Var> terms;
      for (const auto& e : w.split.train_seen) {
        for (std::size_t i = 0; i < e.instructions.size(); ++i) {
          std::span<const TokenSeq> one(&e.instructions[i], 1);
          terms.push_back(episode_loss(a, e, one, envs.at(e.graph_id), sc, rng).loss);
        }
      }
      return scale(sum(concat(terms)), 1.0 / static_cast<double>(terms.size()));
    };
    for (auto& [partition, tensors] : parts) {
      // At least 50 coordinates per partition, spread over its tensors.
      const std::size_t per = (50 + tensors.size() - 1) / tensors.size();
      const auto r = gradient_check_params(loss, tensors, per, 17, 1e-6, 1e-4);
      std::size_t total = 0;
      for (Tensor* t : tensors) total += t->size();
      const bool enough = r.coords_checked >= std::min<std::size_t>(50, total);
      pass = pass && r.passed && enough;
      worst = std::max(worst, r.max_rel_error);
      coords += r.coords_checked;
      if (!r.passed || !enough) {
        detail += std::string(" ") + std::string(encoder_name(kind)) + "/" +
                  std::string(partition_name(partition)) + " failed";
      }
    }
  }
  return {pass, std::to_string(coords) + " coords, max rel error " + fmt("%.2e", worst) + detail};
}

// 2. SS at the limits reproduces TF and SF byte for byte.
Outcome strategy_limits() {
  const World w = generate_world(6, one_graph(12, 8, 3, 5));
  const Environments envs = make_environments(w);
  TrainConfig tc;
  tc.stage1_epochs = 3;
  tc.stage2_epochs = 0;
  tc.batch_stage1 = 4;
  tc.lr_main = 5e-3;
  tc.lr_lm_finetune = 2.5e-3;
  tc.eval_every = 0;
  auto run = [&](StrategyKind k, double eps) {
    AgentModel m = make_agent(w, EncoderKind::Scratch, nullptr, AgentDims{}, 8);
    StrategyConfig sc;
    sc.kind = k;
    sc.epsilon = eps;
    sc.rng_seed = 77;
    return encode_checkpoint(train(m, w, envs, sc, tc).final_checkpoint);
  };
  const bool tf = run(StrategyKind::SS, 1.0) == run(StrategyKind::TF, 0.5);
  const bool sf = run(StrategyKind::SS, 0.0) == run(StrategyKind::SF, 0.5);
  const bool differs = run(StrategyKind::TF, 0.5) != run(StrategyKind::SF, 0.5);
  return {tf && sf && differs, std::string("SS(1)==TF ") + (tf ? "yes" : "no") + ", SS(0)==SF " +
                                   (sf ? "yes" : "no") + ", TF!=SF " + (differs ? "yes" : "no")};
}

// 3. SPL <= SR on random results, spl_term 1 on shortest paths, log replay.
Outcome metric_invariants() {
  const World w = generate_world(8, WorldConfig{});
  Rng rng(10);
  std::size_t violations = 0, shortest_ok = 0, shortest_total = 0;
  std::vector<EpisodeEval> all;
  std::vector<const EpisodeSpec*> eps;
  for (const auto* s : {&w.split.train_seen, &w.split.val_seen, &w.split.val_unseen, &w.split.test_unseen}) {
    for (const auto& e : *s) eps.push_back(&e);
  }
  for (int i = 0; i < 1000; ++i) {
    const EpisodeSpec& e = *eps[uniform_index(rng, eps.size())];
    const NavGraph& g = w.graph(e.graph_id);
    Trajectory t;
    t.nodes.push_back(e.start);
    if (i % 4 == 0) {
      t.nodes = e.expert_path;
    } else {
      const std::size_t len = uniform_index(rng, 10);
      for (std::size_t k = 0; k < len; ++k) {
        const auto& adj = g.adjacency[t.nodes.back()];
        t.nodes.push_back(adj[uniform_index(rng, adj.size())]);
      }
    }
    const EpisodeResult r = score_episode(t, e, g);
    if (r.spl_term > (r.success ? 1.0 : 0.0)) ++violations;
    if (t.nodes == shortest_path(g, e.start, e.goal).path) {
      ++shortest_total;
      shortest_ok += r.spl_term == 1.0;
    }
    EpisodeEval ev;
    ev.success = r.success;
    ev.spl = r.spl_term;
    all.push_back(ev);
  }
  // Split means over random subsets.
  for (int k = 0; k < 200; ++k) {
    std::vector<EpisodeEval> subset;
    const std::size_t n = 1 + uniform_index(rng, 50);
    for (std::size_t j = 0; j < n; ++j) subset.push_back(all[uniform_index(rng, all.size())]);
    const SplitReport rep = summarize(subset, Setting::S, "x");
    if (rep.spl > rep.sr) ++violations;
  }
  // Replay oracle on a briefly trained agent.
  const Environments envs = make_environments(w);
  AgentModel m = make_agent(w, EncoderKind::Scratch, nullptr, AgentDims{}, 3);
  TrainConfig tc = desk_config().train;
  tc.stage1_epochs = 2;
  tc.stage2_epochs = 0;
  StrategyConfig sc;
  sc.rng_seed = 5;
  train(m, w, envs, sc, tc);
  double replay_err = 0;
  for (Setting s : {Setting::S, Setting::M}) {
    for (SplitName split : {SplitName::ValSeen, SplitName::ValUnseen}) {
      const Evaluation ev = evaluate(m, envs, split_episodes(w.split, split), s, std::string(split_name(split)));
      const auto rep = oracle::replay(trajectory_log(ev), w);
      replay_err = std::max({replay_err, std::abs(rep.sr - ev.report.sr), std::abs(rep.spl - ev.report.spl),
                             std::abs(rep.tl - ev.report.tl), std::abs(rep.ne - ev.report.ne)});
    }
  }
  const bool pass = violations == 0 && shortest_total > 0 && shortest_ok == shortest_total && replay_err <= 1e-9;
  return {pass, std::to_string(violations) + " SPL>SR violations, spl_term=1 on " + std::to_string(shortest_ok) +
                    "/" + std::to_string(shortest_total) + " shortest paths, replay error " + fmt("%.1e", replay_err)};
}

// 4. Expert rollouts score 100/100 on every split of several worlds.
Outcome expert_closure() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::size_t splits = 0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const World w = generate_world(seed, WorldConfig{});
    const Environments envs = make_environments(w);
    for (SplitName s : {SplitName::TrainSeen, SplitName::ValSeen, SplitName::ValUnseen, SplitName::TestUnseen}) {
      std::vector<EpisodeEval> evals;
      for (const auto& e : split_episodes(w.split, s)) {
        const Environment& env = envs.at(e.graph_id);
        Trajectory t;
        t.nodes.push_back(e.start);
        for (std::size_t step = 0; step < 2 * env.graph().num_nodes(); ++step) {
          const std::size_t a = env.expert_action(t.nodes.back(), e.goal);
          if (a == env.observation(t.nodes.back()).stop_index()) break;
          t.nodes.push_back(env.observation(t.nodes.back()).candidates[a].neighbor);
        }
        const EpisodeResult r = score_episode(t, e, env.graph());
        EpisodeEval ev;
        ev.success = r.success;
        ev.spl = r.spl_term;
        evals.push_back(ev);
      }
      const SplitReport rep = summarize(evals, Setting::S, std::string(split_name(s)));
      pass = pass && rep.sr == 100.0 && rep.spl == 100.0;
      ++splits;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  pass = pass && secs < 10.0;
  return {pass, std::to_string(splits) + " splits at SR=SPL=100, " + fmt("%.1fs", secs)};
}

// 5. M identical instructions: S and M evaluations agree exactly.
Outcome aggregation_identity() {
  const World w = generate_world(9, WorldConfig{});
  const Environments envs = make_environments(w);
  bool pass = true;
  std::size_t episodes = 0;
  for (std::size_t m_copies : {2u, 3u, 5u}) {
    AgentModel m = make_agent(w, EncoderKind::Scratch, nullptr, AgentDims{}, 20 + m_copies);
    TrainConfig tc = desk_config().train;
    tc.stage1_epochs = 1;
    tc.stage2_epochs = 0;
    StrategyConfig sc;
    sc.rng_seed = 3;
    train(m, w, envs, sc, tc);
    std::vector<EpisodeSpec> eps = w.split.val_unseen;
    for (auto& e : eps) e.instructions.assign(m_copies, e.instructions.front());
    const Evaluation s = evaluate(m, envs, eps, Setting::S, "val_unseen");
    const Evaluation mm = evaluate(m, envs, eps, Setting::M, "val_unseen");
    pass = pass && s.report.tl == mm.report.tl && s.report.ne == mm.report.ne && s.report.sr == mm.report.sr &&
           s.report.spl == mm.report.spl;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      for (const auto& t : s.episodes[i].rollouts) {
        pass = pass && t.nodes == mm.episodes[i].rollouts[0].nodes && t.actions == mm.episodes[i].rollouts[0].actions &&
               t.logits == mm.episodes[i].rollouts[0].logits;
      }
      ++episodes;
    }
  }
  return {pass, std::to_string(episodes) + " episodes with M in {2,3,5}"};
}

// 6. TF on a 1-graph, 5-episode world learns its training set.
Outcome learning_smoke() {
  const auto t0 = std::chrono::steady_clock::now();
  const World w = generate_world(11, one_graph(16, 5, 3, 6));
  const Environments envs = make_environments(w);
  AgentModel m = make_agent(w, EncoderKind::Scratch, nullptr, AgentDims{}, 12);
  TrainConfig tc;
  tc.stage1_epochs = 50;
  tc.stage2_epochs = 0;
  tc.batch_stage1 = 3;
  tc.lr_main = 1e-2;
  tc.lr_lm_finetune = 5e-3;
  tc.eval_every = 0;
  StrategyConfig sc;
  sc.kind = StrategyKind::TF;
  sc.rng_seed = 13;
  const TrainResult r = train(m, w, envs, sc, tc);
  const double first = r.log.front().train_loss;
  double best = first;
  for (const auto& row : r.log) best = std::min(best, row.train_loss);
  const double reduction = 1.0 - best / first;
  const Evaluation ev = evaluate(m, envs, w.split.train_seen, Setting::S, "train_seen");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = reduction >= 0.9 && ev.report.sr >= 80.0 && secs < 120.0;
  return {pass, "loss " + fmt("%.3f", first) + " -> " + fmt("%.4f", best) + " (" + fmt("%.1f", 100 * reduction) +
                    "% lower), train SR " + fmt("%.1f", ev.report.sr) + ", " + fmt("%.1fs", secs)};
}

// 9. Overlap on hand-built corpora, then the generated-world pattern.
Outcome overlap_analyzer() {
  auto corpus = [](std::initializer_list<const char*> texts) {
    std::vector<TokenSeq> out;
    for (const char* t : texts) out.push_back(TokenSeq{{}, t});
    return out;
  };
  // Each instruction of b contributes its distinct n-grams; the expected
  // percentages were enumerated by hand and are listed per case.
  struct Case {
    std::vector<TokenSeq> a, b;
    double expected[4];
  };
  const std::vector<Case> cases = {
      // a: walk to the door / turn left at the door / stop at the lamp
      // b: walk to the lamp / turn left at the lamp / stop at the door
      // unigrams: {walk,to,the,lamp} 4/4, {turn,left,at,the,lamp} 5/5, {stop,at,the,door} 4/4 -> 13/13
      // bigrams: walk-to,to-the,the-lamp (the-lamp from "stop at the lamp") 3/3;
      //   turn-left,left-at,at-the,the-lamp 4/4; stop-at,at-the,the-door 3/3 -> 10/10
      // trigrams: walk-to-the yes, to-the-lamp no; turn-left-at, left-at-the yes, at-the-lamp yes
      //   (from "stop at the lamp"); stop-at-the yes, at-the-door yes -> 6/7
      // 4-grams: walk-to-the-lamp no; turn-left-at-the yes, left-at-the-lamp no; stop-at-the-door no -> 1/4
      {corpus({"walk to the door", "turn left at the door", "stop at the lamp"}),
       corpus({"walk to the lamp", "turn left at the lamp", "stop at the door"}),
       {100.0, 100.0, 600.0 / 7.0, 25.0}},
      // a: go left go left / go up / stop now
      // b: go left now / up up up / stop go left
      // unigrams: {go,left,now} 3/3, {up} 1/1, {stop,go,left} 3/3 -> 7/7
      // bigrams: go-left yes, left-now no; up-up no; stop-go no, go-left yes -> 2/5
      // trigrams: go-left-now no; up-up-up no; stop-go-left no -> 0/3
      // 4-grams: none in b -> undefined, so only n<=3 are checked here
      {corpus({"go left go left", "go up", "stop now"}), corpus({"go left now", "up up up", "stop go left"}),
       {100.0, 40.0, 0.0, -1.0}},
  };
  bool pass = true;
  std::string detail;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    for (std::size_t n = 1; n <= 4; ++n) {
      if (cases[c].expected[n - 1] < 0) continue;
      const double got = ngram_overlap(cases[c].a, cases[c].b, n);
      if (got != cases[c].expected[n - 1]) {
        pass = false;
        detail += " case" + std::to_string(c + 1) + " n=" + std::to_string(n) + " got " + fmt("%.4f", got);
      }
    }
  }
  for (std::uint64_t seed : {1, 2, 3}) {
    const World w = generate_world(seed, WorldConfig{});
    const auto train = split_corpus(w.split.train_seen);
    const auto seen = split_corpus(w.split.val_seen);
    double ps = 101, pu = 101;
    for (std::size_t n = 1; n <= 4; ++n) {
      const double s = ngram_overlap(train, seen, n);
      for (SplitName u : {SplitName::ValUnseen, SplitName::TestUnseen}) {
        const double v = ngram_overlap(train, split_corpus(split_episodes(w.split, u)), n);
        if (v > s) {
          pass = false;
          detail += " seed" + std::to_string(seed) + " unseen>seen at n=" + std::to_string(n);
        }
      }
      const double uv = ngram_overlap(train, split_corpus(w.split.val_unseen), n);
      if (s > ps || uv > pu) {
        pass = false;
        detail += " seed" + std::to_string(seed) + " increases at n=" + std::to_string(n);
      }
      ps = s;
      pu = uv;
    }
  }
  return {pass, "2 hand corpora x n=1..4 exact, 3 generated worlds monotone" + detail};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VLNLAB_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path().string());
  }
  return files;
}

// 10. Every CLI command re-run with the same config and seed writes identical bytes.
Outcome reproducibility(const fs::path& work) {
  const fs::path dir = work / "repro";
  const fs::path cfg = work / "repro-config.json";
  write_file(cfg.string(), R"({
  "world": {"num_graphs": 4, "nodes_per_graph": 9, "split_ratios": {"seen": 0.5, "val_unseen": 0.25, "test_unseen": 0.25},
            "episodes_per_graph": 6, "val_seen_fraction": 0.34, "min_path_nodes": 2, "max_path_nodes": 5},
  "train": {"stage1_epochs": 2, "stage2_epochs": 1, "batch_stage1": 4, "batch_stage2": 4, "lr_main": 0.003, "lr_lm_finetune": 0.0015},
  "pretrain": {"epochs": 2},
  "eval": {"workers": 2}
})");
  const std::string common = " --seed 3 --config " + cfg.string() + " --out " + dir.string();
  const std::vector<std::string> commands = {
      "genworld", "stats", "pretrain --encoder causal", "pretrain --encoder masked",
      "train --encoder causal --strategy SS", "eval --setting S --setting M --include-test --split val_seen --split test_unseen",
      "ablate --encoders scratch masked --strategies TF SS --seeds 1 2"};
  std::map<std::string, std::string> first;
  for (int round = 0; round < 2; ++round) {
    fs::remove_all(dir);
    for (const auto& c : commands) {
      if (run_cli(c + common) != 0) return {false, "command failed: " + c};
    }
    auto snap = snapshot(dir);
    if (round == 0) {
      first = std::move(snap);
      continue;
    }
    if (snap.size() != first.size()) return {false, "file sets differ"};
    for (const auto& [name, bytes] : first) {
      if (snap.at(name) != bytes) return {false, "differs: " + name};
    }
  }
  std::size_t ckpts = 0, logs = 0, reports = 0;
  for (const auto& [name, _] : first) {
    ckpts += name.find(".ckpt") != std::string::npos;
    logs += name.rfind("logs/", 0) == 0;
    reports += name.rfind("reports/", 0) == 0;
  }
  fs::remove_all(dir);
  return {ckpts > 0 && logs > 0 && reports > 0,
          std::to_string(commands.size()) + " commands, " + std::to_string(first.size()) + " files identical (" +
              std::to_string(ckpts) + " checkpoints, " + std::to_string(logs) + " logs, " +
              std::to_string(reports) + " reports)"};
}

// Shared by 7 and 8: the desk preset over five seeds on the default world.
struct Replication {
  AblationTable strategies;  // scratch x {TF, SF, SS}
  AblationTable encoders;    // {causal, masked} x SS
  double minutes_strategies = 0, minutes_encoders = 0;
};

AblationSpec replication_spec(const ExperimentConfig& cfg, const std::string& cache) {
  AblationSpec spec;
  spec.seeds = {1, 2, 3, 4, 5};
  spec.train = cfg.train;
  spec.pretrain = cfg.pretrain;
  spec.agent = cfg.agent;
  spec.setting = cfg.eval.setting;
  spec.cache_dir = cache;
  spec.progress = [](const std::string& m) { std::fprintf(stderr, "  %s\n", m.c_str()); };
  return spec;
}

double unseen_sr(const AblationRow& row) { return row.median.at(1).sr; }
double gap(const AblationRow& row) { return row.median.at(0).sr - row.median.at(1).sr; }

Outcome strategy_replication(Replication& rep, const ExperimentConfig& cfg, const World& w, const std::string& cache) {
  AblationSpec spec = replication_spec(cfg, cache);
  spec.encoders = {EncoderKind::Scratch};
  for (StrategyKind k : {StrategyKind::TF, StrategyKind::SF, StrategyKind::SS}) {
    StrategyConfig s = cfg.strategy;
    s.kind = k;
    spec.strategies.push_back(s);
  }
  const auto t0 = std::chrono::steady_clock::now();
  rep.strategies = ablation_grid(w, spec);
  rep.minutes_strategies = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60;
  const double tf = unseen_sr(rep.strategies.rows[0]);
  const double sf = unseen_sr(rep.strategies.rows[1]);
  const double ss = unseen_sr(rep.strategies.rows[2]);
  const bool pass = ss >= tf && ss >= sf && (ss - tf >= 2.0 || ss - sf >= 2.0);
  return {pass, "median unseen SR TF " + fmt("%.1f", tf) + ", SF " + fmt("%.1f", sf) + ", SS " + fmt("%.1f", ss) +
                    " (eps " + fmt("%g", cfg.strategy.epsilon) + "), " + fmt("%.1f min", rep.minutes_strategies)};
}

Outcome encoder_replication(Replication& rep, const ExperimentConfig& cfg, const World& w, const std::string& cache) {
  AblationSpec spec = replication_spec(cfg, cache);
  spec.encoders = {EncoderKind::Scratch, EncoderKind::Causal, EncoderKind::Masked};
  StrategyConfig s = cfg.strategy;
  s.kind = StrategyKind::SS;
  spec.strategies = {s};
  const auto t0 = std::chrono::steady_clock::now();
  rep.encoders = ablation_grid(w, spec);
  rep.minutes_encoders = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60;
  const AblationRow& scratch = rep.encoders.rows[0];
  const AblationRow& causal = rep.encoders.rows[1];
  const AblationRow& masked = rep.encoders.rows[2];
  const AblationRow& best = unseen_sr(causal) >= unseen_sr(masked) ? causal : masked;
  const bool pass = unseen_sr(causal) >= unseen_sr(scratch) && unseen_sr(masked) >= unseen_sr(scratch) &&
                    gap(best) <= gap(scratch);
  return {pass, "median unseen SR scratch " + fmt("%.1f", unseen_sr(scratch)) + ", causal " +
                    fmt("%.1f", unseen_sr(causal)) + ", masked " + fmt("%.1f", unseen_sr(masked)) +
                    "; seen-unseen gap scratch " + fmt("%.1f", gap(scratch)) + ", " +
                    std::string(encoder_name(best.encoder)) + " " + fmt("%.1f", gap(best)) + ", " +
                    fmt("%.1f min", rep.minutes_encoders)};
}

const char* kNames[] = {"",
                        "gradient fidelity",
                        "strategy-limit equivalence",
                        "metric invariants",
                        "expert-oracle closure",
                        "aggregation identity",
                        "learning smoke",
                        "strategy replication (SS best on unseen)",
                        "pretraining replication (pretrained >= scratch on unseen, smaller gap)",
                        "overlap analyzer",
                        "reproducibility"};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  std::string cache;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criteria" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) wanted.insert(std::stoi(item));
    } else if (a == "--cache" && i + 1 < argc) {
      cache = argv[++i];
    } else {
      std::fprintf(stderr, "usage: vln_acceptance [--criteria 1,2,...] [--cache DIR]\n");
      return 5;
    }
  }
  if (wanted.empty()) {
    for (int c = 1; c <= 10; ++c) wanted.insert(c);
  }
  const fs::path work = fs::temp_directory_path() / ("vln_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);
  // Cells are shared between 7 and 8 through the cache; a private one unless
  // the caller wants results kept across runs.
  if (cache.empty()) cache = (work / "cache").string();

  const ExperimentConfig desk = desk_config();
  std::unique_ptr<World> replication_world;
  Replication rep;
  int failures = 0;
  for (int c : wanted) {
    Outcome o;
    try {
      switch (c) {
        case 1: o = gradient_fidelity(); break;
        case 2: o = strategy_limits(); break;
        case 3: o = metric_invariants(); break;
        case 4: o = expert_closure(); break;
        case 5: o = aggregation_identity(); break;
        case 6: o = learning_smoke(); break;
        case 7:
        case 8:
          if (!replication_world) replication_world = std::make_unique<World>(generate_world(desk.seed, desk.world));
          o = c == 7 ? strategy_replication(rep, desk, *replication_world, cache)
                     : encoder_replication(rep, desk, *replication_world, cache);
          break;
        case 9: o = overlap_analyzer(); break;
        case 10: o = reproducibility(work); break;
        default: o = {false, "no such criterion"};
      }
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d %s: %s (%s)\n", c, c >= 1 && c <= 10 ? kNames[c] : "?", o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work);
  return failures == 0 ? 0 : 1;
}
