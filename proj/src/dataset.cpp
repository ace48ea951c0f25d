#include "vln/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vln/checkpoint.hpp"
#include "vln/errors.hpp"
#include "vln/rng.hpp"

namespace vln {

using nlohmann::json;

namespace {

void validate(const WorldConfig& c) {
  auto fail = [](const std::string& m) { throw GenerationError(m); };
  if (c.num_graphs == 0) fail("num_graphs must be positive");
  if (c.nodes_per_graph < 2) fail("nodes_per_graph must be at least 2");
  if (c.feature_dim < 3) fail("feature_dim must be at least 3");
  if (c.landmark_vocab_size == 0) fail("landmark_vocab_size must be positive");
  if (c.landmark_vocab_size > Grammar::standard().landmarks.size()) {
    fail("landmark_vocab_size exceeds the grammar's landmark lexicon");
  }
  if (c.episodes_per_graph == 0) fail("episodes_per_graph must be positive");
  if (c.instructions_per_episode == 0) fail("instructions_per_episode must be positive");
  const auto& r = c.split_ratios;
  if (r.seen <= 0.0 || r.val_unseen < 0.0 || r.test_unseen < 0.0) {
    fail("split ratios must be non-negative with a positive seen share");
  }
  if (std::abs(r.seen + r.val_unseen + r.test_unseen - 1.0) > 1e-9) {
    fail("split ratios must sum to 1");
  }
  if (c.val_seen_fraction < 0.0 || c.val_seen_fraction >= 1.0) {
    fail("val_seen_fraction must be in [0, 1)");
  }
  if (c.min_path_nodes < 2 || c.max_path_nodes < c.min_path_nodes) fail("bad path length bounds");
  if (c.nodes_per_graph < c.min_path_nodes) {
    fail("nodes_per_graph too small for the requested path length");
  }
  if (c.rare_rate_seen < 0 || c.rare_rate_seen > 1 || c.rare_rate_unseen < 0 ||
      c.rare_rate_unseen > 1) {
    fail("rare rates must be in [0, 1]");
  }
  if (c.max_degree < 2) fail("max_degree must be at least 2");
  if (!(c.spacing > 0.0)) fail("spacing must be positive");
}

std::string graph_name(std::size_t g) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%02zu", g);
  return buf;
}

bool still_connected(NavGraph g, std::size_t max_degree) {
  try {
    g.finalize(max_degree);
    return true;
  } catch (const GenerationError&) {
    return false;
  }
}

NavGraph make_graph(std::uint64_t seed, std::size_t g, const WorldConfig& c) {
  Rng rng = make_rng(seed, "graph", g);
  NavGraph graph;
  graph.id = graph_name(g);
  graph.env_seed = derive_seed(seed, "env", g);
  graph.feature_dim = c.feature_dim;
  const std::size_t n = c.nodes_per_graph;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  for (std::size_t i = 0; i < n; ++i) {
    const double r = static_cast<double>(i / cols);
    const double col = static_cast<double>(i % cols);
    graph.positions.push_back({(col + uniform(rng, -0.2, 0.2)) * c.spacing,
                               (r + uniform(rng, -0.2, 0.2)) * c.spacing});
  }
  for (std::size_t i = 0; i < n; ++i) {
    if ((i % cols) + 1 < cols && i + 1 < n) graph.edges.push_back({NodeId(i), NodeId(i + 1)});
    if (i + cols < n) graph.edges.push_back({NodeId(i), NodeId(i + cols)});
  }
  // Thin the lattice while keeping it connected.
  for (std::size_t k = graph.edges.size(); k > 1; --k) {
    std::swap(graph.edges[k - 1], graph.edges[uniform_index(rng, k)]);
  }
  for (std::size_t k = 0; k < graph.edges.size();) {
    if (uniform01(rng) < 0.2) {
      NavGraph trial = graph;
      trial.edges.erase(trial.edges.begin() + static_cast<std::ptrdiff_t>(k));
      if (still_connected(trial, c.max_degree + 4)) {
        graph.edges = std::move(trial.edges);
        continue;
      }
    }
    ++k;
  }
  std::vector<std::size_t> degree(n, 0);
  for (auto [a, b] : graph.edges) {
    ++degree[a];
    ++degree[b];
  }
  for (std::size_t i = 0; i + cols < n; ++i) {
    if ((i % cols) + 1 >= cols || i + cols + 1 >= n) continue;
    if (uniform01(rng) >= 0.15) continue;
    NodeId a = NodeId(i), b = NodeId(i + cols + 1);
    if (uniform01(rng) < 0.5) {
      a = NodeId(i + 1);
      b = NodeId(i + cols);
    }
    if (degree[a] < c.max_degree && degree[b] < c.max_degree) {
      graph.edges.push_back({std::min(a, b), std::max(a, b)});
      ++degree[a];
      ++degree[b];
    }
  }
  graph.finalize(c.max_degree);

  graph.landmarks.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t lm = 0;
    for (int attempt = 0; attempt < 10; ++attempt) {
      lm = static_cast<std::uint32_t>(uniform_index(rng, c.landmark_vocab_size));
      bool clash = false;
      for (NodeId nb : graph.adjacency[i]) {
        if (!graph.landmarks[nb].empty() && graph.landmarks[nb].front() == lm) clash = true;
      }
      if (!clash) break;
    }
    graph.landmarks[i] = {lm};
  }
  return graph;
}

json config_to_json(const WorldConfig& c) {
  return json{{"num_graphs", c.num_graphs},
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
              {"spacing", c.spacing},
              {"instructions_per_episode", c.instructions_per_episode},
              {"rare_rate_seen", c.rare_rate_seen},
              {"rare_rate_unseen", c.rare_rate_unseen},
              {"max_instruction_tokens", c.max_instruction_tokens},
              {"max_len", c.max_len}};
}

}  // namespace

const NavGraph& World::graph(const std::string& id) const {
  for (const auto& g : graphs) {
    if (g.id == id) return g;
  }
  throw LookupError("unknown graph '" + id + "'");
}

World generate_world(std::uint64_t seed, const WorldConfig& config) {
  validate(config);
  World world;
  world.seed = seed;
  world.config = config;
  const std::size_t n_graphs = config.num_graphs;
  for (std::size_t g = 0; g < n_graphs; ++g) world.graphs.push_back(make_graph(seed, g, config));

  // Environment split: which graphs are seen / val-unseen / test-unseen.
  std::vector<std::size_t> order(n_graphs);
  for (std::size_t i = 0; i < n_graphs; ++i) order[i] = i;
  {
    Rng rng = make_rng(seed, "split");
    for (std::size_t k = n_graphs; k > 1; --k) std::swap(order[k - 1], order[uniform_index(rng, k)]);
  }
  const auto n_seen = static_cast<std::size_t>(std::llround(config.split_ratios.seen * double(n_graphs)));
  const auto n_vu = static_cast<std::size_t>(std::llround(config.split_ratios.val_unseen * double(n_graphs)));
  if (n_seen == 0 || n_seen + n_vu > n_graphs) {
    throw GenerationError("split ratios leave no seen graphs for " + std::to_string(n_graphs) + " graphs");
  }
  std::vector<SplitName> role(n_graphs);
  for (std::size_t k = 0; k < n_graphs; ++k) {
    role[order[k]] = k < n_seen ? SplitName::TrainSeen
                     : k < n_seen + n_vu ? SplitName::ValUnseen
                                         : SplitName::TestUnseen;
  }

  Grammar seen_grammar = Grammar::standard(config.rare_rate_seen, RarePool::Seen);
  Grammar unseen_grammar = Grammar::standard(config.rare_rate_unseen, RarePool::Unseen);
  seen_grammar.max_tokens = unseen_grammar.max_tokens = config.max_instruction_tokens;

  struct Pending {
    SplitName split;
    EpisodeSpec episode;
    std::vector<std::string> texts;
  };
  std::vector<Pending> pending;
  std::uint64_t episode_counter = 0;
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const NavGraph& graph = world.graphs[g];
    std::vector<PathResult> paths;
    for (NodeId s = 0; s < graph.num_nodes(); ++s) {
      for (NodeId t = 0; t < graph.num_nodes(); ++t) {
        if (s == t) continue;
        auto p = shortest_path(graph, s, t);
        if (p.path.size() >= config.min_path_nodes && p.path.size() <= config.max_path_nodes) {
          paths.push_back(std::move(p));
        }
      }
    }
    if (paths.size() < config.episodes_per_graph) {
      throw GenerationError("graph " + graph.id + " offers only " + std::to_string(paths.size()) +
                            " start/goal pairs in the path-length range; " +
                            std::to_string(config.episodes_per_graph) + " requested");
    }
    Rng rng = make_rng(seed, "episodes", g);
    for (std::size_t k = paths.size(); k > 1; --k) std::swap(paths[k - 1], paths[uniform_index(rng, k)]);
    const auto n_val_seen = static_cast<std::size_t>(
        std::llround(config.val_seen_fraction * double(config.episodes_per_graph)));
    for (std::size_t e = 0; e < config.episodes_per_graph; ++e) {
      Pending p;
      p.split = role[g] == SplitName::TrainSeen && e < n_val_seen ? SplitName::ValSeen : role[g];
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s_%02zu", graph.id.c_str(), e);
      p.episode.path_id = buf;
      p.episode.graph_id = graph.id;
      p.episode.expert_path = paths[e].path;
      p.episode.start = paths[e].path.front();
      p.episode.goal = paths[e].path.back();
      const Grammar& grammar = is_unseen(p.split) ? unseen_grammar : seen_grammar;
      p.texts = render_instruction_texts(p.episode.expert_path, graph, grammar,
                                         config.instructions_per_episode,
                                         derive_seed(seed, "grammar", episode_counter++));
      pending.push_back(std::move(p));
    }
  }

  std::vector<std::string> train_texts;
  for (const auto& p : pending) {
    if (p.split == SplitName::TrainSeen) train_texts.insert(train_texts.end(), p.texts.begin(), p.texts.end());
  }
  world.vocab = build_vocabulary(train_texts);

  for (auto& p : pending) {
    for (const auto& t : p.texts) p.episode.instructions.push_back(tokenize(t, world.vocab, config.max_len));
    switch (p.split) {
      case SplitName::TrainSeen: world.split.train_seen.push_back(std::move(p.episode)); break;
      case SplitName::ValSeen: world.split.val_seen.push_back(std::move(p.episode)); break;
      case SplitName::ValUnseen: world.split.val_unseen.push_back(std::move(p.episode)); break;
      case SplitName::TestUnseen: world.split.test_unseen.push_back(std::move(p.episode)); break;
    }
  }
  return world;
}

namespace {

json episode_to_json(const EpisodeSpec& e) {
  json instr = json::array();
  for (const auto& t : e.instructions) instr.push_back({{"text", t.raw_text}, {"tokens", t.tokens}});
  return json{{"path_id", e.path_id}, {"graph_id", e.graph_id}, {"start", e.start},
              {"goal", e.goal}, {"expert_path", e.expert_path}, {"instructions", instr}};
}

EpisodeSpec episode_from_json(const json& j) {
  EpisodeSpec e;
  e.path_id = j.at("path_id").get<std::string>();
  e.graph_id = j.at("graph_id").get<std::string>();
  e.start = j.at("start").get<NodeId>();
  e.goal = j.at("goal").get<NodeId>();
  e.expert_path = j.at("expert_path").get<std::vector<NodeId>>();
  for (const auto& t : j.at("instructions")) {
    e.instructions.push_back({t.at("tokens").get<std::vector<TokenId>>(), t.at("text").get<std::string>()});
  }
  return e;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

WorldConfig config_from_json(const json& j) {
  WorldConfig c;
  read_field(j, "num_graphs", c.num_graphs);
  read_field(j, "nodes_per_graph", c.nodes_per_graph);
  read_field(j, "feature_dim", c.feature_dim);
  read_field(j, "landmark_vocab_size", c.landmark_vocab_size);
  if (j.contains("split_ratios")) {
    const auto& r = j.at("split_ratios");
    read_field(r, "seen", c.split_ratios.seen);
    read_field(r, "val_unseen", c.split_ratios.val_unseen);
    read_field(r, "test_unseen", c.split_ratios.test_unseen);
  }
  read_field(j, "episodes_per_graph", c.episodes_per_graph);
  read_field(j, "val_seen_fraction", c.val_seen_fraction);
  read_field(j, "max_degree", c.max_degree);
  read_field(j, "min_path_nodes", c.min_path_nodes);
  read_field(j, "max_path_nodes", c.max_path_nodes);
  read_field(j, "spacing", c.spacing);
  read_field(j, "instructions_per_episode", c.instructions_per_episode);
  read_field(j, "rare_rate_seen", c.rare_rate_seen);
  read_field(j, "rare_rate_unseen", c.rare_rate_unseen);
  read_field(j, "max_instruction_tokens", c.max_instruction_tokens);
  read_field(j, "max_len", c.max_len);
  return c;
}

}  // namespace

Environments make_environments(const World& world) {
  Environments envs;
  for (const NavGraph& g : world.graphs) envs.emplace(g.id, Environment(g));
  return envs;
}

std::string world_to_json(const World& world) {
  json graphs = json::array();
  for (const auto& g : world.graphs) {
    json nodes = json::array();
    for (const auto& p : g.positions) nodes.push_back({p.x, p.y});
    json edges = json::array();
    for (const auto& [a, b] : g.edges) edges.push_back({a, b});
    graphs.push_back({{"id", g.id}, {"env_seed", g.env_seed}, {"feature_dim", g.feature_dim},
                      {"nodes", nodes}, {"edges", edges}, {"landmarks", g.landmarks}});
  }
  json splits = json::object();
  for (SplitName s : {SplitName::TrainSeen, SplitName::ValSeen, SplitName::ValUnseen,
                      SplitName::TestUnseen}) {
    json arr = json::array();
    for (const auto& e : split_episodes(world.split, s)) arr.push_back(episode_to_json(e));
    splits[std::string(split_name(s))] = arr;
  }
  json doc{{"format", "vln-world"}, {"version", 1},
           {"seed", world.seed},    {"config", config_to_json(world.config)},
           {"graphs", graphs},      {"vocab", world.vocab.tokens()},
           {"splits", splits}};
  return doc.dump(1) + "\n";
}

World world_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed world file: ") + e.what());
  }
  try {
    if (doc.value("format", "") != "vln-world") throw IoError("not a world file");
    World w;
    w.seed = doc.at("seed").get<std::uint64_t>();
    w.config = config_from_json(doc.at("config"));
    for (const auto& gj : doc.at("graphs")) {
      NavGraph g;
      g.id = gj.at("id").get<std::string>();
      g.env_seed = gj.at("env_seed").get<std::uint64_t>();
      g.feature_dim = gj.at("feature_dim").get<std::size_t>();
      for (const auto& p : gj.at("nodes")) g.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      for (const auto& e : gj.at("edges")) g.edges.push_back({e.at(0).get<NodeId>(), e.at(1).get<NodeId>()});
      g.landmarks = gj.at("landmarks").get<std::vector<std::vector<std::uint32_t>>>();
      g.finalize(w.config.max_degree);
      w.graphs.push_back(std::move(g));
    }
    w.vocab = Vocabulary::from_tokens(doc.at("vocab").get<std::vector<std::string>>());
    const auto& sj = doc.at("splits");
    for (const auto& e : sj.at("train_seen")) w.split.train_seen.push_back(episode_from_json(e));
    for (const auto& e : sj.at("val_seen")) w.split.val_seen.push_back(episode_from_json(e));
    for (const auto& e : sj.at("val_unseen")) w.split.val_unseen.push_back(episode_from_json(e));
    for (const auto& e : sj.at("test_unseen")) w.split.test_unseen.push_back(episode_from_json(e));
    return w;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed world file: ") + e.what());
  }
}

void save_world(const std::string& path, const World& world) { write_file(path, world_to_json(world)); }
World load_world(const std::string& path) { return world_from_json(read_file(path)); }

std::string corpus_jsonl(const World& world) {
  std::string out;
  for (SplitName s : {SplitName::TrainSeen, SplitName::ValSeen, SplitName::ValUnseen,
                      SplitName::TestUnseen}) {
    for (const auto& e : split_episodes(world.split, s)) {
      json texts = json::array();
      for (const auto& t : e.instructions) texts.push_back(t.raw_text);
      out += json{{"split", split_name(s)}, {"path_id", e.path_id}, {"instructions", texts}}.dump();
      out += "\n";
    }
  }
  return out;
}

std::string vocabulary_lines(const Vocabulary& vocab) {
  std::string out;
  for (const auto& t : vocab.tokens()) out += t + "\n";
  return out;
}

Vocabulary vocabulary_from_lines(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocabulary::from_tokens(tokens);
}

std::vector<TokenSeq> split_corpus(const std::vector<EpisodeSpec>& episodes) {
  std::vector<TokenSeq> out;
  for (const auto& e : episodes) out.insert(out.end(), e.instructions.begin(), e.instructions.end());
  return out;
}

}  // namespace vln
