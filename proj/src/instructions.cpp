#include "vln/instructions.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>

#include "vln/errors.hpp"
#include "vln/rng.hpp"

namespace vln {

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<unk>", "<mask>", "<s>", "</s>"}) add(t);
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  if (tokens.size() < kNumReserved) throw ConfigError("vocabulary is missing reserved tokens");
  for (TokenId i = 0; i < kNumReserved; ++i) {
    if (tokens[i] != v.tokens_[i]) {
      throw ConfigError("vocabulary entry " + std::to_string(i) + " must be " + v.tokens_[i]);
    }
  }
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw ConfigError("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

TokenId Vocabulary::add(std::string_view word) {
  auto it = index_.find(std::string(word));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(word);
  index_.emplace(tokens_.back(), id);
  return id;
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) != 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw LookupError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isalnum(uc)) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  TokenSeq seq;
  seq.raw_text = std::string(text);
  const std::size_t cap = std::max<std::size_t>(max_len, 1) - 1;
  for (const auto& w : split_words(text)) {
    if (seq.tokens.size() == cap) break;
    seq.tokens.push_back(vocab.id(w));
  }
  seq.tokens.push_back(Vocabulary::kEos);
  return seq;
}

std::string detokenize(const TokenSeq& seq, const Vocabulary& vocab) {
  std::string out;
  for (TokenId t : seq.tokens) {
    if (t != Vocabulary::kUnk && Vocabulary::is_reserved(t)) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(t);
  }
  return out;
}

Grammar Grammar::standard(double rare_rate, RarePool pool) {
  Grammar g;
  g.rare_rate = rare_rate;
  g.pool = pool;
  g.verbs = {{"walk", "go", "head", "move"}, {"proceed", "travel"}, {"amble", "stroll"}};
  const char* names[8] = {"east", "northeast", "north", "northwest",
                          "west", "southwest", "south", "southeast"};
  for (std::size_t i = 0; i < 8; ++i) {
    const std::string n = names[i];
    g.directions[i] = {{n}, {n + "ward"}, {n + "bound"}};
  }
  g.stop_verbs = {{"stop"}, {"halt"}, {"pause"}};
  g.landmarks = {
      {{{"sofa"}, {"settee"}, {"divan"}}, "red"},
      {{{"lamp"}, {"lantern"}, {"sconce"}}, "tall"},
      {{{"table"}, {"desk"}, {"trestle"}}, "wooden"},
      {{{"door"}, {"doorway"}, {"portal"}}, "open"},
      {{{"stairs"}, {"staircase"}, {"stairwell"}}, "steep"},
      {{{"plant"}, {"fern"}, {"shrub"}}, "green"},
      {{{"mirror"}, {"vanity"}, {"cheval"}}, "round"},
      {{{"piano"}, {"keyboard"}, {"harpsichord"}}, "black"},
      {{{"fridge"}, {"refrigerator"}, {"icebox"}}, "white"},
      {{{"bed"}, {"bunk"}, {"cot"}}, "large"},
      {{{"sink"}, {"basin"}, {"washbasin"}}, "steel"},
      {{{"window"}, {"pane"}, {"casement"}}, "bright"},
      {{{"painting"}, {"portrait"}, {"canvas"}}, "framed"},
      {{{"clock"}, {"timepiece"}, {"chronometer"}}, "old"},
      {{{"rug"}, {"carpet"}, {"mat"}}, "striped"},
      {{{"statue"}, {"mannequin"}, {"manikin"}}, "marble"},
  };
  return g;
}

std::vector<std::string> Grammar::lexicon(RarePool p) const {
  std::set<std::string> out;
  auto add = [&](const SynonymSet& s) {
    out.insert(s.core.begin(), s.core.end());
    const auto& rare = p == RarePool::Seen ? s.rare_shared : s.rare_heldout;
    out.insert(rare.begin(), rare.end());
  };
  add(verbs);
  for (const auto& d : directions) add(d);
  add(stop_verbs);
  for (const auto& l : landmarks) {
    add(l.noun);
    out.insert(l.adjective);
  }
  return {out.begin(), out.end()};
}

std::size_t bearing_sector(Vec2 from, Vec2 to) {
  const double angle = std::atan2(to.y - from.y, to.x - from.x);
  const long s = std::lround(angle / (std::numbers::pi / 4.0));
  return static_cast<std::size_t>(((s % 8) + 8) % 8);
}

namespace {

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

const std::string& draw(const SynonymSet& s, const Grammar& g, Rng& rng) {
  const auto& rare = g.pool == RarePool::Seen ? s.rare_shared : s.rare_heldout;
  const bool use_rare = uniform01(rng) < g.rare_rate && !rare.empty();
  return use_rare ? pick(rare, rng) : pick(s.core, rng);
}

struct Segment {
  std::size_t sector;
  std::uint32_t landmark;
};

struct Slots {
  std::string verb, dir, noun, adj;
};

std::string render_one(const std::vector<Segment>& segs, const Grammar& g, std::size_t tmpl,
                       Rng& rng) {
  // Draw all lexical choices up front so every verbosity level describes the
  // same choices.
  std::vector<Slots> slots;
  for (const auto& s : segs) {
    const auto& lm = g.landmarks[s.landmark];
    slots.push_back({draw(g.verbs, g, rng), draw(g.directions[s.sector], g, rng),
                     draw(lm.noun, g, rng), lm.adjective});
  }
  const std::string stop = draw(g.stop_verbs, g, rng);
  const Slots& last = slots.back();

  std::string text;
  for (int level = 0; level < 3; ++level) {
    const bool adj = level == 0;
    text.clear();
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const Slots& s = slots[i];
      const std::string obj = "the " + (adj ? s.adj + " " : std::string()) + s.noun;
      std::string seg;
      if (level == 2) {
        seg = s.dir + " to " + obj;
      } else if (tmpl == 0) {
        seg = s.verb + " " + s.dir + " to " + obj;
      } else if (tmpl == 1) {
        seg = s.verb + " " + s.dir + " toward " + obj;
      } else {
        seg = s.verb + " " + s.dir + " until " + obj;
      }
      if (i > 0) {
        text += level == 2 ? " then " : tmpl == 0 ? " then " : tmpl == 1 ? ", " : " and then ";
      }
      text += seg;
    }
    if (level == 2 || tmpl == 0) {
      text += " and " + stop + ".";
    } else if (tmpl == 1) {
      text += ". " + stop + " there.";
    } else {
      text += ", " + stop + " at the " + (adj ? last.adj + " " : std::string()) + last.noun + ".";
    }
    if (split_words(text).size() <= g.max_tokens) break;
  }
  if (!text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  return text;
}

}  // namespace

std::vector<std::string> render_instruction_texts(std::span<const NodeId> path,
                                                  const NavGraph& graph, const Grammar& grammar,
                                                  std::size_t m, std::uint64_t seed) {
  if (m == 0) throw RenderError("at least one instruction per path is required");
  if (path.size() < 2) throw RenderError("path needs at least two nodes");
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!graph.has_node(path[i])) throw RenderError("path leaves graph " + graph.id);
    if (i > 0 && !std::binary_search(graph.adjacency[path[i - 1]].begin(),
                                     graph.adjacency[path[i - 1]].end(), path[i])) {
      throw RenderError("path uses a non-edge in graph " + graph.id);
    }
  }
  std::vector<Segment> segs;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const std::size_t sector = bearing_sector(graph.positions[path[i - 1]], graph.positions[path[i]]);
    const auto& lms = graph.landmarks[path[i]];
    if (lms.empty() || lms.front() >= grammar.landmarks.size()) {
      throw RenderError("node " + std::to_string(path[i]) + " of graph " + graph.id +
                        " has a landmark the grammar cannot name");
    }
    if (!segs.empty() && segs.back().sector == sector) {
      segs.back().landmark = lms.front();
    } else {
      segs.push_back({sector, lms.front()});
    }
  }

  Rng rng(seed);
  constexpr std::size_t kTemplates = 3;
  const std::size_t first = uniform_index(rng, kTemplates);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m; ++i) {
    std::string text;
    for (int attempt = 0; attempt < 32; ++attempt) {
      text = render_one(segs, grammar, (first + i) % kTemplates, rng);
      if (std::find(out.begin(), out.end(), text) == out.end()) break;
    }
    out.push_back(std::move(text));
  }
  return out;
}

std::vector<TokenSeq> render_instructions(std::span<const NodeId> path, const NavGraph& graph,
                                          const Grammar& grammar, std::size_t m,
                                          std::uint64_t seed, const Vocabulary& vocab) {
  std::vector<TokenSeq> out;
  for (const auto& t : render_instruction_texts(path, graph, grammar, m, seed)) {
    out.push_back(tokenize(t, vocab));
  }
  return out;
}

Vocabulary build_vocabulary(std::span<const std::string> corpus) {
  std::set<std::string> words;
  for (const auto& text : corpus) {
    for (auto& w : split_words(text)) words.insert(std::move(w));
  }
  Vocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

namespace {

using Gram = std::vector<std::string>;

// Distinct n-grams of one instruction.
std::set<Gram> instruction_grams(const TokenSeq& seq, std::size_t n) {
  std::set<Gram> grams;
  const auto w = split_words(seq.raw_text);
  for (std::size_t i = 0; i + n <= w.size(); ++i) {
    grams.emplace(w.begin() + static_cast<std::ptrdiff_t>(i),
                  w.begin() + static_cast<std::ptrdiff_t>(i + n));
  }
  return grams;
}

}  // namespace

double ngram_overlap(std::span<const TokenSeq> corpus_a, std::span<const TokenSeq> corpus_b,
                     std::size_t n) {
  if (n == 0) throw MetricError("n-gram order must be at least 1");
  if (corpus_a.empty() || corpus_b.empty()) throw MetricError("empty corpus");
  std::set<Gram> a;
  for (const auto& seq : corpus_a) a.merge(instruction_grams(seq, n));
  std::size_t shared = 0, total = 0;
  for (const auto& seq : corpus_b) {
    for (const auto& g : instruction_grams(seq, n)) {
      ++total;
      shared += a.count(g);
    }
  }
  if (total == 0) throw MetricError("no " + std::to_string(n) + "-grams in the compared corpus");
  return 100.0 * static_cast<double>(shared) / static_cast<double>(total);
}

}  // namespace vln
