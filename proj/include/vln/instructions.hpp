#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vln/token_seq.hpp"
#include "vln/world.hpp"

namespace vln {

// Token <-> id bijection. Ids 0-4 are reserved for pad, unknown, mask,
// sequence-start and sequence-end.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kMask = 2;
  static constexpr TokenId kBos = 3;
  static constexpr TokenId kEos = 4;
  static constexpr TokenId kNumReserved = 5;

  Vocabulary();
  // Rebuilds from an ordered token list whose first five entries are the
  // reserved markers. Throws ConfigError on duplicates or a bad prefix.
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  TokenId add(std::string_view word);
  TokenId id(std::string_view word) const;  // kUnk when absent
  bool contains(std::string_view word) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_reserved(TokenId id) { return id < kNumReserved; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

inline constexpr std::size_t kDefaultMaxLen = 60;

// Lowercased words split on anything that is not a letter or digit.
std::vector<std::string> split_words(std::string_view text);

// Words followed by the sequence-end marker; unknown words map to kUnk.
// Longer inputs are cut to max_len tokens (the end marker is kept).
TokenSeq tokenize(std::string_view text, const Vocabulary& vocab,
                  std::size_t max_len = kDefaultMaxLen);
std::string detokenize(const TokenSeq& seq, const Vocabulary& vocab);

// Lexical variants of one concept. `rare_shared` may be drawn in any split;
// `rare_heldout` is drawn only when rendering for unseen environments, so it
// never reaches the training corpus.
struct SynonymSet {
  std::vector<std::string> core;
  std::vector<std::string> rare_shared;
  std::vector<std::string> rare_heldout;
};

struct LandmarkLexicon {
  SynonymSet noun;
  std::string adjective;
};

enum class RarePool { Seen, Unseen };

struct Grammar {
  SynonymSet verbs;
  std::array<SynonymSet, 8> directions;  // east, northeast, north, ... counter-clockwise
  SynonymSet stop_verbs;
  std::vector<LandmarkLexicon> landmarks;
  double rare_rate = 0.05;
  RarePool pool = RarePool::Seen;
  std::size_t max_tokens = 25;

  static Grammar standard(double rare_rate = 0.05, RarePool pool = RarePool::Seen);
  // Every lexeme the grammar can emit from the given pool.
  std::vector<std::string> lexicon(RarePool p) const;
};

// Compass sector (0 = east, counter-clockwise in 45 degree steps) of a hop.
std::size_t bearing_sector(Vec2 from, Vec2 to);

// M distinct renderings of the same path. Deterministic in seed. Throws
// RenderError when a node carries a landmark the grammar cannot name.
std::vector<std::string> render_instruction_texts(std::span<const NodeId> path,
                                                  const NavGraph& graph, const Grammar& grammar,
                                                  std::size_t m, std::uint64_t seed);
std::vector<TokenSeq> render_instructions(std::span<const NodeId> path, const NavGraph& graph,
                                          const Grammar& grammar, std::size_t m,
                                          std::uint64_t seed, const Vocabulary& vocab);

// Vocabulary over the words of a corpus: reserved markers, then words sorted.
Vocabulary build_vocabulary(std::span<const std::string> corpus);

// Percentage of corpus_b's n-grams that also occur somewhere in corpus_a.
// Each instruction of corpus_b contributes its distinct n-grams (a repeat
// inside one instruction counts once; the same n-gram in two instructions
// counts twice). N-grams are taken over the words of raw_text, so distinct
// unknown words stay distinct. Throws MetricError when corpus_b has no n-gram
// of order n.
double ngram_overlap(std::span<const TokenSeq> corpus_a, std::span<const TokenSeq> corpus_b,
                     std::size_t n);

}  // namespace vln
