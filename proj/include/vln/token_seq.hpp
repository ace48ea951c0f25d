#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vln {

using TokenId = std::uint32_t;

// One tokenized instruction; `tokens` ends with the sequence-end marker.
struct TokenSeq {
  std::vector<TokenId> tokens;
  std::string raw_text;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenSeq&) const = default;
};

}  // namespace vln
