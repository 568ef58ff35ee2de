#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "domba/corpus.hpp"

namespace domba {

using TokenId = std::uint32_t;

// Closed token set. Ids are dense in [0, n), stable across serialization.
// Two reserved ids: BOS (sequence start padding) and UNK (out of vocabulary).
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr const char* kBosToken = "<bos>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() = default;

  // corpus_tokens must be distinct and must not contain the reserved tokens;
  // they receive ids 2, 3, ... in the given order.
  explicit Vocabulary(std::vector<std::string> corpus_tokens);

  std::size_t size() const { return tokens_.size(); }

  // UNK for unknown strings.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;

  std::vector<TokenId> ids(const std::vector<std::string>& tokens) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Whitespace split, ASCII lowercasing, punctuation split off as single-char
// tokens ("don't" -> "don", "'", "t").
std::vector<std::string> tokenize(std::string_view text);

// Vocabulary over every token with corpus frequency >= min_count, ordered by
// descending frequency with lexicographic tie-break, after BOS and UNK.
Vocabulary build_vocabulary(const AccessCorpus& corpus, int min_count);

}  // namespace domba
