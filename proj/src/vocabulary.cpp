#include "domba/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "domba/common.hpp"

namespace domba {

Vocabulary::Vocabulary(std::vector<std::string> corpus_tokens) {
  tokens_.reserve(corpus_tokens.size() + 2);
  tokens_.push_back(kBosToken);
  tokens_.push_back(kUnkToken);
  for (std::string& token : corpus_tokens) tokens_.push_back(std::move(token));
  index_.reserve(tokens_.size());
  for (TokenId id = 0; id < tokens_.size(); ++id) {
    auto [it, inserted] = index_.emplace(tokens_[id], id);
    if (!inserted) fail_validation("duplicate token in vocabulary: " + tokens_[id]);
  }
  if (tokens_.size() < 2) fail_validation("vocabulary needs at least 2 tokens");
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) fail_validation("token id out of range");
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

std::vector<TokenId> Vocabulary::ids(
    const std::vector<std::string>& tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const std::string& token : tokens) out.push_back(id(token));
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
    } else if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      // punctuation becomes its own token
      if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
      tokens.push_back(std::string(1, raw));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary build_vocabulary(const AccessCorpus& corpus, int min_count) {
  if (corpus.empty()) fail_validation("empty corpus");
  std::map<std::string, long long> frequency;
  for (const Record& record : corpus.records) {
    for (std::string& token : tokenize(record.text)) ++frequency[token];
  }
  std::vector<std::pair<std::string, long long>> kept;
  kept.reserve(frequency.size());
  for (auto& [token, count] : frequency) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> ordered;
  ordered.reserve(kept.size());
  for (auto& [token, count] : kept) ordered.push_back(token);
  return Vocabulary(std::move(ordered));
}

}  // namespace domba
