#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "domba/language_model.hpp"
#include "domba/logdist.hpp"
#include "domba/vocabulary.hpp"

namespace domba {

struct ModelMeta {
  std::string corpus_ids;  // training provenance, free-form
  double weight = 1.0;     // epochs-equivalent training weight
  std::uint64_t seed = 0;
};

struct ContextCounts {
  double total = 0.0;
  std::unordered_map<TokenId, double> per_token;
};

struct ContextKeyHash {
  std::size_t operator()(const std::vector<TokenId>& key) const;
};

using CountsMap =
    std::unordered_map<std::vector<TokenId>, ContextCounts, ContextKeyHash>;

// Add-alpha smoothed n-gram model. `order` is the context window in tokens:
// predictions condition on the last `order` tokens of the BOS-padded context.
// Interpolation-free: an unseen context backs off to the uniform smoothed
// distribution. Immutable through the public surface once trained.
class NGramModel final : public LanguageModel {
 public:
  NGramModel(Vocabulary vocabulary, int order, double smoothing_alpha,
             ModelMeta meta = {});

  const Vocabulary& vocabulary() const override { return vocabulary_; }
  int order() const { return order_; }
  double smoothing_alpha() const { return alpha_; }
  const ModelMeta& meta() const { return meta_; }
  const CountsMap& counts() const { return counts_; }

  void predict_logp(std::span<const TokenId> context,
                    std::span<double> out) const override;

  // The smoothed distribution at a context is a floor plus one exception per
  // counted token; this view exposes that structure so sequence scoring and
  // aggregation can run in O(counted) instead of O(n).
  struct ContextView {
    bool seen = false;         // context has positive total count
    double log_z = 0.0;        // log(total + n * alpha), valid when seen
    double floor_logp = 0.0;   // log p of any uncounted token
    const ContextCounts* counts = nullptr;  // null when !seen
  };
  ContextView context_view(std::span<const TokenId> context) const;
  double token_logp(std::span<const TokenId> context, TokenId token) const;

  double sequence_nll(std::span<const TokenId> tokens,
                      std::span<const TokenId> prefix = {}) const override;

  // Accumulates weight * (occurrence counts) for every position of the
  // sequence, contexts BOS-padded.
  void add_sequence(std::span<const TokenId> sequence, double weight);
  void add_counts(const CountsMap& other, double weight);

  double count(std::span<const TokenId> context, TokenId token) const;
  double context_total(std::span<const TokenId> context) const;

 private:
  Vocabulary vocabulary_;
  int order_;
  double alpha_;
  ModelMeta meta_;
  CountsMap counts_;

  friend NGramModel load_model(const std::filesystem::path&);
};

// order >= 1, smoothing_alpha >= 1e-6, weight > 0. An empty slice yields a
// valid model that predicts the uniform smoothed distribution everywhere.
NGramModel train_ngram(Vocabulary vocabulary,
                       const std::vector<std::vector<TokenId>>& sequences,
                       int order, double smoothing_alpha, double weight,
                       ModelMeta meta = {});

// base.counts plus weight-scaled counts of the extra sequences; base is
// untouched. Tokens outside the base vocabulary are rejected.
NGramModel merge_finetune(const NGramModel& base,
                          const std::vector<std::vector<TokenId>>& extra,
                          double weight,
                          const ModelMeta* meta_override = nullptr);

// Versioned binary container, byte-exact across round trips. See
// docs in README for the layout.
void save_model(const NGramModel& model, const std::filesystem::path& path);
NGramModel load_model(const std::filesystem::path& path);

}  // namespace domba
