#pragma once

#include <memory>
#include <span>

#include "domba/common.hpp"
#include "domba/language_model.hpp"
#include "domba/mean.hpp"
#include "domba/ngram.hpp"

namespace domba {

// DAGG kernel: applies the mean to the two relative-probability vectors and
// renormalizes. Inputs need not be normalized; centering cancels any common
// scale factor.
void dagg_combine(const MeanSpec& mean, std::span<const double> logp1,
                  std::span<const double> logp2, std::span<double> out);

// AGG-A kernel: log((p1 + p2) / 2) per token, normalized when the inputs are.
void arithmetic_combine(std::span<const double> logp1,
                        std::span<const double> logp2, std::span<double> out);

// Two submodels balanced into one model.
//   relative:          p(t) ~ f(rp1(t), rp2(t)), renormalized (DAGG)
//   absolute_baseline: p(t) = (p1(t) + p2(t)) / 2 (AGG-A)
class AggregatedModel final : public LanguageModel {
 public:
  enum class Mode { relative, absolute_baseline };

  AggregatedModel(std::shared_ptr<const LanguageModel> m1,
                  std::shared_ptr<const LanguageModel> m2, MeanSpec mean,
                  Mode mode);

  const Vocabulary& vocabulary() const override { return m1_->vocabulary(); }
  const LanguageModel& m1() const { return *m1_; }
  const LanguageModel& m2() const { return *m2_; }
  const MeanSpec& mean() const { return mean_; }
  Mode mode() const { return mode_; }

  void predict_logp(std::span<const TokenId> context,
                    std::span<double> out) const override;

  // O(counted) scoring over n-gram submodels: their distributions are a
  // floor plus a few exceptions, so mean and normalizer reduce to short
  // sums. Falls back to the dense path for other submodel types.
  double sequence_nll(std::span<const TokenId> tokens,
                      std::span<const TokenId> prefix = {}) const override;

  // Pure aggregation kernel over two log distributions. Inputs need not be
  // normalized in relative mode; the centering step cancels any common scale.
  void aggregate_logp(std::span<const double> logp1,
                      std::span<const double> logp2,
                      std::span<double> out) const;

  LogDistribution aggregate(const LogDistribution& d1,
                            const LogDistribution& d2) const;

 private:
  std::shared_ptr<const LanguageModel> m1_;
  std::shared_ptr<const LanguageModel> m2_;
  MeanSpec mean_;
  Mode mode_;
};

// Softmax(logp / temperature) sampling by inverse CDF in token-id order;
// deterministic for a given rng state. temperature == 0 means argmax
// (first maximum wins).
TokenId sample_token(const LogDistribution& dist, double temperature,
                     Rng& rng);

}  // namespace domba
