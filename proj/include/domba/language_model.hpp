#pragma once

#include <span>
#include <vector>

#include "domba/logdist.hpp"
#include "domba/vocabulary.hpp"

namespace domba {

// Next-token model contract: a full log-probability distribution over the
// vocabulary for any context. Implementations are immutable after
// construction; concurrent predict calls are safe.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  // Fills out (size n) with the log distribution for the context.
  virtual void predict_logp(std::span<const TokenId> context,
                            std::span<double> out) const = 0;

  LogDistribution predict_ids(std::span<const TokenId> context) const;
  LogDistribution predict(const std::vector<std::string>& context) const;

  // Sum of -log p over the sequence tokens, each conditioned on the BOS-padded
  // prefix (optionally seeded with a fixed context prefix). Virtual so models
  // with sparse structure can skip materializing full distributions.
  virtual double sequence_nll(std::span<const TokenId> tokens,
                              std::span<const TokenId> prefix = {}) const;
};

}  // namespace domba
