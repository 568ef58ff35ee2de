#include "domba/language_model.hpp"

namespace domba {

LogDistribution LanguageModel::predict_ids(
    std::span<const TokenId> context) const {
  LogDistribution dist;
  dist.logp.resize(vocabulary().size());
  predict_logp(context, dist.logp);
  return dist;
}

LogDistribution LanguageModel::predict(
    const std::vector<std::string>& context) const {
  return predict_ids(vocabulary().ids(context));
}

double LanguageModel::sequence_nll(std::span<const TokenId> tokens,
                                   std::span<const TokenId> prefix) const {
  std::vector<TokenId> context(prefix.begin(), prefix.end());
  std::vector<double> logp(vocabulary().size());
  double nll = 0.0;
  for (TokenId token : tokens) {
    predict_logp(context, logp);
    nll -= logp[token];
    context.push_back(token);
  }
  return nll;
}

}  // namespace domba
