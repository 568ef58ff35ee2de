#include "domba/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "domba/exposure.hpp"
#include "domba/logdist.hpp"

namespace domba {

AggregatedModel::AggregatedModel(std::shared_ptr<const LanguageModel> m1,
                                 std::shared_ptr<const LanguageModel> m2,
                                 MeanSpec mean, Mode mode)
    : m1_(std::move(m1)), m2_(std::move(m2)), mean_(mean), mode_(mode) {
  if (!m1_ || !m2_) fail_validation("aggregated model needs two submodels");
  if (!(m1_->vocabulary() == m2_->vocabulary())) {
    fail_validation("submodel vocabularies differ");
  }
  if (mode_ == Mode::absolute_baseline &&
      mean_.kind() != MeanSpec::Kind::arithmetic_baseline) {
    fail_validation("absolute mode is the arithmetic-mean baseline only");
  }
}

void dagg_combine(const MeanSpec& mean, std::span<const double> logp1,
                  std::span<const double> logp2, std::span<double> out) {
  if (logp1.size() != logp2.size() || logp1.size() != out.size()) {
    fail_validation("aggregation size mismatch");
  }
  const double tp1 = mean_of(logp1);
  const double tp2 = mean_of(logp2);
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = mean.apply_log(logp1[t] - tp1, logp2[t] - tp2);
  }
  const double norm = log_sum_exp(out);
  for (double& v : out) v -= norm;
}

void arithmetic_combine(std::span<const double> logp1,
                        std::span<const double> logp2, std::span<double> out) {
  if (logp1.size() != logp2.size() || logp1.size() != out.size()) {
    fail_validation("aggregation size mismatch");
  }
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = log_add_exp(logp1[t], logp2[t]) - 0.6931471805599453;
  }
}

void AggregatedModel::aggregate_logp(std::span<const double> logp1,
                                     std::span<const double> logp2,
                                     std::span<double> out) const {
  if (mode_ == Mode::absolute_baseline) {
    arithmetic_combine(logp1, logp2, out);
    return;
  }
  dagg_combine(mean_, logp1, logp2, out);
}

LogDistribution AggregatedModel::aggregate(const LogDistribution& d1,
                                           const LogDistribution& d2) const {
  LogDistribution out;
  out.context_id = d1.context_id;
  out.logp.resize(d1.size());
  aggregate_logp(d1.logp, d2.logp, out.logp);
  return out;
}

void AggregatedModel::predict_logp(std::span<const TokenId> context,
                                   std::span<double> out) const {
  thread_local std::vector<double> logp1, logp2;
  logp1.resize(out.size());
  logp2.resize(out.size());
  m1_->predict_logp(context, logp1);
  m2_->predict_logp(context, logp2);
  aggregate_logp(logp1, logp2, out);
}

namespace {

double view_logp(const NGramModel::ContextView& view, double alpha,
                 TokenId token) {
  if (!view.seen) return view.floor_logp;
  const auto it = view.counts->per_token.find(token);
  if (it == view.counts->per_token.end()) return view.floor_logp;
  return std::log(it->second + alpha) - view.log_z;
}

// mean over the vocabulary = floor + sum of counted deviations / n
double view_mean(const NGramModel::ContextView& view, double alpha,
                 std::size_t n) {
  if (!view.seen) return view.floor_logp;
  double deviations = 0.0;
  for (const auto& [token, count] : view.counts->per_token) {
    deviations += std::log(count + alpha) - view.log_z - view.floor_logp;
  }
  return view.floor_logp + deviations / static_cast<double>(n);
}

}  // namespace

double AggregatedModel::sequence_nll(std::span<const TokenId> tokens,
                                     std::span<const TokenId> prefix) const {
  const auto* a = dynamic_cast<const NGramModel*>(m1_.get());
  const auto* b = dynamic_cast<const NGramModel*>(m2_.get());
  if (!a || !b) return LanguageModel::sequence_nll(tokens, prefix);

  const std::size_t n = vocabulary().size();
  const double alpha_a = a->smoothing_alpha();
  const double alpha_b = b->smoothing_alpha();
  std::vector<TokenId> context(prefix.begin(), prefix.end());
  double nll = 0.0;
  for (TokenId token : tokens) {
    const NGramModel::ContextView va = a->context_view(context);
    const NGramModel::ContextView vb = b->context_view(context);

    if (mode_ == Mode::absolute_baseline) {
      nll -= log_add_exp(view_logp(va, alpha_a, token),
                         view_logp(vb, alpha_b, token)) -
             0.6931471805599453;
      context.push_back(token);
      continue;
    }

    const double mean_a = view_mean(va, alpha_a, n);
    const double mean_b = view_mean(vb, alpha_b, n);
    const double base =
        mean_.apply_log(va.floor_logp - mean_a, vb.floor_logp - mean_b);

    // Normalizer over: counted exceptions of either submodel, plus the
    // remaining both-floor tokens which all share `base`.
    thread_local std::vector<double> combined;
    combined.clear();
    std::size_t exceptions = 0;
    double token_value = std::numeric_limits<double>::quiet_NaN();
    auto add_exception = [&](TokenId t) {
      const double value =
          mean_.apply_log(view_logp(va, alpha_a, t) - mean_a,
                          view_logp(vb, alpha_b, t) - mean_b);
      combined.push_back(value);
      ++exceptions;
      if (t == token) token_value = value;
    };
    if (va.seen) {
      for (const auto& [t, count] : va.counts->per_token) add_exception(t);
    }
    if (vb.seen) {
      for (const auto& [t, count] : vb.counts->per_token) {
        if (va.seen && va.counts->per_token.count(t)) continue;
        add_exception(t);
      }
    }
    if (std::isnan(token_value)) token_value = base;

    double maximum = base;
    for (double v : combined) maximum = std::max(maximum, v);
    double sum = static_cast<double>(n - exceptions) * std::exp(base - maximum);
    for (double v : combined) sum += std::exp(v - maximum);
    const double lse = maximum + std::log(sum);

    nll -= token_value - lse;
    context.push_back(token);
  }
  return nll;
}

TokenId sample_token(const LogDistribution& dist, double temperature,
                     Rng& rng) {
  if (temperature < 0.0) fail_validation("temperature must be >= 0");
  const std::size_t n = dist.size();
  if (n == 0) fail_validation("cannot sample from an empty distribution");

  if (temperature == 0.0) {
    // argmax, first maximum wins
    std::size_t best = 0;
    for (std::size_t t = 1; t < n; ++t) {
      if (dist.logp[t] > dist.logp[best]) best = t;
    }
    return static_cast<TokenId>(best);
  }

  std::vector<double> scaled(n);
  for (std::size_t t = 0; t < n; ++t) scaled[t] = dist.logp[t] / temperature;
  const double norm = log_sum_exp(scaled);

  // Inverse CDF in token-id order.
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    cumulative += std::exp(scaled[t] - norm);
    if (u < cumulative) return static_cast<TokenId>(t);
  }
  return static_cast<TokenId>(n - 1);  // rounding left u >= cumulative
}

}  // namespace domba
