#include "domba/ngram.hpp"

#include <algorithm>
#include <cmath>

#include "domba/common.hpp"

namespace domba {

namespace {
constexpr double kMinAlpha = 1e-6;  // keeps every log-probability bounded
}

std::size_t ContextKeyHash::operator()(const std::vector<TokenId>& key) const {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (TokenId id : key) {
    for (int shift = 0; shift < 32; shift += 8) {
      hash ^= (id >> shift) & 0xffu;
      hash *= 0x100000001b3ull;
    }
  }
  return static_cast<std::size_t>(hash);
}

NGramModel::NGramModel(Vocabulary vocabulary, int order,
                       double smoothing_alpha, ModelMeta meta)
    : vocabulary_(std::move(vocabulary)),
      order_(order),
      alpha_(smoothing_alpha),
      meta_(std::move(meta)) {
  if (order_ < 1) fail_validation("ngram order must be >= 1");
  if (!(alpha_ >= kMinAlpha)) {
    fail_validation("smoothing alpha must be >= 1e-6");
  }
  if (vocabulary_.size() < 2) fail_validation("vocabulary must have n >= 2");
}

NGramModel::ContextView NGramModel::context_view(
    std::span<const TokenId> context) const {
  // Last `order` tokens of the BOS-padded context.
  thread_local std::vector<TokenId> key;
  key.assign(static_cast<std::size_t>(order_), Vocabulary::kBos);
  const std::size_t take = std::min(context.size(), key.size());
  for (std::size_t i = 0; i < take; ++i) {
    key[key.size() - take + i] = context[context.size() - take + i];
  }

  ContextView view;
  const auto it = counts_.find(key);
  if (it == counts_.end() || it->second.total <= 0.0) {
    // Backoff: uniform smoothed distribution.
    view.floor_logp = -std::log(static_cast<double>(vocabulary_.size()));
    return view;
  }
  view.seen = true;
  view.log_z = std::log(it->second.total +
                        alpha_ * static_cast<double>(vocabulary_.size()));
  view.floor_logp = std::log(alpha_) - view.log_z;
  view.counts = &it->second;
  return view;
}

void NGramModel::predict_logp(std::span<const TokenId> context,
                              std::span<double> out) const {
  if (out.size() != vocabulary_.size()) {
    fail_validation("predict output size mismatch");
  }
  const ContextView view = context_view(context);
  std::fill(out.begin(), out.end(), view.floor_logp);
  if (!view.seen) return;
  for (const auto& [token, count] : view.counts->per_token) {
    out[token] = std::log(count + alpha_) - view.log_z;
  }
}

double NGramModel::token_logp(std::span<const TokenId> context,
                              TokenId token) const {
  const ContextView view = context_view(context);
  if (!view.seen) return view.floor_logp;
  const auto it = view.counts->per_token.find(token);
  if (it == view.counts->per_token.end()) return view.floor_logp;
  return std::log(it->second + alpha_) - view.log_z;
}

double NGramModel::sequence_nll(std::span<const TokenId> tokens,
                                std::span<const TokenId> prefix) const {
  std::vector<TokenId> context(prefix.begin(), prefix.end());
  double nll = 0.0;
  for (TokenId token : tokens) {
    nll -= token_logp(context, token);
    context.push_back(token);
  }
  return nll;
}

void NGramModel::add_sequence(std::span<const TokenId> sequence,
                              double weight) {
  std::vector<TokenId> window(static_cast<std::size_t>(order_),
                              Vocabulary::kBos);
  for (TokenId token : sequence) {
    if (token >= vocabulary_.size()) {
      fail_validation("token id outside the model vocabulary");
    }
    ContextCounts& ctx = counts_[window];
    ctx.per_token[token] += weight;
    ctx.total += weight;
    // slide the window
    std::rotate(window.begin(), window.begin() + 1, window.end());
    window.back() = token;
  }
}

void NGramModel::add_counts(const CountsMap& other, double weight) {
  for (const auto& [key, ctx] : other) {
    ContextCounts& mine = counts_[key];
    for (const auto& [token, count] : ctx.per_token) {
      mine.per_token[token] += weight * count;
    }
    mine.total += weight * ctx.total;
  }
}

double NGramModel::count(std::span<const TokenId> context,
                         TokenId token) const {
  const auto it =
      counts_.find(std::vector<TokenId>(context.begin(), context.end()));
  if (it == counts_.end()) return 0.0;
  const auto jt = it->second.per_token.find(token);
  return jt == it->second.per_token.end() ? 0.0 : jt->second;
}

double NGramModel::context_total(std::span<const TokenId> context) const {
  const auto it =
      counts_.find(std::vector<TokenId>(context.begin(), context.end()));
  return it == counts_.end() ? 0.0 : it->second.total;
}

NGramModel train_ngram(Vocabulary vocabulary,
                       const std::vector<std::vector<TokenId>>& sequences,
                       int order, double smoothing_alpha, double weight,
                       ModelMeta meta) {
  if (weight <= 0.0) fail_validation("training weight must be > 0");
  meta.weight = weight;
  NGramModel model(std::move(vocabulary), order, smoothing_alpha,
                   std::move(meta));
  for (const auto& sequence : sequences) model.add_sequence(sequence, weight);
  return model;
}

NGramModel merge_finetune(const NGramModel& base,
                          const std::vector<std::vector<TokenId>>& extra,
                          double weight, const ModelMeta* meta_override) {
  if (weight <= 0.0) fail_validation("fine-tune weight must be > 0");
  NGramModel out(base.vocabulary(), base.order(), base.smoothing_alpha(),
                 meta_override ? *meta_override : base.meta());
  out.add_counts(base.counts(), 1.0);
  for (const auto& sequence : extra) out.add_sequence(sequence, weight);
  return out;
}

}  // namespace domba
