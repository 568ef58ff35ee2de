#include "domba/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"

#include "domba/common.hpp"
#include "domba/exposure.hpp"
#include "domba/logdist.hpp"
#include "domba/parallel.hpp"
#include "domba/pipeline.hpp"

namespace domba {

using nlohmann::json;

double pooled_perplexity(const std::vector<std::vector<TokenId>>& records,
                         const std::vector<const LanguageModel*>& models) {
  if (records.empty()) fail_validation("perplexity over an empty record set");
  if (records.size() != models.size()) {
    fail_validation("perplexity: records/models size mismatch");
  }
  std::vector<double> nll(records.size(), 0.0);
  std::size_t tokens = 0;
  for (const auto& record : records) tokens += record.size();
  if (tokens == 0) fail_validation("perplexity over zero tokens");

  parallel_for(records.size(), [&](std::size_t i) {
    nll[i] = models[i]->sequence_nll(records[i]);
  });
  double total = 0.0;
  for (double v : nll) total += v;
  return std::exp(total / static_cast<double>(tokens));
}

double perplexity(const LanguageModel& model,
                  const std::vector<std::vector<TokenId>>& records) {
  std::vector<const LanguageModel*> models(records.size(), &model);
  return pooled_perplexity(records, models);
}

ExposureMetric exposure_metric(
    const std::vector<std::vector<TokenId>>& records,
    const std::vector<const AggregatedModel*>& models, int percentile) {
  if (records.size() != models.size()) {
    fail_validation("exposure metric: records/models size mismatch");
  }
  if (percentile < 1 || percentile > 100) {
    fail_validation("percentile must be in [1, 100]");
  }

  std::vector<std::vector<double>> per_record(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const AggregatedModel& agg = *models[i];
    const std::size_t n = agg.vocabulary().size();
    std::vector<double> logp1(n), logp2(n), logpm(n);
    std::vector<TokenId> context;
    std::vector<double>& out = per_record[i];
    out.reserve(records[i].size());
    for (TokenId token : records[i]) {
      agg.m1().predict_logp(context, logp1);
      agg.m2().predict_logp(context, logp2);
      agg.aggregate_logp(logp1, logp2, logpm);
      const double rp1 = logp1[token] - mean_of(logp1);
      const double rp2 = logp2[token] - mean_of(logp2);
      const double rpm = logpm[token] - mean_of(logpm);
      out.push_back(rpm - std::min(rp1, rp2));
      context.push_back(token);
    }
  });

  std::vector<double> ratios;
  for (const auto& chunk : per_record) {
    ratios.insert(ratios.end(), chunk.begin(), chunk.end());
  }
  ExposureMetric metric;
  metric.observations = ratios.size();
  if (ratios.empty()) return metric;
  std::sort(ratios.begin(), ratios.end());
  metric.exp_max = std::exp(ratios.back());
  // nearest-rank percentile: smallest value covering >= p% of observations
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(ratios.size())));
  metric.exp_p99 = std::exp(ratios[rank == 0 ? 0 : rank - 1]);
  return metric;
}

std::vector<PhraseInstance> collect_phrase_instances(
    const AccessCorpus& corpus, const Vocabulary& vocabulary, Split split,
    const std::vector<std::string>& levels) {
  const std::set<std::string> wanted(levels.begin(), levels.end());
  std::vector<PhraseInstance> instances;
  for (const Record& record : corpus.records) {
    if (record.split != split || !wanted.count(record.access_level)) continue;
    for (const SensitiveSpan& span : record.sensitive_spans) {
      PhraseInstance instance;
      instance.context =
          vocabulary.ids(tokenize(record.text.substr(0, span.begin)));
      instance.phrase = vocabulary.ids(tokenize(span_text(record, span)));
      instance.level = record.access_level;
      if (!instance.phrase.empty()) instances.push_back(std::move(instance));
    }
  }
  return instances;
}

double secret_perplexity(const std::vector<PhraseInstance>& instances,
                         const ModelForLevel& model_for) {
  if (instances.empty()) {
    fail_validation("secret perplexity without sensitive spans");
  }
  std::vector<double> perp(instances.size());
  parallel_for(instances.size(), [&](std::size_t i) {
    const PhraseInstance& instance = instances[i];
    const LanguageModel& model = model_for(instance.level);
    const double nll = model.sequence_nll(instance.phrase, instance.context);
    perp[i] = std::exp(nll / static_cast<double>(instance.phrase.size()));
  });

  std::map<std::string, std::pair<double, std::size_t>> by_level;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto& [sum, count] = by_level[instances[i].level];
    sum += perp[i];
    ++count;
  }
  double total = 0.0;
  for (const auto& [level, agg] : by_level) {
    total += agg.first / static_cast<double>(agg.second);
  }
  return total / static_cast<double>(by_level.size());
}

SIADataset build_sia_dataset(const std::vector<PhraseInstance>& instances,
                             const std::vector<std::vector<TokenId>>& decoys,
                             std::uint64_t seed) {
  if (decoys.empty()) fail_validation("SIA needs a non-empty decoy pool");
  SIADataset dataset;
  Rng rng(seed);
  int pair_id = 0;
  for (const PhraseInstance& instance : instances) {
    SIAItem true_item;
    true_item.context = instance.context;
    true_item.phrase = instance.phrase;
    true_item.label = true;
    true_item.pair_id = pair_id;
    true_item.level = instance.level;

    SIAItem false_item = true_item;
    false_item.phrase = decoys[rng.uniform_int(decoys.size())];
    false_item.label = false;

    dataset.items.push_back(std::move(true_item));
    dataset.items.push_back(std::move(false_item));
    ++pair_id;
  }
  return dataset;
}

namespace {

void require_paired(const SIADataset& dataset) {
  std::map<int, std::pair<int, int>> pairs;  // pair_id -> (#true, #false)
  for (const SIAItem& item : dataset.items) {
    auto& [pos, neg] = pairs[item.pair_id];
    (item.label ? pos : neg) += 1;
  }
  for (const auto& [id, counts] : pairs) {
    if (counts.first != 1 || counts.second != 1) {
      fail_validation("SIA dataset is not paired: pair " + std::to_string(id));
    }
  }
  if (pairs.empty()) fail_validation("SIA dataset is empty");
}

double auc_midrank(const std::vector<std::pair<double, bool>>& scored) {
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].first < scored[b].first;
  });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() &&
           scored[order[j]].first == scored[order[i]].first) {
      ++j;
    }
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (scored[order[k]].second) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scored.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    fail_validation("AUC needs both labels present");
  }
  return (rank_sum_pos -
          static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

double secret_inference_attack(const ModelForLevel& target_for,
                               const LanguageModel& reference,
                               const SIADataset& dataset) {
  require_paired(dataset);
  std::vector<std::pair<double, bool>> scored(dataset.items.size());
  parallel_for(dataset.items.size(), [&](std::size_t i) {
    const SIAItem& item = dataset.items[i];
    const LanguageModel& target = target_for(item.level);
    const double target_nll = target.sequence_nll(item.phrase, item.context);
    const double reference_nll =
        reference.sequence_nll(item.phrase, item.context);
    const double score = (reference_nll - target_nll) /
                         static_cast<double>(item.phrase.size());
    scored[i] = {score, item.label};
  });
  return auc_midrank(scored);
}

CanaryResult canary_attack(const CanaryPlan& plan,
                           const ModelForLevel& model_for, int samples,
                           std::uint64_t seed) {
  if (plan.entries.empty()) fail_validation("canary plan is empty");
  if (plan.word_pool.empty()) fail_validation("canary plan lacks a word pool");
  if (samples < 1) fail_validation("canary attack needs samples >= 1");

  CanaryResult result;
  result.score_ceiling =
      std::log2(static_cast<double>(samples) + 1.0);

  // One shared candidate set; every level's model scores the same phrases.
  Rng rng(seed);
  const LanguageModel& first_model = model_for(plan.entries.front().level);
  const Vocabulary& vocab = first_model.vocabulary();
  std::vector<std::vector<TokenId>> candidates(samples);
  for (auto& candidate : candidates) {
    candidate.reserve(plan.phrase_words);
    for (int w = 0; w < plan.phrase_words; ++w) {
      candidate.push_back(
          vocab.id(plan.word_pool[rng.uniform_int(plan.word_pool.size())]));
    }
  }

  std::vector<double> scores;
  // Candidate scores depend only on the scoring model; levels that share a
  // model (every non-access-controlled one) share the scored set.
  const LanguageModel* scored_model = nullptr;
  std::vector<double> candidate_logp(candidates.size());
  for (const CanaryPlan::Entry& entry : plan.entries) {
    const LanguageModel& model = model_for(entry.level);
    std::vector<TokenId> canary_ids;
    for (const std::string& word : entry.words) {
      canary_ids.push_back(model.vocabulary().id(word));
    }
    const double canary_mean_logp =
        -model.sequence_nll(canary_ids) /
        static_cast<double>(canary_ids.size());

    if (scored_model != &model) {
      parallel_for(candidates.size(), [&](std::size_t i) {
        candidate_logp[i] = -model.sequence_nll(candidates[i]) /
                            static_cast<double>(candidates[i].size());
      });
      scored_model = &model;
    }
    std::size_t rank = 0;
    for (double logp : candidate_logp) {
      if (logp > canary_mean_logp) ++rank;
    }
    const double score =
        -std::log2((static_cast<double>(rank) + 1.0) /
                   (static_cast<double>(samples) + 1.0));
    result.per_level[entry.level] = score;
    scores.push_back(score);
  }

  std::sort(scores.begin(), scores.end());
  const std::size_t n = scores.size();
  result.median_score = (n % 2 == 1)
                            ? scores[n / 2]
                            : 0.5 * (scores[n / 2 - 1] + scores[n / 2]);
  return result;
}

const MetricValues* MetricsReport::find(const std::string& name) const {
  for (const auto& [model, values] : models) {
    if (model == name) return &values;
  }
  return nullptr;
}

bool ComparisonFilter::wants(const std::string& model) const {
  if (models.empty()) return true;
  return std::find(models.begin(), models.end(), model) != models.end();
}

namespace {

std::vector<std::vector<TokenId>> tokenize_records(
    const AccessCorpus& corpus, const Vocabulary& vocabulary, Split split,
    const std::vector<std::string>& levels,
    std::vector<std::string>* out_levels) {
  const std::set<std::string> wanted(levels.begin(), levels.end());
  std::vector<std::vector<TokenId>> records;
  for (const Record& record : corpus.records) {
    if (record.split != split || !wanted.count(record.access_level)) continue;
    records.push_back(vocabulary.ids(tokenize(record.text)));
    if (out_levels) out_levels->push_back(record.access_level);
  }
  return records;
}

}  // namespace

MetricsReport run_comparison(const ComparisonInputs& inputs,
                             const ComparisonConfig& config,
                             const ComparisonFilter& filter,
                             const ModelRegistry* prebuilt) {
  const std::vector<std::string>& trained = inputs.trained_levels;
  if (trained.size() < 2) fail_validation("need >= 2 trained access levels");

  const Vocabulary vocabulary =
      build_vocabulary(inputs.corpus, config.min_count);
  ModelConfig model_config{config.order, config.smoothing_alpha, config.weight,
                           config.min_count};

  // DOMBA registry over the trained levels.
  ModelRegistry registry =
      prebuilt ? *prebuilt
               : train_registry(inputs.corpus, vocabulary, trained,
                                model_config, config.partition_seed,
                                config.config_hash);

  // Reference model for the secret inference attack. The default trains on
  // background text from the held-out levels; "uniform" is the untrained
  // smoothed model. Fixed unit weight either way, so the training-weight
  // sweep leaves the reference untouched.
  std::shared_ptr<const NGramModel> reference;
  if (config.sia_reference == "uniform") {
    ModelMeta meta;
    meta.corpus_ids = "reference:uniform";
    reference = std::make_shared<NGramModel>(
        train_ngram(vocabulary, {}, config.order, config.smoothing_alpha, 1.0,
                    std::move(meta)));
  } else if (config.sia_reference == "holdout") {
    if (!inputs.holdout_levels.empty()) {
      ModelMeta meta;
      meta.corpus_ids = "reference:holdout";
      const auto sequences = training_sequences(
          inputs.corpus, vocabulary, inputs.holdout_levels, Split::train);
      if (!sequences.empty()) {
        reference = std::make_shared<NGramModel>(
            train_ngram(vocabulary, sequences, config.order,
                        config.smoothing_alpha, 1.0, std::move(meta)));
      }
    }
  } else {
    fail_validation("unknown sia_reference '" + config.sia_reference +
                    "' (expected holdout | uniform)");
  }

  const AccessCorpus trained_corpus = filter_levels(inputs.corpus, trained);
  BaselineSet baselines =
      build_baselines(trained_corpus, registry, vocabulary, model_config);

  // DOMBA per-level variants plus the INIT-only single aggregates.
  std::map<std::string, std::shared_ptr<AggregatedModel>> domba_variants;
  for (const std::string& level : trained) {
    domba_variants[level] = std::make_shared<AggregatedModel>(
        build_domba_model(registry, level, config.mean));
  }
  const auto d_i_h = std::make_shared<AggregatedModel>(
      build_init_model(registry, MeanSpec::harmonic()));
  const auto d_i_m = std::make_shared<AggregatedModel>(
      build_init_model(registry, MeanSpec::minimum()));

  // Evaluation data.
  std::vector<std::string> auppl_levels;
  const auto auppl_records = tokenize_records(
      inputs.corpus, vocabulary, Split::eval, trained, &auppl_levels);
  const auto hoppl_records =
      inputs.holdout_levels.empty()
          ? std::vector<std::vector<TokenId>>{}
          : tokenize_records(inputs.corpus, vocabulary, Split::eval,
                             inputs.holdout_levels, nullptr);
  const auto instances = collect_phrase_instances(inputs.corpus, vocabulary,
                                                  Split::eval, trained);
  std::vector<std::vector<TokenId>> decoy_ids;
  for (const std::string& decoy : inputs.decoys) {
    decoy_ids.push_back(vocabulary.ids(tokenize(decoy)));
  }
  SIADataset sia_dataset;
  if (!decoy_ids.empty() && !instances.empty()) {
    sia_dataset = build_sia_dataset(instances, decoy_ids, config.eval_seed);
  }

  // Cross-level rotation for security metrics on access-controlled models.
  const std::size_t k = trained.size();
  const std::size_t offset = 1 + config.eval_seed % (k - 1);
  std::map<std::string, std::size_t> level_index;
  for (std::size_t i = 0; i < k; ++i) level_index[trained[i]] = i;
  auto rotated = [&](const std::string& level) -> const std::string& {
    const auto it = level_index.find(level);
    const std::size_t i = it == level_index.end()
                              ? config.eval_seed % k
                              : (it->second + offset) % k;
    return trained[i];
  };

  struct Entry {
    std::string name;
    bool access_controlled = false;
    bool aggregate = false;
    bool trivially_secure = false;
    ModelForLevel own;    // utility: the variant authorized for the level
    ModelForLevel cross;  // security: a variant of a different level
    std::function<const AggregatedModel&(const std::string&)> agg_cross;
  };

  std::vector<Entry> entries;
  {
    Entry e;
    e.name = "FT-ALL";
    const LanguageModel& m = *baselines.ft_all;
    e.own = [&m](const std::string&) -> const LanguageModel& { return m; };
    e.cross = e.own;
    entries.push_back(std::move(e));
  }
  {
    Entry e;
    e.name = "AGG-A";
    e.aggregate = true;
    const AggregatedModel& m = *baselines.agg_a;
    e.own = [&m](const std::string&) -> const LanguageModel& { return m; };
    e.cross = e.own;
    e.agg_cross = [&m](const std::string&) -> const AggregatedModel& {
      return m;
    };
    entries.push_back(std::move(e));
  }
  for (const auto& [name, model] :
       std::initializer_list<std::pair<const char*, const AggregatedModel*>>{
           {"D-I-H", d_i_h.get()}, {"D-I-M", d_i_m.get()}}) {
    Entry e;
    e.name = name;
    e.aggregate = true;
    const AggregatedModel& m = *model;
    e.own = [&m](const std::string&) -> const LanguageModel& { return m; };
    e.cross = e.own;
    e.agg_cross = [&m](const std::string&) -> const AggregatedModel& {
      return m;
    };
    entries.push_back(std::move(e));
  }
  {
    Entry e;
    e.name = "Per-AL";
    e.access_controlled = true;
    e.trivially_secure = true;
    const auto& per_level = baselines.per_level;
    const auto& rot = rotated;
    e.own = [&per_level, &rot, &trained](const std::string& level)
        -> const LanguageModel& {
      const auto it = per_level.find(level);
      return it != per_level.end() ? *it->second
                                   : *per_level.at(rot(level));
    };
    e.cross = [&per_level, &rot](const std::string& level)
        -> const LanguageModel& { return *per_level.at(rot(level)); };
    entries.push_back(std::move(e));
  }
  {
    Entry e;
    e.name = "DOMBA";
    e.access_controlled = true;
    e.aggregate = true;
    const auto& variants = domba_variants;
    const auto& rot = rotated;
    e.own = [&variants, &rot](const std::string& level)
        -> const LanguageModel& {
      const auto it = variants.find(level);
      return it != variants.end() ? *it->second : *variants.at(rot(level));
    };
    e.cross = [&variants, &rot](const std::string& level)
        -> const LanguageModel& { return *variants.at(rot(level)); };
    e.agg_cross = [&variants, &rot](const std::string& level)
        -> const AggregatedModel& { return *variants.at(rot(level)); };
    entries.push_back(std::move(e));
  }

  MetricsReport report;
  report.config_hash = config.config_hash;
  report.corpus_seed = inputs.corpus_seed;
  report.partition_seed = config.partition_seed;
  report.eval_seed = config.eval_seed;
  report.weight = config.weight;
  report.mean = config.mean.to_string();

  for (const Entry& entry : entries) {
    if (!filter.wants(entry.name)) continue;
    MetricValues values;

    if (filter.utility) {
      if (!auppl_records.empty()) {
        std::vector<const LanguageModel*> models;
        models.reserve(auppl_records.size());
        for (const std::string& level : auppl_levels) {
          models.push_back(&entry.own(level));
        }
        values.auppl = pooled_perplexity(auppl_records, models);
      }
      if (!hoppl_records.empty()) {
        std::vector<const LanguageModel*> models;
        models.reserve(hoppl_records.size());
        for (std::size_t i = 0; i < hoppl_records.size(); ++i) {
          // round-robin variant choice for access-controlled models
          models.push_back(&entry.own(trained[(i + offset) % k]));
        }
        values.hoppl = pooled_perplexity(hoppl_records, models);
      }
    }

    const bool security = !entry.trivially_secure;
    if (security && filter.exposure && entry.aggregate &&
        !auppl_records.empty()) {
      std::vector<const AggregatedModel*> models;
      models.reserve(auppl_records.size());
      for (const std::string& level : auppl_levels) {
        models.push_back(&entry.agg_cross(level));
      }
      const ExposureMetric exp =
          exposure_metric(auppl_records, models, config.percentile);
      values.exp_max = exp.exp_max;
      values.exp_p99 = exp.exp_p99;
    }
    if (security && filter.sppl && !instances.empty()) {
      values.sppl = secret_perplexity(instances, entry.cross);
    }
    if (security && filter.sia && reference && !sia_dataset.items.empty()) {
      values.sia_auc =
          secret_inference_attack(entry.cross, *reference, sia_dataset);
    }
    if (security && filter.canary && !inputs.canary.entries.empty()) {
      values.can_score =
          canary_attack(inputs.canary, entry.cross,
                        config.canary_reference_samples, config.eval_seed)
              .median_score;
    }
    report.models.emplace_back(entry.name, values);
  }
  return report;
}

namespace {

std::string format_value(const std::optional<double>& value,
                         bool wide_range = false) {
  if (!value) return "-";
  char buffer[40];
  if (wide_range) {
    std::snprintf(buffer, sizeof(buffer), "%.3g", *value);
  } else {
    std::snprintf(buffer, sizeof(buffer), "%.2f", *value);
  }
  return std::string(buffer);
}

}  // namespace

std::string render_metrics_table(const MetricsReport& report) {
  const std::vector<std::string> headers = {"model",   "HOPPL", "AUPPL",
                                            "EXP-MAX", "EXP-99", "SPPL",
                                            "SIA",     "CAN"};
  std::vector<std::vector<std::string>> rows;
  rows.push_back(headers);
  for (const auto& [name, v] : report.models) {
    rows.push_back({name, format_value(v.hoppl), format_value(v.auppl),
                    format_value(v.exp_max, true), format_value(v.exp_p99, true),
                    format_value(v.sppl), format_value(v.sia_auc),
                    format_value(v.can_score)});
  }
  std::vector<std::size_t> widths(headers.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      if (c + 1 < row.size()) {
        out.append(widths[c] - row[c].size() + 2, ' ');
      }
    }
    out += '\n';
  }
  return out;
}

namespace {

json values_to_json(const MetricValues& v) {
  json out;
  auto put = [&out](const char* key, const std::optional<double>& value) {
    if (value) {
      out[key] = *value;
    } else {
      out[key] = nullptr;
    }
  };
  put("hoppl", v.hoppl);
  put("auppl", v.auppl);
  put("exp_max", v.exp_max);
  put("exp_p99", v.exp_p99);
  put("sppl", v.sppl);
  put("sia_auc", v.sia_auc);
  put("can_score", v.can_score);
  return out;
}

}  // namespace

void save_metrics_json(const MetricsReport& report,
                       const std::filesystem::path& path) {
  json doc;
  doc["config_hash"] = report.config_hash;
  doc["corpus_seed"] = report.corpus_seed;
  doc["partition_seed"] = report.partition_seed;
  doc["eval_seed"] = report.eval_seed;
  doc["weight"] = report.weight;
  doc["mean"] = report.mean;
  json models = json::object();
  json order = json::array();
  for (const auto& [name, values] : report.models) {
    models[name] = values_to_json(values);
    order.push_back(name);
  }
  doc["models"] = models;
  doc["model_order"] = order;
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot write metrics report: " + path.string());
  out << doc.dump(2) << "\n";
}

void save_metrics_csv(const std::vector<MetricsReport>& reports,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot write metrics csv: " + path.string());
  out << "model,weight,metric,value\n";
  char buffer[64];
  for (const MetricsReport& report : reports) {
    for (const auto& [name, v] : report.models) {
      const std::initializer_list<std::pair<const char*, const std::optional<double>*>>
          metrics = {{"hoppl", &v.hoppl},     {"auppl", &v.auppl},
                     {"exp_max", &v.exp_max}, {"exp_p99", &v.exp_p99},
                     {"sppl", &v.sppl},       {"sia_auc", &v.sia_auc},
                     {"can_score", &v.can_score}};
      for (const auto& [metric, value] : metrics) {
        if (!*value) continue;
        std::snprintf(buffer, sizeof(buffer), "%.17g", **value);
        out << name << ',' << report.weight << ',' << metric << ',' << buffer
            << "\n";
      }
    }
  }
}

}  // namespace domba
