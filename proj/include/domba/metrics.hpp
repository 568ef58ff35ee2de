#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "domba/aggregate.hpp"
#include "domba/corpus.hpp"
#include "domba/language_model.hpp"
#include "domba/pipeline.hpp"
#include "domba/synth.hpp"
#include "domba/vocabulary.hpp"

namespace domba {

// Picks the model that scores data of a given access level. Non-access-
// controlled models return themselves; access-controlled ones return a
// variant (for security metrics: a variant of a different level).
using ModelForLevel =
    std::function<const LanguageModel&(const std::string& data_level)>;

// exp((1/|tokens|) * sum of per-token NLL); |D_e| counts tokens, not records.
// Throws on an empty record set.
double perplexity(const LanguageModel& model,
                  const std::vector<std::vector<TokenId>>& records);

// Same pooled NLL with a per-record model choice.
double pooled_perplexity(const std::vector<std::vector<TokenId>>& records,
                         const std::vector<const LanguageModel*>& models);

struct ExposureMetric {
  double exp_max = 1.0;  // linear space
  double exp_p99 = 1.0;  // nearest-rank percentile
  std::size_t observations = 0;
};

// rp_M(t|c) / min(rp_M1(t|c), rp_M2(t|c)) for every token occurrence in the
// records, each record scored under its assigned aggregate.
ExposureMetric exposure_metric(
    const std::vector<std::vector<TokenId>>& records,
    const std::vector<const AggregatedModel*>& models, int percentile = 99);

struct PhraseInstance {
  std::vector<TokenId> context;
  std::vector<TokenId> phrase;
  std::string level;
};

std::vector<PhraseInstance> collect_phrase_instances(
    const AccessCorpus& corpus, const Vocabulary& vocabulary, Split split,
    const std::vector<std::string>& levels);

// Mean per-instance phrase perplexity per level, then the unweighted average
// across levels. Throws when no instances are given.
double secret_perplexity(const std::vector<PhraseInstance>& instances,
                         const ModelForLevel& model_for);

struct SIAItem {
  std::vector<TokenId> context;
  std::vector<TokenId> phrase;
  bool label = false;  // true = sensitive phrase
  int pair_id = 0;
  std::string level;
};

struct SIADataset {
  std::vector<SIAItem> items;
};

// One false counterpart per true tuple: the sensitive phrase is replaced by a
// decoy of the same shape that is sensitive for no level.
SIADataset build_sia_dataset(const std::vector<PhraseInstance>& instances,
                             const std::vector<std::vector<TokenId>>& decoys,
                             std::uint64_t seed);

// Scores every tuple by the mean per-token log ratio target/reference and
// returns the AUC-ROC (midrank ties). Throws on an unpaired dataset.
double secret_inference_attack(const ModelForLevel& target_for,
                               const LanguageModel& reference,
                               const SIADataset& dataset);

struct CanaryResult {
  double median_score = 0.0;
  std::map<std::string, double> per_level;
  double score_ceiling = 0.0;  // log2(samples + 1)
};

// Rank of each canary's mean log-probability among `samples` random phrases
// of the same length drawn uniformly from the plan's word pool;
// score = -log2((rank + 1) / (samples + 1)); median across levels.
CanaryResult canary_attack(const CanaryPlan& plan,
                           const ModelForLevel& model_for, int samples,
                           std::uint64_t seed);

struct MetricValues {
  std::optional<double> hoppl;
  std::optional<double> auppl;
  std::optional<double> exp_max;
  std::optional<double> exp_p99;
  std::optional<double> sppl;
  std::optional<double> sia_auc;
  std::optional<double> can_score;
};

struct MetricsReport {
  // model name -> metric values, in comparison order
  std::vector<std::pair<std::string, MetricValues>> models;
  std::string config_hash;
  std::uint64_t corpus_seed = 0;
  std::uint64_t partition_seed = 0;
  std::uint64_t eval_seed = 0;
  double weight = 1.0;
  std::string mean;

  const MetricValues* find(const std::string& name) const;
};

// Which models / metric groups a comparison run covers (the sweep driver
// narrows this to keep runs cheap).
struct ComparisonFilter {
  std::vector<std::string> models;  // empty = all six
  bool utility = true;
  bool exposure = true;
  bool sppl = true;
  bool sia = true;
  bool canary = true;

  bool wants(const std::string& model) const;
};

struct ComparisonInputs {
  AccessCorpus corpus;  // canaries already injected
  std::vector<std::string> trained_levels;
  std::vector<std::string> holdout_levels;
  std::map<std::string, std::vector<std::string>> planted;
  std::vector<std::string> decoys;
  CanaryPlan canary;
  std::uint64_t corpus_seed = 0;
};

struct ComparisonConfig {
  int order = 2;
  double smoothing_alpha = 0.1;
  double weight = 1.0;
  int min_count = 1;
  std::uint64_t partition_seed = 42;
  std::uint64_t eval_seed = 11;
  MeanSpec mean = MeanSpec::minimum();
  std::string sia_reference = "holdout";  // or "uniform"
  int canary_reference_samples = 10000;
  int percentile = 99;
  std::string config_hash;
};

// Trains/builds FT-ALL, AGG-A, D-I-H, D-I-M, Per-AL and DOMBA and computes
// every applicable metric. EXP only for aggregating models; security metrics
// skipped for Per-AL (trivially secure). A prebuilt registry (from a train
// run) is reused when given; otherwise one is trained in place.
MetricsReport run_comparison(const ComparisonInputs& inputs,
                             const ComparisonConfig& config,
                             const ComparisonFilter& filter = {},
                             const ModelRegistry* prebuilt = nullptr);

std::string render_metrics_table(const MetricsReport& report);
void save_metrics_json(const MetricsReport& report,
                       const std::filesystem::path& path);
// Plot-ready rows, one line per (model, metric), keyed by training weight.
void save_metrics_csv(const std::vector<MetricsReport>& reports,
                      const std::filesystem::path& path);

}  // namespace domba
