// domba: corpus generation, DOMBA training, exposure audits, metric
// comparison and guarded text generation, driven by one JSON config.
// Exit codes: 0 success, 1 validation error, 2 runtime/io error.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "domba/aggregate.hpp"
#include "domba/common.hpp"
#include "domba/config.hpp"
#include "domba/corpus.hpp"
#include "domba/exposure.hpp"
#include "domba/metrics.hpp"
#include "domba/parallel.hpp"
#include "domba/pipeline.hpp"
#include "domba/synth.hpp"

namespace {

using namespace domba;
using nlohmann::json;

struct CommonOptions {
  std::string config_path;
  std::string out_override;
  bool force = false;

  std::optional<int> order;
  std::optional<double> alpha;
  std::optional<double> weight;
  std::optional<std::string> mean;
  std::optional<std::uint64_t> corpus_seed;
  std::optional<std::uint64_t> partition_seed;
  std::optional<std::uint64_t> eval_seed;
};

void add_common(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", options.config_path, "JSON config file");
  cmd->add_option("--out", options.out_override,
                  "output root (overrides DOMBA_OUT and the config)");
  cmd->add_option("--order", options.order, "context window in tokens");
  cmd->add_option("--alpha", options.alpha, "add-alpha smoothing");
  cmd->add_option("--weight", options.weight,
                  "training weight (epochs analogue)");
  cmd->add_option("--mean", options.mean,
                  "aggregation mean: min | harmonic | gm:<alpha> | arith");
  cmd->add_option("--corpus-seed", options.corpus_seed,
                  "synthetic corpus seed");
  cmd->add_option("--partition-seed", options.partition_seed,
                  "access-level partition seed");
  cmd->add_option("--eval-seed", options.eval_seed, "evaluation seed");
  cmd->add_flag("--force", options.force,
                "proceed despite a config-hash mismatch");
}

RunConfig resolve_config(const CommonOptions& options) {
  RunConfig config = options.config_path.empty()
                         ? default_config()
                         : load_config(options.config_path);
  if (options.order) config.model.order = *options.order;
  if (options.alpha) config.model.smoothing_alpha = *options.alpha;
  if (options.weight) config.model.weight = *options.weight;
  if (options.mean) config.mean = *options.mean;
  if (options.corpus_seed) config.corpus_seed = *options.corpus_seed;
  if (options.partition_seed) config.partition_seed = *options.partition_seed;
  if (options.eval_seed) config.eval_seed = *options.eval_seed;

  if (!options.out_override.empty()) {
    config.output_dir = options.out_override;
  } else if (const char* env_root = std::getenv("DOMBA_OUT")) {
    config.output_dir = env_root;
  }
  MeanSpec::parse(config.mean);  // validate early
  return config;
}

std::filesystem::path corpus_file(const RunConfig& config) {
  if (!config.corpus_path.empty()) return config.corpus_path;
  return std::filesystem::path(config.output_dir) / "corpus.jsonl";
}

std::filesystem::path aux_file(const RunConfig& config) {
  return corpus_file(config).string() + ".aux.json";
}

struct LoadedCorpus {
  AccessCorpus corpus;
  CorpusAux aux;
  std::vector<std::string> trained_levels;
};

LoadedCorpus load_corpus_bundle(const RunConfig& config, bool force) {
  const auto path = corpus_file(config);
  if (!std::filesystem::exists(path)) {
    fail_validation("corpus file not found: " + path.string() +
                    " (run gen-corpus first, or set corpus.path)");
  }
  LoadedCorpus loaded;
  loaded.corpus = load_corpus_jsonl(path);
  loaded.aux = load_corpus_aux(aux_file(config));
  const std::string hash = config_hash(config);
  if (loaded.aux.config_hash != hash && !force) {
    fail_validation("corpus was generated under config " +
                    loaded.aux.config_hash + " but the current config is " +
                    hash + " (pass --force to override)");
  }
  const std::set<std::string> holdout(loaded.aux.holdout_levels.begin(),
                                      loaded.aux.holdout_levels.end());
  for (const std::string& level : loaded.corpus.levels) {
    if (!holdout.count(level)) loaded.trained_levels.push_back(level);
  }
  return loaded;
}

int cmd_gen_corpus(const CommonOptions& options) {
  const RunConfig config = resolve_config(options);
  if (!config.corpus_path.empty()) {
    fail_validation(
        "gen-corpus writes synthetic corpora; corpus.path is already set");
  }
  const std::string hash = config_hash(config);
  std::filesystem::create_directories(config.output_dir);

  SyntheticCorpus synth =
      generate_synthetic_corpus(config.synth, config.corpus_seed);
  const std::vector<std::string> holdout =
      resolve_holdout_levels(config, synth.corpus.levels);

  std::vector<std::string> trained;
  const std::set<std::string> held(holdout.begin(), holdout.end());
  for (const std::string& level : synth.corpus.levels) {
    if (!held.count(level)) trained.push_back(level);
  }

  const CanaryPlan plan = make_canary_plan(
      trained, synth.background_words, config.canary_seed, config.canary_words,
      config.canary_repetitions);
  inject_canaries(synth.corpus, plan);

  const auto path = corpus_file(config);
  save_corpus_jsonl(synth.corpus, path);
  CorpusAux aux;
  aux.planted = synth.planted;
  // SIA false counterparts: phrases of the same shape that are sensitive
  // for no level. Prefer the corpus-wide common phrases; fall back to the
  // never-planted pool when the generator was run without commons.
  aux.decoys = synth.commons.empty() ? synth.decoys : synth.commons;
  aux.holdout_levels = holdout;
  aux.canary = plan;
  aux.config_hash = hash;
  save_corpus_aux(aux, aux_file(config));

  std::cout << "wrote " << synth.corpus.records.size() << " records, "
            << synth.corpus.levels.size() << " levels (" << holdout.size()
            << " held out) to " << path.string() << "\n"
            << "config hash " << hash << "\n";
  return 0;
}

int cmd_train(const CommonOptions& options) {
  const RunConfig config = resolve_config(options);
  const std::string hash = config_hash(config);
  const LoadedCorpus loaded = load_corpus_bundle(config, options.force);

  const Vocabulary vocabulary =
      build_vocabulary(loaded.corpus, config.model.min_count);
  const ModelRegistry registry =
      train_registry(loaded.corpus, vocabulary, loaded.trained_levels,
                     config.model, config.partition_seed, hash);

  for (const std::string& phrase :
       isolation_violations(loaded.corpus, registry.assignment)) {
    std::cerr << "warning: sensitive phrase appears in train records of both "
                 "partitions: "
              << phrase << "\n";
  }

  const auto dir = std::filesystem::path(config.output_dir) / "registry";
  save_registry(registry, dir);
  std::cout << "trained submodels for " << registry.per_level.size()
            << " access levels into " << dir.string() << "\n"
            << "partition 1: " << registry.assignment.levels_in(1).size()
            << " levels, partition 2: "
            << registry.assignment.levels_in(2).size() << " levels\n"
            << "config hash " << hash << "\n";
  return 0;
}

ModelRegistry load_registry_checked(const RunConfig& config,
                                    const std::string& hash, bool force) {
  const auto dir = std::filesystem::path(config.output_dir) / "registry";
  if (!std::filesystem::exists(dir / "manifest.json")) {
    fail_validation("registry not found under " + dir.string() +
                    " (run train first)");
  }
  ModelRegistry registry = load_registry(dir);
  if (registry.config_hash != hash && !force) {
    fail_validation("registry was trained under config " +
                    registry.config_hash + " but the current config is " +
                    hash + " (pass --force to override)");
  }
  return registry;
}

int cmd_audit(const CommonOptions& options, int contexts_override) {
  RunConfig config = resolve_config(options);
  // the context budget is a runtime knob, not part of the experiment identity
  const std::string hash = config_hash(config);
  if (contexts_override > 0) config.audit_contexts = contexts_override;
  const LoadedCorpus loaded = load_corpus_bundle(config, options.force);
  const ModelRegistry registry =
      load_registry_checked(config, hash, options.force);
  const Vocabulary vocabulary =
      build_vocabulary(loaded.corpus, config.model.min_count);
  const MeanSpec mean = MeanSpec::parse(config.mean);

  // Reference model for the chained-bound check (the base-model role).
  std::shared_ptr<const NGramModel> reference;
  if (!loaded.aux.holdout_levels.empty()) {
    const auto sequences = training_sequences(
        loaded.corpus, vocabulary, loaded.aux.holdout_levels, Split::train);
    if (!sequences.empty()) {
      ModelMeta meta;
      meta.corpus_ids = "reference:holdout";
      reference = std::make_shared<NGramModel>(
          train_ngram(vocabulary, sequences, config.model.order,
                      config.model.smoothing_alpha, 1.0, std::move(meta)));
    }
  }

  // Eval contexts: prefixes of eval records, each level audited under its
  // own deployed variant, up to the configured budget.
  struct AuditJob {
    std::string level;
    std::string context_id;
    std::vector<TokenId> context;
  };
  std::vector<AuditJob> jobs;
  for (const Record& record : loaded.corpus.records) {
    if (static_cast<int>(jobs.size()) >= config.audit_contexts) break;
    if (record.split != Split::eval) continue;
    if (!registry.per_level.count(record.access_level)) continue;
    const auto ids = vocabulary.ids(tokenize(record.text));
    std::vector<TokenId> context;
    for (TokenId token : ids) {
      if (static_cast<int>(jobs.size()) >= config.audit_contexts) break;
      jobs.push_back({record.access_level,
                      record.record_id + ":" + std::to_string(context.size()),
                      context});
      context.push_back(token);
    }
  }

  std::map<std::string, std::unique_ptr<AggregatedModel>> variants;
  for (const std::string& level : registry.levels()) {
    variants[level] = std::make_unique<AggregatedModel>(
        build_domba_model(registry, level, mean));
  }

  struct AuditRow {
    ExposureProfile profile;
    double chained_violation = 0.0;
    bool chained_checked = false;
  };
  std::vector<AuditRow> rows(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const AuditJob& job = jobs[i];
    const AggregatedModel& model = *variants.at(job.level);
    const ModelPair& pair = registry.pair_for(job.level);
    LogDistribution d1 = pair.unchanged->predict_ids(job.context);
    LogDistribution d2 = pair.finetuned->predict_ids(job.context);
    LogDistribution agg = model.aggregate(d1, d2);
    agg.context_id = job.context_id;
    rows[i].profile = audit_aggregate(agg, d1, d2, mean);
    if (reference) {
      const LogDistribution base = reference->predict_ids(job.context);
      rows[i].chained_violation =
          corollary_bound_check(agg, d1, d2, base, mean).max_violation;
      rows[i].chained_checked = true;
    }
  });

  const auto dir = std::filesystem::path(config.output_dir) / "audit";
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "exposure_report.jsonl", std::ios::binary);
  if (!out) fail_io("cannot write exposure report");
  auto linear2 = [](double log_value) {
    return std::round(std::exp(log_value) * 100.0) / 100.0;
  };
  std::size_t violations = 0;
  std::size_t identity_misses = 0;
  double max_exposure = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ExposureProfile& profile = rows[i].profile;
    if (!profile.bound_holds) ++violations;
    if (!profile.lower_bound_witnessed) ++identity_misses;
    max_exposure = std::max(max_exposure, profile.max_log_exposure);
    json row;
    row["context_id"] = profile.context_id;
    row["level"] = jobs[i].level;
    row["log_tpr"] = profile.log_tpr;
    row["log_mae"] = profile.log_mae;
    row["log_fbar"] = profile.log_fbar;
    row["lambda_f"] = profile.lambda_f;
    row["max_log_exposure"] = profile.max_log_exposure;
    row["tpr"] = linear2(profile.log_tpr);
    row["mae"] = linear2(profile.log_mae);
    row["fbar"] = linear2(profile.log_fbar);
    row["max_exposure"] = linear2(profile.max_log_exposure);
    row["bound_holds"] = profile.bound_holds;
    row["lower_bound_witnessed"] = profile.lower_bound_witnessed;
    row["identity_residual"] = profile.identity_residual;
    if (rows[i].chained_checked) {
      row["chained_bound_max_violation"] = rows[i].chained_violation;
    }
    out << row.dump() << "\n";
  }

  json summary;
  summary["config_hash"] = hash;
  summary["contexts"] = rows.size();
  summary["bound_violations"] = violations;
  summary["identity_misses"] = identity_misses;
  summary["max_exposure"] = std::exp(max_exposure);
  std::ofstream summary_out(dir / "summary.json", std::ios::binary);
  summary_out << summary.dump(2) << "\n";

  std::cout << "audited " << rows.size() << " contexts: " << violations
            << " bound violations, max exposure " << std::exp(max_exposure)
            << "\n";
  return violations == 0 ? 0 : 2;
}

int cmd_eval(const CommonOptions& options,
             const std::vector<double>& sweep_weights) {
  const RunConfig config = resolve_config(options);
  const std::string hash = config_hash(config);
  const LoadedCorpus loaded = load_corpus_bundle(config, options.force);
  const ModelRegistry registry =
      load_registry_checked(config, hash, options.force);

  ComparisonInputs inputs;
  inputs.corpus = loaded.corpus;
  inputs.trained_levels = loaded.trained_levels;
  inputs.holdout_levels = loaded.aux.holdout_levels;
  inputs.planted = loaded.aux.planted;
  inputs.decoys = loaded.aux.decoys;
  inputs.canary = loaded.aux.canary;
  inputs.corpus_seed = config.corpus_seed;

  ComparisonConfig comparison;
  comparison.order = config.model.order;
  comparison.smoothing_alpha = config.model.smoothing_alpha;
  comparison.weight = config.model.weight;
  comparison.min_count = config.model.min_count;
  comparison.partition_seed = config.partition_seed;
  comparison.eval_seed = config.eval_seed;
  comparison.mean = MeanSpec::parse(config.mean);
  comparison.sia_reference = config.sia_reference;
  comparison.canary_reference_samples = config.canary_reference_samples;
  comparison.percentile = config.percentile;
  comparison.config_hash = hash;

  const MetricsReport report = run_comparison(inputs, comparison, {}, &registry);

  const auto dir = std::filesystem::path(config.output_dir) / "eval";
  std::filesystem::create_directories(dir);
  save_metrics_json(report, dir / "metrics.json");
  const std::string table = render_metrics_table(report);
  std::ofstream table_out(dir / "metrics.txt", std::ios::binary);
  table_out << table;
  std::cout << table;

  // Optional trade-off sweep: rerun the comparison per training weight and
  // emit one plot-ready CSV over all of them. The registry is tied to the
  // configured weight, so swept weights retrain in place.
  std::vector<MetricsReport> reports = {report};
  for (double weight : sweep_weights) {
    if (weight == config.model.weight) continue;
    ComparisonConfig swept = comparison;
    swept.weight = weight;
    reports.push_back(run_comparison(inputs, swept, {},
                                     weight == config.model.weight
                                         ? &registry
                                         : nullptr));
    char name[48];
    std::snprintf(name, sizeof(name), "metrics_w%g.json", weight);
    save_metrics_json(reports.back(), dir / name);
  }
  save_metrics_csv(reports, dir / "metrics.csv");
  return 0;
}

int cmd_generate(const CommonOptions& options, const std::string& level,
                 const std::string& prompt, int length, double temperature,
                 std::uint64_t sample_seed) {
  const RunConfig config = resolve_config(options);
  const std::string hash = config_hash(config);
  const ModelRegistry registry =
      load_registry_checked(config, hash, options.force);
  const MeanSpec mean = MeanSpec::parse(config.mean);

  const AggregatedModel model = build_domba_model(registry, level, mean);
  const Vocabulary& vocabulary = model.vocabulary();
  std::vector<TokenId> context = vocabulary.ids(tokenize(prompt));
  Rng rng(sample_seed);
  std::string text = prompt;
  for (int i = 0; i < length; ++i) {
    const TokenId token =
        sample_token(model.predict_ids(context), temperature, rng);
    if (!text.empty()) text += ' ';
    text += vocabulary.token(token);
    context.push_back(token);
  }
  std::cout << text << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "DOMBA: double-model balanced access-controlled language models"};
  app.require_subcommand(1);

  CommonOptions gen_options, train_options, audit_options, eval_options,
      generate_options;

  CLI::App* gen = app.add_subcommand(
      "gen-corpus", "generate the synthetic access-controlled corpus");
  add_common(gen, gen_options);

  CLI::App* train = app.add_subcommand(
      "train", "run DOMBA-INIT and DOMBA-FT, writing the model registry");
  add_common(train, train_options);

  int audit_contexts = 0;
  CLI::App* audit = app.add_subcommand(
      "audit", "verify the exposure bounds over evaluation contexts");
  add_common(audit, audit_options);
  audit->add_option("--contexts", audit_contexts,
                    "evaluation contexts to audit (default from config)");

  std::vector<double> sweep_weights;
  CLI::App* eval = app.add_subcommand(
      "eval", "run the model comparison and write the metrics report");
  add_common(eval, eval_options);
  eval->add_option("--sweep-weights", sweep_weights,
                   "extra training weights for the trade-off CSV");

  std::string level, prompt;
  int length = 30;
  double temperature = 1.0;
  std::uint64_t sample_seed = 1;
  CLI::App* generate = app.add_subcommand(
      "generate", "sample text from an access level's DOMBA model");
  add_common(generate, generate_options);
  generate->add_option("--level", level, "access level")->required();
  generate->add_option("--prompt", prompt, "prompt text");
  generate->add_option("--length", length, "tokens to sample");
  generate->add_option("--temperature", temperature, "sampling temperature");
  generate->add_option("--sample-seed", sample_seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_corpus(gen_options);
    if (train->parsed()) return cmd_train(train_options);
    if (audit->parsed()) return cmd_audit(audit_options, audit_contexts);
    if (eval->parsed()) return cmd_eval(eval_options, sweep_weights);
    if (generate->parsed()) {
      return cmd_generate(generate_options, level, prompt, length, temperature,
                          sample_seed);
    }
  } catch (const domba::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == domba::Error::Kind::validation ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
