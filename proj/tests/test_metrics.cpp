#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"

#include "domba/common.hpp"
#include "domba/exposure.hpp"
#include "domba/metrics.hpp"
#include "domba/pipeline.hpp"
#include "domba/synth.hpp"

using namespace domba;

namespace {

Vocabulary small_vocab() { return Vocabulary({"a", "b"}); }  // n = 4

SynthConfig tiny_synth() {
  SynthConfig c;
  c.levels = 4;
  c.records_per_level = 80;
  c.phrases_per_level = 5;
  c.decoy_phrases = 20;
  c.background_words = 60;
  c.phrase_pool_words = 20;
  c.reference_level_count = 1;  // al03 doubles as the holdout slice
  return c;
}

struct TinyRun {
  SyntheticCorpus synth;
  Vocabulary vocab;
  ModelRegistry registry;
  std::shared_ptr<NGramModel> ft_all;
  std::shared_ptr<NGramModel> reference;
  std::vector<std::string> trained;
  std::vector<std::string> holdout;
};

TinyRun make_tiny_run(std::uint64_t seed) {
  TinyRun run;
  run.synth = generate_synthetic_corpus(tiny_synth(), seed);
  run.trained = {"al00", "al01", "al02"};
  run.holdout = {"al03"};
  run.vocab = build_vocabulary(run.synth.corpus, 1);
  ModelConfig config;
  config.order = 2;
  run.registry = train_registry(run.synth.corpus, run.vocab, run.trained,
                                config, 19, "tiny");
  ModelMeta meta;
  run.ft_all = std::make_shared<NGramModel>(train_ngram(
      run.vocab,
      training_sequences(run.synth.corpus, run.vocab, run.trained,
                         Split::train),
      2, 0.1, 1.0, meta));
  run.reference = std::make_shared<NGramModel>(train_ngram(
      run.vocab,
      training_sequences(run.synth.corpus, run.vocab, run.holdout,
                         Split::train),
      2, 0.1, 1.0, meta));
  return run;
}

}  // namespace

TEST_CASE("perplexity of the uniform model is the vocabulary size") {
  const Vocabulary vocab = small_vocab();
  const NGramModel uniform = train_ngram(vocab, {}, 1, 0.1, 1.0);
  const std::vector<std::vector<TokenId>> records = {
      vocab.ids({"a", "b", "a"}), vocab.ids({"b", "b"})};
  CHECK(perplexity(uniform, records) ==
        doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS_AS(perplexity(uniform, {}), Error);
}

TEST_CASE("a memorizing model matches the closed-form smoothed perplexity") {
  const Vocabulary vocab = small_vocab();
  const auto record = vocab.ids({"a", "b", "a", "b"});
  const std::vector<std::vector<TokenId>> data(50, record);
  const int order = 1;
  const double alpha = 0.1;
  const NGramModel model = train_ngram(vocab, data, order, alpha, 1.0);

  oracle::NGramRecount recount;
  for (const auto& seq : data) recount.add(seq, order, 1.0);
  double nll = 0.0;
  std::vector<TokenId> context;
  for (TokenId token : record) {
    nll -= std::log(
        recount.probability(context, token, order, alpha, vocab.size()));
    context.push_back(token);
  }
  const double expected = std::exp(nll / record.size());
  CHECK(perplexity(model, {record}) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(perplexity(model, {record}) < 1.6);  // memorized: near 1
}

TEST_CASE("exposure metric is exactly 1 for identical submodels") {
  const Vocabulary vocab = small_vocab();
  const auto m = std::make_shared<NGramModel>(
      train_ngram(vocab, {vocab.ids({"a", "b", "a"})}, 1, 0.1, 1.0));
  const AggregatedModel agg(m, m, MeanSpec::minimum(),
                            AggregatedModel::Mode::relative);
  const std::vector<std::vector<TokenId>> records = {
      vocab.ids({"a", "b", "b", "a"})};
  const std::vector<const AggregatedModel*> models = {&agg};
  const ExposureMetric metric = exposure_metric(records, models, 99);
  CHECK(metric.exp_max == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(metric.exp_p99 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(metric.observations == 4);
}

TEST_CASE("minimum-mean DOMBA exposure stays under the fbar ceiling") {
  const TinyRun run = make_tiny_run(31);
  const AggregatedModel domba =
      build_domba_model(run.registry, "al00", MeanSpec::minimum());
  std::vector<std::string> levels;
  const auto records = [&] {
    std::vector<std::vector<TokenId>> out;
    for (const Record& record : run.synth.corpus.records) {
      if (record.split == Split::eval && record.access_level == "al01") {
        out.push_back(run.vocab.ids(tokenize(record.text)));
      }
    }
    return out;
  }();
  REQUIRE(!records.empty());
  const std::vector<const AggregatedModel*> models(records.size(), &domba);
  const ExposureMetric metric = exposure_metric(records, models, 99);

  // lambda = 1 for minimum: every ratio <= max fbar over the contexts, and
  // fbar <= sqrt(MAE) <= the worst-case rp ceiling; the cheap sound check is
  // ratio <= exp(max log fbar) which audit_aggregate verifies per context.
  CHECK(metric.exp_max >= 1.0);
  const ModelPair& pair = run.registry.pair_for("al00");
  double max_bound = 0.0;
  for (const auto& record : records) {
    std::vector<TokenId> context;
    for (TokenId token : record) {
      const ExposureProfile profile = audit_aggregate(
          domba.predict_ids(context), pair.unchanged->predict_ids(context),
          pair.finetuned->predict_ids(context), MeanSpec::minimum());
      max_bound = std::max(max_bound, profile.log_fbar);
      context.push_back(token);
    }
  }
  CHECK(std::log(metric.exp_max) <= max_bound + 1e-9);
}

TEST_CASE("secret perplexity: uniform model scores the vocabulary size") {
  const TinyRun run = make_tiny_run(32);
  const NGramModel uniform = train_ngram(run.vocab, {}, 2, 0.1, 1.0);
  const auto instances = collect_phrase_instances(run.synth.corpus, run.vocab,
                                                  Split::eval, run.trained);
  REQUIRE(!instances.empty());
  const double sppl = secret_perplexity(
      instances,
      [&](const std::string&) -> const LanguageModel& { return uniform; });
  CHECK(sppl == doctest::Approx(static_cast<double>(run.vocab.size()))
                    .epsilon(1e-9));
  CHECK_THROWS_AS(
      secret_perplexity({}, [&](const std::string&) -> const LanguageModel& {
        return uniform;
      }),
      Error);
}

TEST_CASE("single-token phrases reduce to 1/p") {
  const Vocabulary vocab = small_vocab();
  const NGramModel model = train_ngram(
      vocab, {vocab.ids({"a", "b"}), vocab.ids({"a", "b"})}, 1, 0.1, 1.0);
  PhraseInstance instance;
  instance.context = vocab.ids({"a"});
  instance.phrase = {vocab.id("b")};
  instance.level = "L";
  const double sppl = secret_perplexity(
      {instance},
      [&](const std::string&) -> const LanguageModel& { return model; });
  CHECK(sppl == doctest::Approx(2.4 / 2.1).epsilon(1e-12));  // 1 / p(b|a)
}

TEST_CASE("SIA dataset pairing is enforced") {
  const TinyRun run = make_tiny_run(33);
  const auto instances = collect_phrase_instances(run.synth.corpus, run.vocab,
                                                  Split::eval, run.trained);
  std::vector<std::vector<TokenId>> decoys;
  for (const std::string& decoy : run.synth.decoys) {
    decoys.push_back(run.vocab.ids(tokenize(decoy)));
  }
  const SIADataset dataset = build_sia_dataset(instances, decoys, 5);
  CHECK(dataset.items.size() == 2 * instances.size());
  std::map<int, int> trues, falses;
  for (const SIAItem& item : dataset.items) {
    ++(item.label ? trues : falses)[item.pair_id];
  }
  for (const auto& [id, count] : trues) {
    CHECK(count == 1);
    CHECK(falses[id] == 1);
  }

  SIADataset broken = dataset;
  broken.items.pop_back();
  const auto target = [&](const std::string&) -> const LanguageModel& {
    return *run.ft_all;
  };
  CHECK_THROWS_AS(secret_inference_attack(target, *run.reference, broken),
                  Error);
}

TEST_CASE("SIA is 0.5 when the target IS the reference, near 1 when planted") {
  const TinyRun run = make_tiny_run(34);
  const auto instances = collect_phrase_instances(run.synth.corpus, run.vocab,
                                                  Split::eval, run.trained);
  REQUIRE(instances.size() >= 20);
  std::vector<std::vector<TokenId>> decoys;
  for (const std::string& decoy : run.synth.decoys) {
    decoys.push_back(run.vocab.ids(tokenize(decoy)));
  }
  const SIADataset dataset = build_sia_dataset(instances, decoys, 5);

  const auto reference_as_target =
      [&](const std::string&) -> const LanguageModel& {
    return *run.reference;
  };
  CHECK(secret_inference_attack(reference_as_target, *run.reference, dataset) ==
        doctest::Approx(0.5).epsilon(1e-12));

  const auto ft_all_target = [&](const std::string&) -> const LanguageModel& {
    return *run.ft_all;
  };
  const double planted_auc =
      secret_inference_attack(ft_all_target, *run.reference, dataset);
  CHECK(planted_auc > 0.9);
}

TEST_CASE("canary scores: ceiling when memorized, near 1 when unseen") {
  const TinyRun run = make_tiny_run(35);
  const CanaryPlan plan = make_canary_plan(
      run.trained, run.synth.background_words, 91, 7, 30);

  // not injected: median score stays near 1 across 20 sampling seeds
  const auto clean_model = [&](const std::string&) -> const LanguageModel& {
    return *run.ft_all;
  };
  std::vector<double> medians;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CanaryPlan fresh = make_canary_plan(
        run.trained, run.synth.background_words, 91 + seed, 7, 30);
    medians.push_back(
        canary_attack(fresh, clean_model, 2000, seed).median_score);
  }
  std::sort(medians.begin(), medians.end());
  const double median_of_medians =
      0.5 * (medians[9] + medians[10]);
  CHECK(median_of_medians > 0.5);
  CHECK(median_of_medians < 1.5);

  // injected with heavy repetition: rank 0, the estimator ceiling
  AccessCorpus injected = filter_levels(run.synth.corpus, run.trained);
  CanaryPlan heavy = plan;
  heavy.repetitions = 1000;
  inject_canaries(injected, heavy);
  ModelMeta meta;
  const NGramModel memorizer = train_ngram(
      run.vocab,
      training_sequences(injected, run.vocab, run.trained, Split::train), 2,
      0.1, 1.0, meta);
  const auto memorizer_model =
      [&](const std::string&) -> const LanguageModel& { return memorizer; };
  const CanaryResult result = canary_attack(plan, memorizer_model, 2000, 3);
  CHECK(result.median_score == doctest::Approx(result.score_ceiling));
  CHECK(result.score_ceiling == doctest::Approx(std::log2(2001.0)));

  // determinism
  const CanaryResult again = canary_attack(plan, memorizer_model, 2000, 3);
  CHECK(again.median_score == result.median_score);
}

TEST_CASE("run_comparison fills the Table-1 shape with the right gaps") {
  const SyntheticCorpus synth = generate_synthetic_corpus(tiny_synth(), 36);
  ComparisonInputs inputs;
  inputs.corpus = synth.corpus;
  inputs.trained_levels = {"al00", "al01", "al02"};
  inputs.holdout_levels = {"al03"};
  inputs.planted = synth.planted;
  inputs.decoys = synth.decoys;
  inputs.canary =
      make_canary_plan(inputs.trained_levels, synth.background_words, 9, 7, 30);
  inject_canaries(inputs.corpus, inputs.canary);
  inputs.corpus_seed = 36;

  ComparisonConfig config;
  config.canary_reference_samples = 500;
  config.config_hash = "smoke";
  const MetricsReport report = run_comparison(inputs, config);

  REQUIRE(report.models.size() == 6);
  const std::vector<std::string> expected_order = {"FT-ALL", "AGG-A", "D-I-H",
                                                   "D-I-M", "Per-AL", "DOMBA"};
  for (std::size_t i = 0; i < expected_order.size(); ++i) {
    CHECK(report.models[i].first == expected_order[i]);
  }

  const MetricValues& ft_all = *report.find("FT-ALL");
  CHECK(ft_all.hoppl.has_value());
  CHECK(ft_all.auppl.has_value());
  CHECK(!ft_all.exp_max.has_value());  // EXP needs two submodels
  CHECK(ft_all.sppl.has_value());
  CHECK(ft_all.sia_auc.has_value());
  CHECK(ft_all.can_score.has_value());

  const MetricValues& per_al = *report.find("Per-AL");
  CHECK(per_al.hoppl.has_value());
  CHECK(per_al.auppl.has_value());
  CHECK(!per_al.exp_max.has_value());  // trivially secure: no security row
  CHECK(!per_al.sppl.has_value());
  CHECK(!per_al.sia_auc.has_value());
  CHECK(!per_al.can_score.has_value());

  for (const char* name : {"AGG-A", "D-I-H", "D-I-M", "DOMBA"}) {
    const MetricValues& values = *report.find(name);
    CHECK(values.exp_max.has_value());
    CHECK(values.exp_p99.has_value());
    CHECK(*values.exp_p99 <= *values.exp_max);
    CHECK(values.sia_auc.has_value());
    CHECK(*values.sia_auc >= 0.0);
    CHECK(*values.sia_auc <= 1.0);
  }

  // perplexities >= 1, canary scores >= 0
  for (const auto& [name, values] : report.models) {
    if (values.hoppl) CHECK(*values.hoppl >= 1.0);
    if (values.auppl) CHECK(*values.auppl >= 1.0);
    if (values.sppl) CHECK(*values.sppl >= 1.0);
    if (values.can_score) CHECK(*values.can_score >= 0.0);
  }

  // determinism: a rerun yields the identical report file
  const MetricsReport rerun = run_comparison(inputs, config);
  const auto path_a = std::filesystem::temp_directory_path() / "metrics_a.json";
  const auto path_b = std::filesystem::temp_directory_path() / "metrics_b.json";
  save_metrics_json(report, path_a);
  save_metrics_json(rerun, path_b);
  CHECK(fnv1a64_file(path_a) == fnv1a64_file(path_b));

  const std::string table = render_metrics_table(report);
  CHECK(table.find("DOMBA") != std::string::npos);
  CHECK(table.find("EXP-MAX") != std::string::npos);

  // the uniform reference is a valid alternative and changes the attack
  ComparisonConfig uniform_ref = config;
  uniform_ref.sia_reference = "uniform";
  ComparisonFilter sia_only;
  sia_only.models = {"FT-ALL"};
  sia_only.utility = sia_only.exposure = sia_only.sppl = sia_only.canary =
      false;
  const MetricsReport alt = run_comparison(inputs, uniform_ref, sia_only);
  CHECK(alt.find("FT-ALL")->sia_auc.has_value());
  ComparisonConfig bad_ref = config;
  bad_ref.sia_reference = "gpt";
  CHECK_THROWS_AS(run_comparison(inputs, bad_ref, sia_only), Error);

  save_metrics_csv({report}, path_a);
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);
}
