// Benchmark of the OpenMP-parallel batch kernels against their serial
// reference path. Both paths write per-item slots and reduce in index
// order, so results must match exactly; the benchmark verifies that while
// timing them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "domba/aggregate.hpp"
#include "domba/common.hpp"
#include "domba/exposure.hpp"
#include "domba/logdist.hpp"
#include "domba/metrics.hpp"
#include "domba/ngram.hpp"
#include "domba/parallel.hpp"
#include "domba/pipeline.hpp"
#include "domba/synth.hpp"

using namespace domba;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

LogDistribution random_distribution(Rng& rng, std::size_t n) {
  std::vector<double> logits(n);
  for (double& v : logits) v = rng.uniform(-12.0, 12.0);
  const double norm = log_sum_exp(logits);
  for (double& v : logits) v -= norm;
  LogDistribution dist;
  dist.logp = std::move(logits);
  return dist;
}

struct BenchResult {
  double serial_s = 0.0;
  double parallel_s = 0.0;
  bool identical = false;
};

void print_row(const char* name, const BenchResult& r, std::size_t items) {
  std::printf("%-18s %10.3f s %10.3f s %8.2fx  %12.0f/s  %s\n", name,
              r.serial_s, r.parallel_s,
              r.parallel_s > 0 ? r.serial_s / r.parallel_s : 0.0,
              items / (r.parallel_s > 0 ? r.parallel_s : 1.0),
              r.identical ? "identical" : "MISMATCH");
}

// Exposure-bound audit over random submodel pairs.
BenchResult bench_audit(std::size_t trials, std::size_t vocab) {
  const MeanSpec mean = MeanSpec::minimum();
  auto run = [&](Execution mode, std::vector<double>& out) {
    out.assign(trials, 0.0);
    const auto start = Clock::now();
    parallel_for(
        trials,
        [&](std::size_t i) {
          Rng rng(1000 + i);
          const LogDistribution d1 = random_distribution(rng, vocab);
          const LogDistribution d2 = random_distribution(rng, vocab);
          LogDistribution agg;
          agg.logp.resize(vocab);
          dagg_combine(mean, d1.logp, d2.logp, agg.logp);
          const ExposureProfile profile = audit_aggregate(agg, d1, d2, mean);
          out[i] = profile.max_log_exposure - profile.log_fbar;
        },
        mode);
    return seconds_since(start);
  };
  std::vector<double> serial_out, parallel_out;
  BenchResult result;
  result.serial_s = run(Execution::serial, serial_out);
  result.parallel_s = run(Execution::parallel, parallel_out);
  result.identical = serial_out == parallel_out;
  return result;
}

// Pooled perplexity of a DOMBA aggregate over synthetic eval records.
BenchResult bench_perplexity(std::size_t vocab_hint) {
  (void)vocab_hint;
  SynthConfig synth_config;
  synth_config.levels = 6;
  synth_config.records_per_level = 150;
  const SyntheticCorpus synth = generate_synthetic_corpus(synth_config, 5);
  const Vocabulary vocab = build_vocabulary(synth.corpus, 1);
  ModelConfig config;
  config.order = 2;
  const ModelRegistry registry = train_registry(
      synth.corpus, vocab, synth.corpus.levels, config, 17, "bench");
  const AggregatedModel model = build_init_model(registry, MeanSpec::minimum());

  std::vector<std::vector<TokenId>> records;
  for (const Record& record : synth.corpus.records) {
    if (record.split == Split::eval) {
      records.push_back(vocab.ids(tokenize(record.text)));
    }
  }

  auto run = [&](Execution mode, std::vector<double>& nll) {
    nll.assign(records.size(), 0.0);
    const auto start = Clock::now();
    parallel_for(
        records.size(),
        [&](std::size_t i) { nll[i] = model.sequence_nll(records[i]); },
        mode);
    return seconds_since(start);
  };
  std::vector<double> serial_out, parallel_out;
  BenchResult result;
  result.serial_s = run(Execution::serial, serial_out);
  result.parallel_s = run(Execution::parallel, parallel_out);
  result.identical = serial_out == parallel_out;
  return result;
}

// Batched DAGG prediction over random contexts.
BenchResult bench_predict(std::size_t contexts) {
  SynthConfig synth_config;
  synth_config.levels = 4;
  synth_config.records_per_level = 100;
  const SyntheticCorpus synth = generate_synthetic_corpus(synth_config, 9);
  const Vocabulary vocab = build_vocabulary(synth.corpus, 1);
  ModelConfig config;
  config.order = 2;
  const ModelRegistry registry = train_registry(
      synth.corpus, vocab, synth.corpus.levels, config, 23, "bench");
  const AggregatedModel model =
      build_init_model(registry, MeanSpec::harmonic());

  std::vector<std::vector<TokenId>> batch(contexts);
  Rng rng(31);
  for (auto& context : batch) {
    context = {static_cast<TokenId>(rng.uniform_int(vocab.size())),
               static_cast<TokenId>(rng.uniform_int(vocab.size()))};
  }

  auto run = [&](Execution mode, std::vector<double>& first_logp) {
    first_logp.assign(batch.size(), 0.0);
    const auto start = Clock::now();
    parallel_chunks(
        batch.size(),
        [&](std::size_t begin, std::size_t end) {
          std::vector<double> out(vocab.size());
          for (std::size_t i = begin; i < end; ++i) {
            model.predict_logp(batch[i], out);
            first_logp[i] = out[0];
          }
        },
        mode);
    return seconds_since(start);
  };
  std::vector<double> serial_out, parallel_out;
  BenchResult result;
  result.serial_s = run(Execution::serial, serial_out);
  result.parallel_s = run(Execution::parallel, parallel_out);
  result.identical = serial_out == parallel_out;
  return result;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DOMBA kernel benchmark: serial reference vs OpenMP"};
  std::size_t trials = 20000;
  std::size_t vocab = 256;
  std::size_t contexts = 20000;
  app.add_option("--trials", trials, "audit trials");
  app.add_option("--vocab", vocab, "vocabulary size for the audit sweep");
  app.add_option("--contexts", contexts, "contexts for the predict batch");
  CLI11_PARSE(app, argc, argv);

  std::printf("threads: %d\n", max_threads());
  std::printf("%-18s %12s %12s %9s %14s\n", "kernel", "serial", "openmp",
              "speedup", "items/s");

  print_row("exposure-audit", bench_audit(trials, vocab), trials);
  print_row("dagg-predict", bench_predict(contexts), contexts);
  print_row("perplexity", bench_perplexity(vocab), 90);
  return 0;
}
