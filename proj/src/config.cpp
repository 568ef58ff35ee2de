#include "domba/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "domba/common.hpp"

namespace domba {

using nlohmann::json;

RunConfig default_config() { return RunConfig{}; }

namespace {

json synth_to_json(const SynthConfig& s) {
  json out;
  out["levels"] = s.levels;
  out["records_per_level"] = s.records_per_level;
  out["phrases_per_level"] = s.phrases_per_level;
  out["phrase_words"] = s.phrase_words;
  out["decoy_phrases"] = s.decoy_phrases;
  out["background_words"] = s.background_words;
  out["phrase_pool_words"] = s.phrase_pool_words;
  out["sentences_min"] = s.sentences_min;
  out["sentences_max"] = s.sentences_max;
  out["sentence_words_min"] = s.sentence_words_min;
  out["sentence_words_max"] = s.sentence_words_max;
  out["phrases_per_record_min"] = s.phrases_per_record_min;
  out["phrases_per_record_max"] = s.phrases_per_record_max;
  out["eval_fraction"] = s.eval_fraction;
  out["successors_per_word"] = s.successors_per_word;
  return out;
}

template <typename T>
void read_if(const json& doc, const char* key, T& value) {
  if (doc.contains(key)) value = doc.at(key).get<T>();
}

SynthConfig synth_from_json(const json& doc) {
  SynthConfig s;
  read_if(doc, "levels", s.levels);
  read_if(doc, "records_per_level", s.records_per_level);
  read_if(doc, "phrases_per_level", s.phrases_per_level);
  read_if(doc, "phrase_words", s.phrase_words);
  read_if(doc, "decoy_phrases", s.decoy_phrases);
  read_if(doc, "background_words", s.background_words);
  read_if(doc, "phrase_pool_words", s.phrase_pool_words);
  read_if(doc, "sentences_min", s.sentences_min);
  read_if(doc, "sentences_max", s.sentences_max);
  read_if(doc, "sentence_words_min", s.sentence_words_min);
  read_if(doc, "sentence_words_max", s.sentence_words_max);
  read_if(doc, "phrases_per_record_min", s.phrases_per_record_min);
  read_if(doc, "phrases_per_record_max", s.phrases_per_record_max);
  read_if(doc, "eval_fraction", s.eval_fraction);
  read_if(doc, "successors_per_word", s.successors_per_word);
  return s;
}

json config_to_json_doc(const RunConfig& config, bool with_output_dir) {
  json doc;
  json corpus;
  corpus["path"] = config.corpus_path;
  corpus["synthetic"] = synth_to_json(config.synth);
  corpus["seed"] = config.corpus_seed;
  corpus["holdout_level_count"] = config.holdout_level_count;
  corpus["holdout_levels"] = config.holdout_levels;
  doc["corpus"] = corpus;

  json model;
  model["order"] = config.model.order;
  model["smoothing_alpha"] = config.model.smoothing_alpha;
  model["weight"] = config.model.weight;
  model["min_count"] = config.model.min_count;
  doc["model"] = model;

  doc["partition_seed"] = config.partition_seed;
  doc["mean"] = config.mean;

  json metrics;
  metrics["sia_reference"] = config.sia_reference;
  metrics["canary_words"] = config.canary_words;
  metrics["canary_repetitions"] = config.canary_repetitions;
  metrics["canary_reference_samples"] = config.canary_reference_samples;
  metrics["canary_seed"] = config.canary_seed;
  metrics["eval_seed"] = config.eval_seed;
  metrics["percentile"] = config.percentile;
  metrics["audit_contexts"] = config.audit_contexts;
  doc["metrics"] = metrics;

  if (with_output_dir) doc["output_dir"] = config.output_dir;
  return doc;
}

}  // namespace

std::string config_to_json(const RunConfig& config) {
  return config_to_json_doc(config, true).dump(2);
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot write config file: " + path.string());
  out << config_to_json(config) << "\n";
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open config file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail_validation(std::string("config file is not valid JSON: ") + e.what());
  }

  RunConfig config;
  if (doc.contains("corpus")) {
    const json& corpus = doc.at("corpus");
    read_if(corpus, "path", config.corpus_path);
    if (corpus.contains("synthetic")) {
      config.synth = synth_from_json(corpus.at("synthetic"));
    }
    read_if(corpus, "seed", config.corpus_seed);
    read_if(corpus, "holdout_level_count", config.holdout_level_count);
    read_if(corpus, "holdout_levels", config.holdout_levels);
  }
  if (doc.contains("model")) {
    const json& model = doc.at("model");
    read_if(model, "order", config.model.order);
    read_if(model, "smoothing_alpha", config.model.smoothing_alpha);
    read_if(model, "weight", config.model.weight);
    read_if(model, "min_count", config.model.min_count);
  }
  read_if(doc, "partition_seed", config.partition_seed);
  read_if(doc, "mean", config.mean);
  if (doc.contains("metrics")) {
    const json& metrics = doc.at("metrics");
    read_if(metrics, "sia_reference", config.sia_reference);
    read_if(metrics, "canary_words", config.canary_words);
    read_if(metrics, "canary_repetitions", config.canary_repetitions);
    read_if(metrics, "canary_reference_samples",
            config.canary_reference_samples);
    read_if(metrics, "canary_seed", config.canary_seed);
    read_if(metrics, "eval_seed", config.eval_seed);
    read_if(metrics, "percentile", config.percentile);
    read_if(metrics, "audit_contexts", config.audit_contexts);
  }
  read_if(doc, "output_dir", config.output_dir);
  return config;
}

std::string config_hash(const RunConfig& config) {
  // output_dir excluded: the same experiment written elsewhere is the same
  // experiment.
  return hex64(fnv1a64(config_to_json_doc(config, false).dump()));
}

std::vector<std::string> resolve_holdout_levels(
    const RunConfig& config, const std::vector<std::string>& all_levels) {
  std::vector<std::string> sorted = all_levels;
  std::sort(sorted.begin(), sorted.end());
  if (!config.holdout_levels.empty()) {
    const std::set<std::string> known(sorted.begin(), sorted.end());
    for (const std::string& level : config.holdout_levels) {
      if (!known.count(level)) {
        fail_validation("holdout level not present in corpus: " + level);
      }
    }
    return config.holdout_levels;
  }
  const int count = config.holdout_level_count;
  if (count < 0 || count >= static_cast<int>(sorted.size())) {
    fail_validation("holdout_level_count leaves no trainable levels");
  }
  return std::vector<std::string>(sorted.end() - count, sorted.end());
}

}  // namespace domba
