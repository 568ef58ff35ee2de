#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "domba/pipeline.hpp"
#include "domba/synth.hpp"

namespace domba {

// One experiment, fully determined by this structure. Its hash is embedded
// in every artifact so reruns are checkable byte for byte.
struct RunConfig {
  // Corpus source: a JSONL path, or the synthetic generator when empty.
  std::string corpus_path;
  SynthConfig synth;
  std::uint64_t corpus_seed = 20240801;
  int holdout_level_count = 2;
  std::vector<std::string> holdout_levels;  // explicit override

  ModelConfig model;
  std::uint64_t partition_seed = 42;
  std::string mean = "min";

  // SIA reference model: "holdout" trains on the held-out levels'
  // background text; "uniform" uses the untrained smoothed model.
  std::string sia_reference = "holdout";
  int canary_words = 7;
  int canary_repetitions = 30;
  int canary_reference_samples = 10000;
  std::uint64_t canary_seed = 7;
  std::uint64_t eval_seed = 11;
  int percentile = 99;
  int audit_contexts = 1000;

  std::string output_dir = "out";
};

RunConfig default_config();
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);

// FNV-1a over the canonical JSON serialization (output_dir excluded; the
// same experiment written elsewhere is the same experiment).
std::string config_hash(const RunConfig& config);

// Holdout levels: the explicit list when given, otherwise the last
// holdout_level_count levels of the corpus in sorted order.
std::vector<std::string> resolve_holdout_levels(
    const RunConfig& config, const std::vector<std::string>& all_levels);

}  // namespace domba
