#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "domba/corpus.hpp"

namespace domba {

// Synthetic access-controlled corpus: shared background text generated from a
// seeded word-transition chain, plus per-level sensitive phrases built from a
// disjoint word pool so a phrase planted for one level can never occur in
// another level's records.
struct SynthConfig {
  int levels = 10;
  int records_per_level = 300;
  int phrases_per_level = 20;
  int phrase_words = 4;
  // Common phrases of the same shape, planted across every working level
  // (and thus not sensitive for any of them). They are the natural false
  // counterparts for the secret inference attack.
  int common_phrases = 6;
  double common_fraction = 0.5;  // share of plantings that pick a common
  // The last reference_level_count levels play the out-of-corpus role (the
  // SIA reference model trains on them): they carry their own phrases but
  // see each common only common_reference_occurrences times, the way a
  // generic pretraining corpus knows domain phrases only in passing.
  int reference_level_count = 2;
  int common_reference_occurrences = 2;
  // Plant counts follow ~1/rank^zipf: a few popular phrases, a long rare
  // tail.
  double zipf_exponent = 0.8;
  int decoy_phrases = 40;       // same shape, planted nowhere (test anchors)
  int background_words = 1200;  // background pool size
  int phrase_pool_words = 300;  // sensitive-phrase word pool size
  int sentences_min = 3;
  int sentences_max = 6;
  int sentence_words_min = 6;
  int sentence_words_max = 10;
  int phrases_per_record_min = 1;
  int phrases_per_record_max = 3;
  double eval_fraction = 0.10;
  int successors_per_word = 8;  // background chain branching factor
};

struct CanaryPlan {
  struct Entry {
    std::string level;
    std::vector<std::string> words;
  };
  std::vector<Entry> entries;  // ordered by level
  std::vector<std::string> word_pool;  // candidate-space sampler
  int repetitions = 30;
  int phrase_words = 7;
  std::uint64_t seed = 0;

  const Entry& entry_for(const std::string& level) const;
};

struct SyntheticCorpus {
  AccessCorpus corpus;
  std::map<std::string, std::vector<std::string>> planted;  // level -> phrases
  std::vector<std::string> commons;  // planted everywhere, sensitive nowhere
  std::vector<std::string> decoys;   // planted nowhere
  // Background pool; canaries drawn from it cannot collide with planted
  // phrases, whose words live in a disjoint pool.
  std::vector<std::string> background_words;
  std::uint64_t seed = 0;
};

SyntheticCorpus generate_synthetic_corpus(const SynthConfig& config,
                                          std::uint64_t seed);

// 30 repetitions (by default) of a random fixed-length word phrase per level,
// injected as train-split records of that level.
CanaryPlan make_canary_plan(const std::vector<std::string>& levels,
                            const std::vector<std::string>& word_pool,
                            std::uint64_t seed, int phrase_words = 7,
                            int repetitions = 30);

void inject_canaries(AccessCorpus& corpus, const CanaryPlan& plan);

// Per-record word frequency of each planted phrase inside its level vs the
// whole corpus (the >= 10x audit); returns level -> min ratio.
std::map<std::string, double> phrase_frequency_ratios(
    const AccessCorpus& corpus,
    const std::map<std::string, std::vector<std::string>>& planted);

// Sidecar with everything evaluation needs beyond the JSONL records:
// planted phrases, decoy pool, holdout levels, canary plan.
struct CorpusAux {
  std::map<std::string, std::vector<std::string>> planted;
  std::vector<std::string> decoys;
  std::vector<std::string> holdout_levels;
  CanaryPlan canary;
  std::string config_hash;
};

void save_corpus_aux(const CorpusAux& aux, const std::filesystem::path& path);
CorpusAux load_corpus_aux(const std::filesystem::path& path);

}  // namespace domba
