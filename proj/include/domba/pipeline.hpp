#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "domba/aggregate.hpp"
#include "domba/corpus.hpp"
#include "domba/mean.hpp"
#include "domba/ngram.hpp"
#include "domba/vocabulary.hpp"

namespace domba {

struct ModelConfig {
  int order = 2;
  double smoothing_alpha = 0.1;
  double weight = 1.0;
  int min_count = 1;
};

// Access level -> partition {1, 2}; reproducible from the seed.
struct PartitionAssignment {
  std::map<std::string, int> mapping;
  std::uint64_t seed = 0;

  int partition_of(const std::string& level) const;
  std::vector<std::string> levels_in(int partition) const;
};

// Independent coin per level (levels processed in sorted order); if every
// level lands in one partition, one uniformly chosen level is moved so both
// submodels stay trainable.
PartitionAssignment assign_partitions(const std::vector<std::string>& levels,
                                      std::uint64_t seed);

// One access level's inference pair: the submodel of its own partition
// untouched, the opposite submodel fine-tuned on the level's documents.
struct ModelPair {
  std::shared_ptr<const NGramModel> unchanged;
  std::shared_ptr<const NGramModel> finetuned;
};

class ModelRegistry {
 public:
  PartitionAssignment assignment;
  std::shared_ptr<const NGramModel> init_m1;
  std::shared_ptr<const NGramModel> init_m2;
  std::map<std::string, ModelPair> per_level;
  std::string config_hash;

  const ModelPair& pair_for(const std::string& level) const;
  std::vector<std::string> levels() const;
};

// Tokenized train-split records of the given levels.
std::vector<std::vector<TokenId>> training_sequences(
    const AccessCorpus& corpus, const Vocabulary& vocabulary,
    const std::vector<std::string>& levels, Split split = Split::train);

// DOMBA-INIT: one submodel per partition, trained on disjoint record sets.
// Throws when a partition has no train records.
std::pair<NGramModel, NGramModel> domba_init(const AccessCorpus& corpus,
                                             const PartitionAssignment& assignment,
                                             const Vocabulary& vocabulary,
                                             const ModelConfig& config);

// DOMBA-FT for one level: fine-tunes the opposite submodel on the level's
// train records; returns the inference pair. The INIT models are shared,
// never modified.
ModelPair domba_ft(const AccessCorpus& corpus,
                   const PartitionAssignment& assignment,
                   std::shared_ptr<const NGramModel> m1,
                   std::shared_ptr<const NGramModel> m2,
                   const std::string& level, double weight);

// Full DOMBA training: INIT plus FT for every level in the assignment.
ModelRegistry train_registry(const AccessCorpus& corpus,
                             const Vocabulary& vocabulary,
                             const std::vector<std::string>& levels,
                             const ModelConfig& config, std::uint64_t seed,
                             const std::string& config_hash = {});

// Min-bounded aggregate over a level's pair. Throws with the known levels
// listed when the level is absent.
AggregatedModel build_domba_model(const ModelRegistry& registry,
                                  const std::string& level,
                                  const MeanSpec& mean);

// DOMBA-INIT without FT, aggregated directly (D-I-H / D-I-M variants).
AggregatedModel build_init_model(const ModelRegistry& registry,
                                 const MeanSpec& mean);

struct BaselineSet {
  std::shared_ptr<const NGramModel> ft_all;
  std::map<std::string, std::shared_ptr<const NGramModel>> per_level;
  std::shared_ptr<const AggregatedModel> agg_a;
};

BaselineSet build_baselines(const AccessCorpus& corpus,
                            const ModelRegistry& registry,
                            const Vocabulary& vocabulary,
                            const ModelConfig& config);

// Sensitive phrases whose text occurs in train records of both partitions
// (the separation assumption the exposure bound leans on).
std::vector<std::string> isolation_violations(
    const AccessCorpus& corpus, const PartitionAssignment& assignment);

// Registry directory: init + per-level fine-tuned model files and a
// manifest.json with the assignment, seeds and file hashes.
void save_registry(const ModelRegistry& registry,
                   const std::filesystem::path& dir);
ModelRegistry load_registry(const std::filesystem::path& dir);

}  // namespace domba
