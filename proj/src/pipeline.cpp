#include "domba/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "domba/common.hpp"

namespace domba {

using nlohmann::json;

int PartitionAssignment::partition_of(const std::string& level) const {
  const auto it = mapping.find(level);
  if (it == mapping.end()) fail_validation("unknown access level: " + level);
  return it->second;
}

std::vector<std::string> PartitionAssignment::levels_in(int partition) const {
  std::vector<std::string> out;
  for (const auto& [level, p] : mapping) {
    if (p == partition) out.push_back(level);
  }
  return out;
}

PartitionAssignment assign_partitions(const std::vector<std::string>& levels,
                                      std::uint64_t seed) {
  if (levels.size() < 2) fail_validation("need >=2 access levels");
  std::vector<std::string> sorted = levels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail_validation("duplicate access level in partition input");
  }

  PartitionAssignment assignment;
  assignment.seed = seed;
  Rng rng(seed);
  for (const std::string& level : sorted) {
    assignment.mapping[level] = rng.uniform_int(std::uint64_t{2}) == 0 ? 1 : 2;
  }
  // Both partitions must be non-empty for two trainable submodels.
  const auto in_1 = assignment.levels_in(1).size();
  if (in_1 == 0 || in_1 == sorted.size()) {
    const std::string& moved = sorted[rng.uniform_int(sorted.size())];
    assignment.mapping[moved] = in_1 == 0 ? 1 : 2;
  }
  return assignment;
}

const ModelPair& ModelRegistry::pair_for(const std::string& level) const {
  const auto it = per_level.find(level);
  if (it == per_level.end()) {
    std::string known;
    for (const auto& [name, pair] : per_level) {
      known += known.empty() ? name : ", " + name;
    }
    fail_validation("unknown access level '" + level + "' (known: " + known +
                    ")");
  }
  return it->second;
}

std::vector<std::string> ModelRegistry::levels() const {
  std::vector<std::string> out;
  out.reserve(per_level.size());
  for (const auto& [level, pair] : per_level) out.push_back(level);
  return out;
}

std::vector<std::vector<TokenId>> training_sequences(
    const AccessCorpus& corpus, const Vocabulary& vocabulary,
    const std::vector<std::string>& levels, Split split) {
  const std::set<std::string> wanted(levels.begin(), levels.end());
  std::vector<std::vector<TokenId>> sequences;
  for (const Record& record : corpus.records) {
    if (record.split != split || !wanted.count(record.access_level)) continue;
    sequences.push_back(vocabulary.ids(tokenize(record.text)));
  }
  return sequences;
}

namespace {

std::string levels_label(const std::vector<std::string>& levels) {
  std::string label;
  for (const std::string& level : levels) {
    label += label.empty() ? level : "," + level;
  }
  return label;
}

}  // namespace

std::pair<NGramModel, NGramModel> domba_init(
    const AccessCorpus& corpus, const PartitionAssignment& assignment,
    const Vocabulary& vocabulary, const ModelConfig& config) {
  for (const std::string& level : corpus.levels) {
    if (!assignment.mapping.count(level)) {
      fail_validation("assignment does not cover level " + level);
    }
  }
  auto train_partition = [&](int partition) {
    const std::vector<std::string> levels = assignment.levels_in(partition);
    const auto sequences =
        training_sequences(corpus, vocabulary, levels, Split::train);
    if (sequences.empty()) {
      fail_validation("partition " + std::to_string(partition) +
                      " has no train records");
    }
    ModelMeta meta;
    meta.corpus_ids = "partition-" + std::to_string(partition) + ":" +
                      levels_label(levels);
    meta.seed = assignment.seed;
    return train_ngram(vocabulary, sequences, config.order,
                       config.smoothing_alpha, config.weight, std::move(meta));
  };
  return {train_partition(1), train_partition(2)};
}

ModelPair domba_ft(const AccessCorpus& corpus,
                   const PartitionAssignment& assignment,
                   std::shared_ptr<const NGramModel> m1,
                   std::shared_ptr<const NGramModel> m2,
                   const std::string& level, double weight) {
  const int partition = assignment.partition_of(level);
  const auto own = partition == 1 ? m1 : m2;
  const auto& opposite = partition == 1 ? m2 : m1;
  const auto level_data = training_sequences(corpus, own->vocabulary(),
                                             {level}, Split::train);
  ModelMeta meta = opposite->meta();
  meta.corpus_ids += "+ft:" + level;
  ModelPair pair;
  pair.unchanged = own;
  pair.finetuned = std::make_shared<NGramModel>(
      merge_finetune(*opposite, level_data, weight, &meta));
  return pair;
}

ModelRegistry train_registry(const AccessCorpus& corpus,
                             const Vocabulary& vocabulary,
                             const std::vector<std::string>& levels,
                             const ModelConfig& config, std::uint64_t seed,
                             const std::string& config_hash) {
  ModelRegistry registry;
  registry.assignment = assign_partitions(levels, seed);
  registry.config_hash = config_hash;

  const AccessCorpus scoped = filter_levels(corpus, levels);
  auto [m1, m2] = domba_init(scoped, registry.assignment, vocabulary, config);
  registry.init_m1 = std::make_shared<NGramModel>(std::move(m1));
  registry.init_m2 = std::make_shared<NGramModel>(std::move(m2));

  for (const std::string& level : levels) {
    registry.per_level[level] =
        domba_ft(scoped, registry.assignment, registry.init_m1,
                 registry.init_m2, level, config.weight);
  }
  return registry;
}

AggregatedModel build_domba_model(const ModelRegistry& registry,
                                  const std::string& level,
                                  const MeanSpec& mean) {
  const ModelPair& pair = registry.pair_for(level);
  return AggregatedModel(pair.unchanged, pair.finetuned, mean,
                         AggregatedModel::Mode::relative);
}

AggregatedModel build_init_model(const ModelRegistry& registry,
                                 const MeanSpec& mean) {
  return AggregatedModel(registry.init_m1, registry.init_m2, mean,
                         AggregatedModel::Mode::relative);
}

BaselineSet build_baselines(const AccessCorpus& corpus,
                            const ModelRegistry& registry,
                            const Vocabulary& vocabulary,
                            const ModelConfig& config) {
  BaselineSet baselines;
  const std::vector<std::string> levels = registry.levels();

  ModelMeta ft_all_meta;
  ft_all_meta.corpus_ids = "ft-all:" + levels_label(levels);
  baselines.ft_all = std::make_shared<NGramModel>(train_ngram(
      vocabulary, training_sequences(corpus, vocabulary, levels, Split::train),
      config.order, config.smoothing_alpha, config.weight,
      std::move(ft_all_meta)));

  for (const std::string& level : levels) {
    ModelMeta meta;
    meta.corpus_ids = "per-al:" + level;
    baselines.per_level[level] = std::make_shared<NGramModel>(train_ngram(
        vocabulary,
        training_sequences(corpus, vocabulary, {level}, Split::train),
        config.order, config.smoothing_alpha, config.weight, std::move(meta)));
  }

  baselines.agg_a = std::make_shared<AggregatedModel>(
      registry.init_m1, registry.init_m2, MeanSpec::arithmetic_baseline(),
      AggregatedModel::Mode::absolute_baseline);
  return baselines;
}

std::vector<std::string> isolation_violations(
    const AccessCorpus& corpus, const PartitionAssignment& assignment) {
  // phrase text -> set of partitions whose train records contain it
  std::map<std::string, std::set<int>> where;
  for (const Record& record : corpus.records) {
    if (record.split != Split::train) continue;
    if (!assignment.mapping.count(record.access_level)) continue;
    const int partition = assignment.partition_of(record.access_level);
    for (const SensitiveSpan& span : record.sensitive_spans) {
      where[span_text(record, span)].insert(partition);
    }
  }
  std::vector<std::string> violations;
  for (const auto& [phrase, partitions] : where) {
    if (partitions.size() > 1) violations.push_back(phrase);
  }
  return violations;
}

void save_registry(const ModelRegistry& registry,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "ft");
  save_model(*registry.init_m1, dir / "init_m1.dlm");
  save_model(*registry.init_m2, dir / "init_m2.dlm");

  json manifest;
  manifest["version"] = 1;
  manifest["config_hash"] = registry.config_hash;
  manifest["partition_seed"] = registry.assignment.seed;
  json mapping = json::object();
  for (const auto& [level, partition] : registry.assignment.mapping) {
    mapping[level] = partition;
  }
  manifest["assignment"] = mapping;

  json models = json::object();
  models["init_m1.dlm"] = hex64(fnv1a64_file(dir / "init_m1.dlm"));
  models["init_m2.dlm"] = hex64(fnv1a64_file(dir / "init_m2.dlm"));

  json pairs = json::object();
  for (const auto& [level, pair] : registry.per_level) {
    const std::string file = "ft/" + level + ".dlm";
    save_model(*pair.finetuned, dir / file);
    models[file] = hex64(fnv1a64_file(dir / file));
    const int partition = registry.assignment.partition_of(level);
    json entry;
    entry["unchanged"] =
        partition == 1 ? "init_m1.dlm" : "init_m2.dlm";
    entry["finetuned"] = file;
    pairs[level] = entry;
  }
  manifest["pairs"] = pairs;
  manifest["model_hashes"] = models;

  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) fail_io("cannot write registry manifest");
  out << manifest.dump(2) << "\n";
}

ModelRegistry load_registry(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) fail_io("cannot open registry manifest in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    fail_io(std::string("registry manifest is not valid JSON: ") + e.what());
  }
  if (manifest.at("version").get<int>() != 1) {
    fail_io("unsupported registry manifest version");
  }

  ModelRegistry registry;
  registry.config_hash = manifest.at("config_hash").get<std::string>();
  registry.assignment.seed = manifest.at("partition_seed").get<std::uint64_t>();
  for (const auto& [level, partition] : manifest.at("assignment").items()) {
    registry.assignment.mapping[level] = partition.get<int>();
  }

  for (const auto& [file, expected] :
       manifest.at("model_hashes").items()) {
    const std::string actual = hex64(fnv1a64_file(dir / file));
    if (actual != expected.get<std::string>()) {
      fail_io("registry model " + file + " does not match its manifest hash");
    }
  }

  registry.init_m1 =
      std::make_shared<NGramModel>(load_model(dir / "init_m1.dlm"));
  registry.init_m2 =
      std::make_shared<NGramModel>(load_model(dir / "init_m2.dlm"));
  for (const auto& [level, entry] : manifest.at("pairs").items()) {
    ModelPair pair;
    const std::string unchanged = entry.at("unchanged").get<std::string>();
    pair.unchanged =
        unchanged == "init_m1.dlm" ? registry.init_m1 : registry.init_m2;
    pair.finetuned = std::make_shared<NGramModel>(
        load_model(dir / entry.at("finetuned").get<std::string>()));
    registry.per_level[level] = std::move(pair);
  }
  return registry;
}

}  // namespace domba
