#include "domba/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"

#include "domba/common.hpp"
#include "domba/vocabulary.hpp"

namespace domba {

using nlohmann::json;

namespace {

constexpr const char* kSyllables[] = {
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
    "ka", "ke", "ki", "ko", "ku", "la", "le", "li", "lo", "lu",
    "ma", "me", "mi", "mo", "mu", "na", "ne", "ni", "no", "nu",
    "ra", "re", "ri", "ro", "ru", "sa", "se", "si", "so", "su",
    "ta", "te", "ti", "to", "tu", "va", "ve", "vi", "vo", "vu"};
constexpr int kSyllableCount = 50;

std::string make_word(Rng& rng) {
  const int syllables = 2 + static_cast<int>(rng.uniform_int(std::uint64_t{2}));
  std::string word;
  for (int s = 0; s < syllables; ++s) {
    word += kSyllables[rng.uniform_int(std::uint64_t{kSyllableCount})];
  }
  return word;
}

std::vector<std::string> make_pool(Rng& rng, int count,
                                   std::set<std::string>& used) {
  std::vector<std::string> pool;
  pool.reserve(count);
  while (static_cast<int>(pool.size()) < count) {
    std::string word = make_word(rng);
    if (used.insert(word).second) pool.push_back(std::move(word));
  }
  return pool;
}

std::string level_name(int index) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "al%02d", index);
  return std::string(buffer);
}

std::string join_words(const std::vector<std::string>& words) {
  std::string text;
  for (const std::string& word : words) {
    if (!text.empty()) text += ' ';
    text += word;
  }
  return text;
}

// Weighted successor pick; weights 8..1 over the successor list.
std::size_t pick_successor(Rng& rng, std::size_t fanout) {
  const std::uint64_t total = fanout * (fanout + 1) / 2;
  std::uint64_t r = rng.uniform_int(total);
  for (std::size_t i = 0; i < fanout; ++i) {
    const std::uint64_t weight = fanout - i;
    if (r < weight) return i;
    r -= weight;
  }
  return fanout - 1;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SynthConfig& config,
                                          std::uint64_t seed) {
  if (config.levels < 1) fail_validation("level count must be >= 1");
  if (config.records_per_level < 1) {
    fail_validation("records per level must be >= 1");
  }
  if (config.phrase_words < 1) fail_validation("phrase length must be >= 1");
  if (config.background_words < 2 || config.phrase_pool_words < 2) {
    fail_validation("word pools must have at least 2 words");
  }

  // Uniqueness capacity: distinct word combinations must comfortably cover
  // the requested planted + decoy phrases.
  const double capacity =
      std::pow(static_cast<double>(config.phrase_pool_words),
               config.phrase_words);
  const double needed = static_cast<double>(config.levels) *
                            config.phrases_per_level +
                        config.decoy_phrases + config.common_phrases;
  if (needed > capacity / 2.0) {
    fail_validation("vocabulary too small for requested phrase uniqueness");
  }

  Rng rng(seed);
  std::set<std::string> used_words;
  const std::vector<std::string> background =
      make_pool(rng, config.background_words, used_words);
  const std::vector<std::string> phrase_pool =
      make_pool(rng, config.phrase_pool_words, used_words);

  // Background word-transition chain, shared by every level.
  const std::size_t fanout =
      std::min<std::size_t>(config.successors_per_word, background.size() - 1);
  std::vector<std::vector<std::size_t>> successors(background.size());
  for (std::size_t w = 0; w < background.size(); ++w) {
    std::set<std::size_t> picked;
    while (picked.size() < fanout) {
      const std::size_t s = rng.uniform_int(background.size());
      if (s != w) picked.insert(s);
    }
    successors[w].assign(picked.begin(), picked.end());
    rng.shuffle(successors[w]);
  }

  // Planted phrases cycle through a shuffled pool so every pool word occurs,
  // then fall back to rejection sampling for uniqueness.
  std::set<std::vector<std::string>> used_phrases;
  std::vector<std::string> cycle = phrase_pool;
  rng.shuffle(cycle);
  std::size_t cursor = 0;
  auto next_phrase = [&]() {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::vector<std::string> words;
      words.reserve(config.phrase_words);
      for (int w = 0; w < config.phrase_words; ++w) {
        if (cursor >= cycle.size()) {
          rng.shuffle(cycle);
          cursor = 0;
        }
        words.push_back(cycle[cursor++]);
      }
      if (used_phrases.insert(words).second) return words;
    }
    fail_validation("vocabulary too small for requested phrase uniqueness");
  };

  SyntheticCorpus result;
  result.seed = seed;
  result.background_words = background;
  std::vector<std::string> levels;
  for (int l = 0; l < config.levels; ++l) levels.push_back(level_name(l));
  for (const std::string& level : levels) {
    std::vector<std::string> phrases;
    for (int p = 0; p < config.phrases_per_level; ++p) {
      phrases.push_back(join_words(next_phrase()));
    }
    result.planted[level] = std::move(phrases);
  }
  for (int c = 0; c < config.common_phrases; ++c) {
    result.commons.push_back(join_words(next_phrase()));
  }
  for (int d = 0; d < config.decoy_phrases; ++d) {
    result.decoys.push_back(join_words(next_phrase()));
  }

  // Zipf-ish plant counts: cumulative weights 1/(rank+1)^s.
  auto zipf_cumulative = [&](std::size_t count) {
    std::vector<double> cumulative(count);
    double total = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      total += std::pow(static_cast<double>(k + 1), -config.zipf_exponent);
      cumulative[k] = total;
    }
    return cumulative;
  };
  auto zipf_pick = [](Rng& r, const std::vector<double>& cumulative) {
    const double u = r.uniform() * cumulative.back();
    return static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) -
        cumulative.begin());
  };
  const std::vector<double> level_cumulative =
      zipf_cumulative(config.phrases_per_level);

  // The trailing levels act as the reference (out-of-corpus) slice: their
  // records carry commons only through a fixed light sprinkling.
  const int reference_from =
      std::max(0, config.levels - std::max(0, config.reference_level_count));

  // Records: background chain walks with the level's phrases planted at
  // distinct word boundaries (so two phrases are never adjacent and no new
  // phrase-pool word sequence can arise across a boundary).
  std::size_t start_cursor = 0;  // round-robin starts cover the pool
  AccessCorpus& corpus = result.corpus;
  corpus.levels = levels;
  for (int level_index = 0; level_index < config.levels; ++level_index) {
    const std::string& level = levels[level_index];
    const bool reference_level = level_index >= reference_from;
    const std::vector<std::string>& phrases = result.planted.at(level);

    // Pre-assign the sprinkled common occurrences to records of this level.
    std::map<int, std::vector<std::string>> sprinkled;
    if (reference_level) {
      for (const std::string& common : result.commons) {
        for (int occurrence = 0;
             occurrence < config.common_reference_occurrences; ++occurrence) {
          sprinkled[static_cast<int>(
                        rng.uniform_int(config.records_per_level))]
              .push_back(common);
        }
      }
    }

    for (int r = 0; r < config.records_per_level; ++r) {
      std::vector<std::string> words;
      const int sentences =
          config.sentences_min +
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
              config.sentences_max - config.sentences_min + 1)));
      for (int s = 0; s < sentences; ++s) {
        const int length =
            config.sentence_words_min +
            static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                config.sentence_words_max - config.sentence_words_min + 1)));
        std::size_t current = s == 0
                                  ? (start_cursor++ % background.size())
                                  : rng.uniform_int(background.size());
        words.push_back(background[current]);
        for (int w = 1; w < length; ++w) {
          if (rng.uniform() < 0.85) {
            current = successors[current][pick_successor(rng, fanout)];
          } else {
            current = rng.uniform_int(background.size());
          }
          words.push_back(background[current]);
        }
      }

      const int plant_count =
          config.phrases_per_record_min +
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
              config.phrases_per_record_max - config.phrases_per_record_min +
              1)));
      std::set<std::size_t> slots;
      while (static_cast<int>(slots.size()) <
             std::min<int>(plant_count, static_cast<int>(words.size()) + 1)) {
        slots.insert(rng.uniform_int(words.size() + 1));
      }
      struct Insert {
        std::size_t slot;
        std::string phrase;
        bool sensitive;
      };
      std::vector<Insert> inserts;
      for (std::size_t slot : slots) {
        const bool common = !reference_level && !result.commons.empty() &&
                            rng.uniform() < config.common_fraction;
        if (common) {
          // commons are common: uniform pick keeps every one well covered
          // across the working levels
          inserts.push_back(
              {slot, result.commons[rng.uniform_int(result.commons.size())],
               false});
        } else {
          inserts.push_back(
              {slot, phrases[zipf_pick(rng, level_cumulative)], true});
        }
      }
      if (const auto it = sprinkled.find(r); it != sprinkled.end()) {
        for (const std::string& common : it->second) {
          std::size_t slot = rng.uniform_int(words.size() + 1);
          while (std::any_of(inserts.begin(), inserts.end(),
                             [slot](const Insert& ins) {
                               return ins.slot == slot;
                             })) {
            slot = rng.uniform_int(words.size() + 1);
          }
          inserts.push_back({slot, common, false});
        }
      }
      std::sort(inserts.begin(), inserts.end(),
                [](const Insert& a, const Insert& b) { return a.slot < b.slot; });

      Record record;
      record.access_level = level;
      char id[32];
      std::snprintf(id, sizeof(id), "%s-r%04d", level.c_str(), r);
      record.record_id = id;

      std::string text;
      std::size_t next_insert = 0;
      auto append_word = [&text](const std::string& word) {
        if (!text.empty()) text += ' ';
        text += word;
      };
      for (std::size_t w = 0; w <= words.size(); ++w) {
        if (next_insert < inserts.size() && inserts[next_insert].slot == w) {
          const std::string& phrase = inserts[next_insert].phrase;
          const std::size_t begin = text.empty() ? 0 : text.size() + 1;
          append_word(phrase);
          if (inserts[next_insert].sensitive) {
            record.sensitive_spans.push_back(
                {begin, begin + phrase.size(), "sensitive"});
          }
          ++next_insert;
        }
        if (w < words.size()) append_word(words[w]);
      }
      record.text = std::move(text);
      corpus.records.push_back(std::move(record));
    }

    // Exact 10% eval split (rounded), chosen by shuffle.
    const std::size_t base = corpus.records.size() - config.records_per_level;
    std::vector<std::size_t> indices(config.records_per_level);
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = base + i;
    rng.shuffle(indices);
    const std::size_t eval_count = static_cast<std::size_t>(
        config.records_per_level * config.eval_fraction + 0.5);
    for (std::size_t i = 0; i < eval_count; ++i) {
      corpus.records[indices[i]].split = Split::eval;
    }
  }

  validate_corpus(corpus);
  return result;
}

CanaryPlan make_canary_plan(const std::vector<std::string>& levels,
                            const std::vector<std::string>& word_pool,
                            std::uint64_t seed, int phrase_words,
                            int repetitions) {
  if (word_pool.size() < 2) fail_validation("canary word pool too small");
  CanaryPlan plan;
  plan.word_pool = word_pool;
  plan.repetitions = repetitions;
  plan.phrase_words = phrase_words;
  plan.seed = seed;
  Rng rng(seed);
  std::vector<std::string> sorted = levels;
  std::sort(sorted.begin(), sorted.end());
  for (const std::string& level : sorted) {
    CanaryPlan::Entry entry;
    entry.level = level;
    for (int w = 0; w < phrase_words; ++w) {
      entry.words.push_back(word_pool[rng.uniform_int(word_pool.size())]);
    }
    plan.entries.push_back(std::move(entry));
  }
  return plan;
}

const CanaryPlan::Entry& CanaryPlan::entry_for(const std::string& level) const {
  for (const Entry& entry : entries) {
    if (entry.level == level) return entry;
  }
  fail_validation("no canary planned for level " + level);
}

void inject_canaries(AccessCorpus& corpus, const CanaryPlan& plan) {
  const std::set<std::string> known(corpus.levels.begin(),
                                    corpus.levels.end());
  for (const CanaryPlan::Entry& entry : plan.entries) {
    if (!known.count(entry.level)) {
      fail_validation("canary level not in corpus: " + entry.level);
    }
    const std::string text = join_words(entry.words);
    for (int r = 0; r < plan.repetitions; ++r) {
      Record record;
      char id[48];
      std::snprintf(id, sizeof(id), "canary-%s-%03d", entry.level.c_str(), r);
      record.record_id = id;
      record.text = text;
      record.access_level = entry.level;
      record.split = Split::train;
      corpus.records.push_back(std::move(record));
    }
  }
}

std::map<std::string, double> phrase_frequency_ratios(
    const AccessCorpus& corpus,
    const std::map<std::string, std::vector<std::string>>& planted) {
  std::map<std::string, long long> level_records;
  for (const Record& record : corpus.records) {
    ++level_records[record.access_level];
  }
  long long total_records = static_cast<long long>(corpus.records.size());

  // phrase -> (occurrences in its level, occurrences anywhere)
  std::map<std::string, std::pair<long long, long long>> occurrences;
  std::map<std::string, std::string> phrase_level;
  for (const auto& [level, phrases] : planted) {
    for (const std::string& phrase : phrases) {
      occurrences[phrase] = {0, 0};
      phrase_level[phrase] = level;
    }
  }
  for (const Record& record : corpus.records) {
    for (const SensitiveSpan& span : record.sensitive_spans) {
      const std::string text = span_text(record, span);
      auto it = occurrences.find(text);
      if (it == occurrences.end()) continue;
      ++it->second.second;
      if (phrase_level[text] == record.access_level) ++it->second.first;
    }
  }

  std::map<std::string, double> ratios;
  for (const auto& [phrase, counts] : occurrences) {
    const std::string& level = phrase_level[phrase];
    if (counts.second == 0) continue;  // never planted in the end
    const double ratio =
        (static_cast<double>(counts.first) * total_records) /
        (static_cast<double>(counts.second) * level_records[level]);
    auto [it, inserted] = ratios.emplace(level, ratio);
    if (!inserted) it->second = std::min(it->second, ratio);
  }
  return ratios;
}

void save_corpus_aux(const CorpusAux& aux, const std::filesystem::path& path) {
  json doc;
  doc["version"] = 1;
  doc["config_hash"] = aux.config_hash;
  doc["holdout_levels"] = aux.holdout_levels;
  json planted = json::object();
  for (const auto& [level, phrases] : aux.planted) planted[level] = phrases;
  doc["planted"] = planted;
  doc["decoys"] = aux.decoys;
  json canary;
  canary["seed"] = aux.canary.seed;
  canary["repetitions"] = aux.canary.repetitions;
  canary["phrase_words"] = aux.canary.phrase_words;
  canary["word_pool"] = aux.canary.word_pool;
  json entries = json::object();
  for (const auto& entry : aux.canary.entries) {
    entries[entry.level] = entry.words;
  }
  canary["entries"] = entries;
  doc["canary"] = canary;

  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot write corpus aux file: " + path.string());
  out << doc.dump(2) << "\n";
}

CorpusAux load_corpus_aux(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open corpus aux file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail_io(std::string("corpus aux file is not valid JSON: ") + e.what());
  }
  CorpusAux aux;
  aux.config_hash = doc.at("config_hash").get<std::string>();
  aux.holdout_levels =
      doc.at("holdout_levels").get<std::vector<std::string>>();
  for (const auto& [level, phrases] : doc.at("planted").items()) {
    aux.planted[level] = phrases.get<std::vector<std::string>>();
  }
  aux.decoys = doc.at("decoys").get<std::vector<std::string>>();
  const json& canary = doc.at("canary");
  aux.canary.seed = canary.at("seed").get<std::uint64_t>();
  aux.canary.repetitions = canary.at("repetitions").get<int>();
  aux.canary.phrase_words = canary.at("phrase_words").get<int>();
  aux.canary.word_pool =
      canary.at("word_pool").get<std::vector<std::string>>();
  for (const auto& [level, words] : canary.at("entries").items()) {
    aux.canary.entries.push_back(
        {level, words.get<std::vector<std::string>>()});
  }
  return aux;
}

}  // namespace domba
