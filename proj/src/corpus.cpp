#include "domba/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "domba/common.hpp"

namespace domba {

using nlohmann::json;

void validate_corpus(const AccessCorpus& corpus) {
  std::set<std::string> levels(corpus.levels.begin(), corpus.levels.end());
  if (levels.size() != corpus.levels.size()) {
    fail_validation("corpus level list contains duplicates");
  }
  for (const Record& record : corpus.records) {
    if (!levels.count(record.access_level)) {
      fail_validation("record " + record.record_id + " has unknown level " +
                      record.access_level);
    }
    for (const SensitiveSpan& span : record.sensitive_spans) {
      if (span.begin >= span.end || span.end > record.text.size()) {
        fail_validation("record " + record.record_id +
                        " has a sensitive span outside the text bounds");
      }
    }
  }
}

std::string span_text(const Record& record, const SensitiveSpan& span) {
  return record.text.substr(span.begin, span.end - span.begin);
}

namespace {

std::vector<std::string> unique_phrases(const Record& record) {
  std::vector<std::string> phrases;
  for (const SensitiveSpan& span : record.sensitive_spans) {
    std::string text = span_text(record, span);
    if (std::find(phrases.begin(), phrases.end(), text) == phrases.end()) {
      phrases.push_back(std::move(text));
    }
  }
  return phrases;
}

// All non-overlapping occurrences, leftmost-first.
void add_phrase_spans(Record& record, const std::string& phrase) {
  if (phrase.empty()) return;
  std::size_t pos = 0;
  while ((pos = record.text.find(phrase, pos)) != std::string::npos) {
    record.sensitive_spans.push_back({pos, pos + phrase.size(), "sensitive"});
    pos += phrase.size();
  }
}

}  // namespace

void save_corpus_jsonl(const AccessCorpus& corpus,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot write corpus file: " + path.string());
  for (const Record& record : corpus.records) {
    json line;
    line["record_id"] = record.record_id;
    line["text"] = record.text;
    line["access_level"] = record.access_level;
    line["split"] = record.split == Split::train ? "train" : "eval";
    line["sensitive_phrases"] = unique_phrases(record);
    out << line.dump() << "\n";
  }
  if (!out) fail_io("failed writing corpus file: " + path.string());
}

AccessCorpus load_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open corpus file: " + path.string());
  AccessCorpus corpus;
  std::set<std::string> levels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json parsed;
    try {
      parsed = json::parse(line);
    } catch (const json::exception& e) {
      fail_io("corpus line " + std::to_string(line_no) +
              " is not valid JSON: " + e.what());
    }
    Record record;
    record.record_id = parsed.at("record_id").get<std::string>();
    record.text = parsed.at("text").get<std::string>();
    record.access_level = parsed.at("access_level").get<std::string>();
    const std::string split = parsed.at("split").get<std::string>();
    if (split == "train") {
      record.split = Split::train;
    } else if (split == "eval") {
      record.split = Split::eval;
    } else {
      fail_io("corpus line " + std::to_string(line_no) + " has unknown split " +
              split);
    }
    if (parsed.contains("sensitive_phrases")) {
      for (const auto& phrase : parsed.at("sensitive_phrases")) {
        add_phrase_spans(record, phrase.get<std::string>());
      }
      std::sort(record.sensitive_spans.begin(), record.sensitive_spans.end(),
                [](const SensitiveSpan& a, const SensitiveSpan& b) {
                  return a.begin < b.begin;
                });
    }
    levels.insert(record.access_level);
    corpus.records.push_back(std::move(record));
  }
  corpus.levels.assign(levels.begin(), levels.end());
  validate_corpus(corpus);
  return corpus;
}

AccessCorpus filter_levels(const AccessCorpus& corpus,
                           const std::vector<std::string>& keep) {
  std::set<std::string> wanted(keep.begin(), keep.end());
  AccessCorpus out;
  for (const Record& record : corpus.records) {
    if (wanted.count(record.access_level)) out.records.push_back(record);
  }
  for (const std::string& level : corpus.levels) {
    if (wanted.count(level)) out.levels.push_back(level);
  }
  return out;
}

}  // namespace domba
