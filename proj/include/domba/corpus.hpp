#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace domba {

enum class Split { train, eval };

// Character span [begin, end) of a sensitive phrase occurrence in a record.
struct SensitiveSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string kind = "sensitive";
};

struct Record {
  std::string record_id;
  std::string text;
  std::string access_level;
  Split split = Split::train;
  std::vector<SensitiveSpan> sensitive_spans;
};

// Data records tagged with access level, sensitive-phrase spans and split.
struct AccessCorpus {
  std::vector<Record> records;
  std::vector<std::string> levels;  // every level present, sorted

  bool empty() const { return records.empty(); }
};

// Validates level membership and span bounds; throws on violation.
void validate_corpus(const AccessCorpus& corpus);

// One JSON object per line: record_id, text, access_level, split,
// sensitive_phrases (list of strings located in the text). Spans are
// reconstructed on load as all non-overlapping occurrences of each phrase.
void save_corpus_jsonl(const AccessCorpus& corpus,
                       const std::filesystem::path& path);
AccessCorpus load_corpus_jsonl(const std::filesystem::path& path);

// Phrase text of a span.
std::string span_text(const Record& record, const SensitiveSpan& span);

// Subset of the corpus containing only the given levels.
AccessCorpus filter_levels(const AccessCorpus& corpus,
                           const std::vector<std::string>& keep);

}  // namespace domba
