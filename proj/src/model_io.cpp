#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "domba/common.hpp"
#include "domba/ngram.hpp"

// Model file layout (little-endian, version 1):
//   "DNGM" | u32 version | u32 order | f64 alpha
//   u32 n | n x (u32 len, bytes)                  token strings in id order
//   u32 len, bytes | f64 weight | u64 seed        metadata
//   u64 n_contexts
//   per context, sorted by id sequence:
//     u32 ctx_len | ctx_len x u32 | f64 total
//     u32 n_entries | entries (u32 id, f64 count), sorted by token id
//   u64 fnv1a checksum of all preceding bytes

namespace domba {

namespace {

constexpr char kMagic[4] = {'D', 'N', 'G', 'M'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back((v >> (8 * i)) & 0xffu);
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back((v >> (8 * i)) & 0xffu);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t position() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  void need(std::size_t count) {
    if (pos_ + count > bytes_.size()) {
      fail_io("model file truncated: unexpected end of data");
    }
  }
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const NGramModel& model, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(model.order()));
  w.f64(model.smoothing_alpha());

  const Vocabulary& vocab = model.vocabulary();
  w.u32(static_cast<std::uint32_t>(vocab.size()));
  for (const std::string& token : vocab.tokens()) w.str(token);

  w.str(model.meta().corpus_ids);
  w.f64(model.meta().weight);
  w.u64(model.meta().seed);

  std::vector<const std::vector<TokenId>*> keys;
  keys.reserve(model.counts().size());
  for (const auto& [key, ctx] : model.counts()) keys.push_back(&key);
  std::sort(keys.begin(), keys.end(),
            [](const auto* a, const auto* b) { return *a < *b; });

  w.u64(keys.size());
  for (const auto* key : keys) {
    const ContextCounts& ctx = model.counts().at(*key);
    w.u32(static_cast<std::uint32_t>(key->size()));
    for (TokenId id : *key) w.u32(id);
    // The running total is stored, not recomputed: summation order differs
    // from accumulation order, and round trips must be prediction-exact.
    w.f64(ctx.total);
    std::vector<std::pair<TokenId, double>> entries(ctx.per_token.begin(),
                                                    ctx.per_token.end());
    std::sort(entries.begin(), entries.end());
    w.u32(static_cast<std::uint32_t>(entries.size()));
    for (const auto& [token, count] : entries) {
      w.u32(token);
      w.f64(count);
    }
  }

  Writer out = std::move(w);
  const std::uint64_t checksum = fnv1a64(out.bytes());
  out.u64(checksum);

  std::ofstream file(path, std::ios::binary);
  if (!file) fail_io("cannot write model file: " + path.string());
  file.write(reinterpret_cast<const char*>(out.bytes().data()),
             static_cast<std::streamsize>(out.bytes().size()));
  if (!file) fail_io("failed writing model file: " + path.string());
}

NGramModel load_model(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail_io("cannot open model file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)),
                                   std::istreambuf_iterator<char>());

  if (bytes.size() < 8 + 4) fail_io("model file truncated: too short");
  const std::size_t payload = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    stored |= static_cast<std::uint64_t>(bytes[payload + i]) << (8 * i);
  }
  const std::uint64_t computed =
      fnv1a64(std::span<const unsigned char>(bytes.data(), payload));
  if (stored != computed) {
    fail_io("model file corrupt: checksum mismatch in " + path.string());
  }
  bytes.resize(payload);

  Reader r(std::move(bytes));
  char magic[4];
  if (r.size() < 4) fail_io("model file truncated: too short");
  std::memcpy(magic, r.bytes().data(), 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    fail_io("not a model file: bad magic in " + path.string());
  }
  r.u32();  // skip magic (read as u32)
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    fail_io("unsupported model file version " + std::to_string(version) +
            " (expected " + std::to_string(kVersion) + ")");
  }
  const int order = static_cast<int>(r.u32());
  const double alpha = r.f64();

  const std::uint32_t n = r.u32();
  if (n < 2) fail_io("model file corrupt: vocabulary too small");
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) tokens.push_back(r.str());
  if (tokens[Vocabulary::kBos] != Vocabulary::kBosToken ||
      tokens[Vocabulary::kUnk] != Vocabulary::kUnkToken) {
    fail_io("model file corrupt: reserved tokens missing");
  }
  tokens.erase(tokens.begin(), tokens.begin() + 2);

  ModelMeta meta;
  meta.corpus_ids = r.str();
  meta.weight = r.f64();
  meta.seed = r.u64();

  NGramModel model(Vocabulary(std::move(tokens)), order, alpha,
                   std::move(meta));

  const std::uint64_t n_contexts = r.u64();
  for (std::uint64_t c = 0; c < n_contexts; ++c) {
    const std::uint32_t ctx_len = r.u32();
    std::vector<TokenId> key(ctx_len);
    for (std::uint32_t i = 0; i < ctx_len; ++i) key[i] = r.u32();
    ContextCounts ctx;
    ctx.total = r.f64();
    const std::uint32_t n_entries = r.u32();
    for (std::uint32_t e = 0; e < n_entries; ++e) {
      const TokenId token = r.u32();
      const double count = r.f64();
      if (token >= n) fail_io("model file corrupt: token id out of range");
      ctx.per_token[token] = count;
    }
    model.counts_[std::move(key)] = std::move(ctx);
  }
  if (r.position() != r.size()) {
    fail_io("model file corrupt: trailing bytes");
  }
  return model;
}

}  // namespace domba
