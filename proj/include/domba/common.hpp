#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace domba {

// Log-space tolerance for the algebraic identities (GM/TPR/exposure bounds).
inline constexpr double kLogTol = 1e-9;
// Looser tolerance for quantities that pass through a normalization sum.
inline constexpr double kNormTol = 1e-6;

class Error : public std::runtime_error {
 public:
  enum class Kind { validation, runtime, io };

  Error(Kind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& message) {
  throw Error(Error::Kind::validation, message);
}

[[noreturn]] inline void fail_runtime(const std::string& message) {
  throw Error(Error::Kind::runtime, message);
}

[[noreturn]] inline void fail_io(const std::string& message) {
  throw Error(Error::Kind::io, message);
}

// Deterministic RNG wrapper. mt19937_64 output is fully specified by the
// standard and the derived doubles below avoid the implementation-defined
// std distributions, so streams are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, bound). Modulo bias is ~bound/2^64, irrelevant here.
  std::uint64_t uniform_int(std::uint64_t bound) {
    return bound == 0 ? 0 : engine_() % bound;
  }

  // Uniform in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[uniform_int(items.size())];
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_int(i)]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64(const std::string& text);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

}  // namespace domba
