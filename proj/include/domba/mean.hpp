#pragma once

#include <string>
#include <string_view>

namespace domba {

// Two-argument average applied to relative probabilities, evaluated in log
// space. Min-bounded kinds satisfy f(x,y) <= lambda * min(x,y):
//   minimum            lambda = 1
//   harmonic           lambda = 2
//   generalized(a<0)   lambda = 2^(-1/a)
// The arithmetic mean is the deliberately non-min-bounded baseline.
class MeanSpec {
 public:
  enum class Kind { minimum, harmonic, generalized, arithmetic_baseline };

  static MeanSpec minimum();
  static MeanSpec harmonic();
  static MeanSpec generalized(double alpha);  // requires alpha < 0
  static MeanSpec arithmetic_baseline();

  // "min" | "harmonic" | "gm:<alpha>" | "arith"
  static MeanSpec parse(std::string_view text);

  Kind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  bool min_bounded() const { return kind_ != Kind::arithmetic_baseline; }

  // Undefined for the arithmetic baseline (throws).
  double lambda() const;
  double log_lambda() const;

  // log f(e^x, e^y), computed without leaving log space.
  double apply_log(double x_log, double y_log) const;

  std::string to_string() const;

  bool operator==(const MeanSpec& other) const {
    return kind_ == other.kind_ && alpha_ == other.alpha_;
  }

 private:
  MeanSpec(Kind kind, double alpha) : kind_(kind), alpha_(alpha) {}

  Kind kind_;
  double alpha_;
};

}  // namespace domba
