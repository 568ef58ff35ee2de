#include "domba/mean.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>

#include "domba/common.hpp"
#include "domba/logdist.hpp"

namespace domba {

namespace {
constexpr double kLog2 = 0.6931471805599453;
}

MeanSpec MeanSpec::minimum() { return MeanSpec(Kind::minimum, 0.0); }
MeanSpec MeanSpec::harmonic() { return MeanSpec(Kind::harmonic, -1.0); }

MeanSpec MeanSpec::generalized(double alpha) {
  if (!(alpha < 0.0)) {
    fail_validation("generalized mean requires alpha < 0, got " +
                    std::to_string(alpha));
  }
  return MeanSpec(Kind::generalized, alpha);
}

MeanSpec MeanSpec::arithmetic_baseline() {
  return MeanSpec(Kind::arithmetic_baseline, 0.0);
}

MeanSpec MeanSpec::parse(std::string_view text) {
  if (text == "min") return minimum();
  if (text == "harmonic") return harmonic();
  if (text == "arith") return arithmetic_baseline();
  if (text.starts_with("gm:")) {
    const std::string_view number = text.substr(3);
    double alpha = 0.0;
    const auto result =
        std::from_chars(number.data(), number.data() + number.size(), alpha);
    if (result.ec != std::errc{} ||
        result.ptr != number.data() + number.size()) {
      fail_validation("cannot parse mean alpha in '" + std::string(text) + "'");
    }
    return generalized(alpha);
  }
  fail_validation("unknown mean '" + std::string(text) +
                  "' (expected min | harmonic | gm:<alpha> | arith)");
}

double MeanSpec::lambda() const {
  switch (kind_) {
    case Kind::minimum:
      return 1.0;
    case Kind::harmonic:
      return 2.0;
    case Kind::generalized:
      return std::exp2(-1.0 / alpha_);
    case Kind::arithmetic_baseline:
      fail_validation("the arithmetic mean is not min-bounded: no lambda");
  }
  fail_runtime("unreachable");
}

double MeanSpec::log_lambda() const {
  switch (kind_) {
    case Kind::minimum:
      return 0.0;
    case Kind::harmonic:
      return kLog2;
    case Kind::generalized:
      return -kLog2 / alpha_;
    case Kind::arithmetic_baseline:
      fail_validation("the arithmetic mean is not min-bounded: no lambda");
  }
  fail_runtime("unreachable");
}

double MeanSpec::apply_log(double x_log, double y_log) const {
  switch (kind_) {
    case Kind::minimum:
      return std::min(x_log, y_log);
    case Kind::harmonic:
      // log(2xy / (x + y))
      return kLog2 + x_log + y_log - log_add_exp(x_log, y_log);
    case Kind::generalized:
      // ((x^a + y^a) / 2)^(1/a), centered on the max scaled input
      return (log_add_exp(alpha_ * x_log, alpha_ * y_log) - kLog2) / alpha_;
    case Kind::arithmetic_baseline:
      return log_add_exp(x_log, y_log) - kLog2;
  }
  fail_runtime("unreachable");
}

std::string MeanSpec::to_string() const {
  switch (kind_) {
    case Kind::minimum:
      return "min";
    case Kind::harmonic:
      return "harmonic";
    case Kind::generalized:
      return "gm:" + std::to_string(alpha_);
    case Kind::arithmetic_baseline:
      return "arith";
  }
  fail_runtime("unreachable");
}

}  // namespace domba
