#include "domba/logdist.hpp"

#include <algorithm>
#include <cmath>

#include "domba/common.hpp"

namespace domba {

double log_sum_exp(std::span<const double> values) {
  double maximum = -std::numeric_limits<double>::infinity();
  for (double v : values) maximum = std::max(maximum, v);
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - maximum);
  return maximum + std::log(sum);
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double mean_of(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

void validate(const LogDistribution& dist) {
  if (dist.logp.empty()) fail_validation("empty log distribution");
  for (double v : dist.logp) {
    if (!std::isfinite(v)) {
      fail_validation("log distribution has a non-finite entry");
    }
  }
  const double lse = log_sum_exp(dist.logp);
  if (std::abs(lse) > kLogTol) {
    fail_validation("log distribution is not normalized: logsumexp = " +
                    std::to_string(lse));
  }
}

}  // namespace domba
