#include "domba/exposure.hpp"

#include <algorithm>
#include <cmath>

#include "domba/common.hpp"

namespace domba {

namespace {

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    fail_validation("distribution size mismatch: " + std::to_string(a) +
                    " vs " + std::to_string(b));
  }
}

}  // namespace

double geometric_mean_log(std::span<const double> values_log) {
  if (values_log.empty()) {
    fail_validation("geometric mean of an empty vector");
  }
  return mean_of(values_log);
}

RelativeDistribution relative_probabilities(const LogDistribution& dist) {
  RelativeDistribution rel;
  rel.context_id = dist.context_id;
  rel.log_tp = geometric_mean_log(dist.logp);
  rel.log_rp.resize(dist.logp.size());
  for (std::size_t t = 0; t < dist.logp.size(); ++t) {
    rel.log_rp[t] = dist.logp[t] - rel.log_tp;
  }
  return rel;
}

std::vector<double> token_exposure(const LogDistribution& d1,
                                   const LogDistribution& d2) {
  require_same_size(d1.size(), d2.size());
  const double tp1 = geometric_mean_log(d1.logp);
  const double tp2 = geometric_mean_log(d2.logp);
  std::vector<double> exposure(d1.size());
  for (std::size_t t = 0; t < exposure.size(); ++t) {
    exposure[t] = (d1.logp[t] - tp1) - (d2.logp[t] - tp2);
  }
  return exposure;
}

double mean_absolute_exposure(const LogDistribution& d1,
                              const LogDistribution& d2) {
  require_same_size(d1.size(), d2.size());
  const double tp1 = geometric_mean_log(d1.logp);
  const double tp2 = geometric_mean_log(d2.logp);
  double sum = 0.0;
  for (std::size_t t = 0; t < d1.size(); ++t) {
    sum += std::abs((d1.logp[t] - tp1) - (d2.logp[t] - tp2));
  }
  return sum / static_cast<double>(d1.size());
}

MultiplicativityReport verify_exposure_multiplicativity(
    const LogDistribution& d1, const LogDistribution& d2,
    const LogDistribution& d3, double tolerance) {
  const std::vector<double> e12 = token_exposure(d1, d2);
  const std::vector<double> e23 = token_exposure(d2, d3);
  const std::vector<double> e13 = token_exposure(d1, d3);
  MultiplicativityReport report;
  for (std::size_t t = 0; t < e12.size(); ++t) {
    report.max_residual = std::max(report.max_residual,
                                   std::abs(e13[t] - (e12[t] + e23[t])));
  }
  report.holds = report.max_residual <= tolerance;
  return report;
}

ExposureProfile audit_aggregate(const LogDistribution& agg,
                                const LogDistribution& d1,
                                const LogDistribution& d2,
                                const MeanSpec& mean, double tolerance) {
  require_same_size(agg.size(), d1.size());
  require_same_size(d1.size(), d2.size());
  const std::size_t n = agg.size();

  const double tp1 = geometric_mean_log(d1.logp);
  const double tp2 = geometric_mean_log(d2.logp);
  const double tp_agg = geometric_mean_log(agg.logp);

  ExposureProfile profile;
  profile.context_id = agg.context_id;
  profile.log_tpr = tp1 - tp2;
  profile.lambda_f = mean.min_bounded() ? mean.lambda() : 0.0;

  profile.log_exposure_over_m1.resize(n);
  profile.log_exposure_over_m2.resize(n);

  // One pass computes everything derived from the relative probabilities:
  // exposures of agg over both submodels, MAE, the reconstructed aggregate
  // values f(rp1, rp2) behind fbar, and the lower-bound identity term.
  double sum_abs = 0.0;        // n * log MAE
  double sum_f = 0.0;          // -n * log fbar
  double sum_over_min = 0.0;   // n * log GM(rp_agg / min(rp1, rp2))
  double max_exposure = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double rp1 = d1.logp[t] - tp1;
    const double rp2 = d2.logp[t] - tp2;
    const double rp_agg = agg.logp[t] - tp_agg;
    profile.log_exposure_over_m1[t] = rp_agg - rp1;
    profile.log_exposure_over_m2[t] = rp_agg - rp2;
    max_exposure = std::max(max_exposure, profile.log_exposure_over_m1[t]);
    max_exposure = std::max(max_exposure, profile.log_exposure_over_m2[t]);
    sum_abs += std::abs(rp1 - rp2);
    if (mean.min_bounded()) {
      sum_f += mean.apply_log(rp1, rp2);
    }
    sum_over_min += rp_agg - std::min(rp1, rp2);
  }
  const double dn = static_cast<double>(n);
  profile.log_mae = sum_abs / dn;
  profile.log_fbar = mean.min_bounded() ? -sum_f / dn : 0.0;
  profile.max_log_exposure = max_exposure;

  profile.bound_holds =
      mean.min_bounded() &&
      max_exposure <= mean.log_lambda() + profile.log_fbar + tolerance;

  // For any model at all, GM_t(rp_agg / min(rp1, rp2)) equals sqrt(MAE),
  // so some token is always >= sqrt(MAE)-exposed over one submodel.
  profile.identity_residual =
      std::abs(sum_over_min / dn - 0.5 * profile.log_mae);
  profile.lower_bound_witnessed = profile.identity_residual <= tolerance;

  return profile;
}

ChainedBoundReport corollary_bound_check(const LogDistribution& agg,
                                      const LogDistribution& d1,
                                      const LogDistribution& d2,
                                      const LogDistribution& d_base,
                                      const MeanSpec& mean, double tolerance) {
  require_same_size(agg.size(), d_base.size());
  require_same_size(agg.size(), d1.size());
  require_same_size(agg.size(), d2.size());
  const std::size_t n = agg.size();

  const double tp1 = geometric_mean_log(d1.logp);
  const double tp2 = geometric_mean_log(d2.logp);
  const double tp_agg = geometric_mean_log(agg.logp);
  const double tp_base = geometric_mean_log(d_base.logp);

  double sum_f = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    sum_f += mean.apply_log(d1.logp[t] - tp1, d2.logp[t] - tp2);
  }
  const double log_fbar = -sum_f / static_cast<double>(n);
  const double log_gamma = mean.log_lambda() + log_fbar;

  ChainedBoundReport report;
  report.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double exposure_agg = (agg.logp[t] - tp_agg) - (d_base.logp[t] - tp_base);
    const double exposure_1 = (d1.logp[t] - tp1) - (d_base.logp[t] - tp_base);
    const double exposure_2 = (d2.logp[t] - tp2) - (d_base.logp[t] - tp_base);
    const double bound = log_gamma + std::min(exposure_1, exposure_2);
    report.max_violation =
        std::max(report.max_violation, exposure_agg - bound);
  }
  report.holds = report.max_violation <= tolerance;
  return report;
}

}  // namespace domba
