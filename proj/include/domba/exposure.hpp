#pragma once

#include <span>
#include <string>
#include <vector>

#include "domba/logdist.hpp"
#include "domba/mean.hpp"

namespace domba {

// Relative probabilities rp(t|c) = p(t|c) / tp_c, where tp_c is the geometric
// mean of p over the vocabulary. mean(log_rp) == 0 by construction.
struct RelativeDistribution {
  std::vector<double> log_rp;
  double log_tp = 0.0;
  std::string context_id;

  std::size_t size() const { return log_rp.size(); }
};

// Audit record for one context: exposures of an aggregate over both
// submodels and the bound quantities behind those exposures.
struct ExposureProfile {
  std::vector<double> log_exposure_over_m1;
  std::vector<double> log_exposure_over_m2;
  double log_tpr = 0.0;   // tp(M1)/tp(M2)
  double log_mae = 0.0;   // >= 0
  double log_fbar = 0.0;  // GM of reciprocal unnormalized aggregate values
  double lambda_f = 1.0;
  double max_log_exposure = 0.0;  // over both submodels, all tokens
  bool bound_holds = false;       // max exposure <= lambda_f * fbar
  bool lower_bound_witnessed = false;
  double identity_residual = 0.0;  // GM_t(rp/min) vs sqrt(MAE), log space
  std::string context_id;
};

struct MultiplicativityReport {
  double max_residual = 0.0;
  bool holds = false;
};

struct ChainedBoundReport {
  double max_violation = 0.0;  // log space; <= tolerance when the bound holds
  bool holds = false;
};

// log of the geometric mean = arithmetic mean of the log values.
// Throws on an empty vector.
double geometric_mean_log(std::span<const double> values_log);

RelativeDistribution relative_probabilities(const LogDistribution& dist);

// Log exposures of d1 over d2 per token: log_rp1[t] - log_rp2[t].
// Antisymmetric under argument swap. Throws on size mismatch.
std::vector<double> token_exposure(const LogDistribution& d1,
                                   const LogDistribution& d2);

// log of GM(max(rp1/rp2, rp2/rp1)): mean |log_rp1 - log_rp2|. Symmetric, >= 0.
double mean_absolute_exposure(const LogDistribution& d1,
                              const LogDistribution& d2);

// Checks log-exposure(d1,d3) == log-exposure(d1,d2) + log-exposure(d2,d3)
// per token; reports the max residual.
MultiplicativityReport verify_exposure_multiplicativity(
    const LogDistribution& d1, const LogDistribution& d2,
    const LogDistribution& d3, double tolerance = 1e-9);

// Audits any aggregate distribution against the submodel pair. The mean spec
// identifies the aggregation function; its lambda and the reconstructed
// unnormalized values f(rp1, rp2) give the exposure bound lambda * fbar.
// The lower-bound identity GM_t(rp_agg / min(rp1, rp2)) = sqrt(MAE) is checked
// for the given aggregate regardless of how it was produced.
ExposureProfile audit_aggregate(const LogDistribution& agg,
                                const LogDistribution& d1,
                                const LogDistribution& d2,
                                const MeanSpec& mean,
                                double tolerance = 1e-9);

// Checks, per token, exposure(agg, d_base) <= lambda * fbar +
// min(exposure(d1, d_base), exposure(d2, d_base)) in log space.
ChainedBoundReport corollary_bound_check(const LogDistribution& agg,
                                      const LogDistribution& d1,
                                      const LogDistribution& d2,
                                      const LogDistribution& d_base,
                                      const MeanSpec& mean,
                                      double tolerance = 1e-9);

}  // namespace domba
