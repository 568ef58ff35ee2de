#pragma once

#include <span>
#include <string>
#include <vector>

namespace domba {

// Natural-log probabilities over the whole vocabulary for one context.
// Invariants: every entry finite, logsumexp(logp) == 0 within 1e-9.
struct LogDistribution {
  std::vector<double> logp;
  std::string context_id;

  std::size_t size() const { return logp.size(); }
};

// max-shifted log(sum(exp(x))); -inf for an empty span never occurs here
// (callers guarantee non-empty vectors).
double log_sum_exp(std::span<const double> values);

// log(e^a + e^b), stable for widely separated inputs.
double log_add_exp(double a, double b);

double mean_of(std::span<const double> values);

// Throws domba::Error when an entry is non-finite or normalization is off.
void validate(const LogDistribution& dist);

}  // namespace domba
