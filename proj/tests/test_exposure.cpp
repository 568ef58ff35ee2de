#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "domba/common.hpp"
#include "domba/exposure.hpp"
#include "domba/logdist.hpp"

using namespace domba;

namespace {

LogDistribution from_probs(std::initializer_list<double> probs) {
  oracle::Probs p;
  for (double v : probs) p.push_back(v);
  return oracle::to_log(p);
}

const LogDistribution kP1 = from_probs({0.7, 0.1, 0.1, 0.1});
const LogDistribution kP2 = from_probs({0.97, 0.01, 0.01, 0.01});

}  // namespace

TEST_CASE("geometric_mean_log is the arithmetic mean of logs") {
  const std::vector<double> logs = {std::log(4.0), std::log(1.0)};
  CHECK(geometric_mean_log(logs) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> same = {std::log(0.3), std::log(0.3),
                                    std::log(0.3)};
  CHECK(geometric_mean_log(same) ==
        doctest::Approx(std::log(0.3)).epsilon(1e-15));
  CHECK_THROWS_AS(geometric_mean_log({}), Error);
}

TEST_CASE("the worked-example TPR is 5.18") {
  // GM(0.7216, 10, 10, 10): the probability ratios p1/p2
  const std::vector<double> ratio_logs = {
      std::log(0.7 / 0.97), std::log(10.0), std::log(10.0), std::log(10.0)};
  const double tpr = std::exp(geometric_mean_log(ratio_logs));
  CHECK(tpr == doctest::Approx(5.18).epsilon(0.01 / 5.18));
}

TEST_CASE("relative probabilities of (0.7, 0.1, 0.1, 0.1)") {
  const RelativeDistribution rel = relative_probabilities(kP1);
  // tp = (0.7 * 0.001)^(1/4) by hand
  CHECK(std::exp(rel.log_tp) == doctest::Approx(0.16266).epsilon(1e-4));
  CHECK(std::exp(rel.log_rp[0]) == doctest::Approx(4.303).epsilon(1e-3));
}

TEST_CASE("relative probabilities of a uniform distribution are all 1") {
  const LogDistribution uniform = from_probs({0.25, 0.25, 0.25, 0.25});
  const RelativeDistribution rel = relative_probabilities(uniform);
  for (double log_rp : rel.log_rp) CHECK(std::abs(log_rp) <= 1e-12);
}

TEST_CASE("mean of log relative probabilities is 0 by construction") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(std::uint64_t{100});
    const auto dist = oracle::random_distribution(rng, n, 20.0);
    const RelativeDistribution rel = relative_probabilities(dist);
    CHECK(std::abs(mean_of(rel.log_rp)) <= 1e-9);
  }
}

TEST_CASE("worked-example exposures: M1 over M2 = (0.14, 1.93, 1.93, 1.93)") {
  const std::vector<double> exposure = token_exposure(kP1, kP2);
  const std::vector<double> expected = {0.14, 1.93, 1.93, 1.93};
  for (std::size_t t = 0; t < expected.size(); ++t) {
    CHECK(std::exp(exposure[t]) ==
          doctest::Approx(expected[t]).epsilon(0.011 / expected[t]));
  }
}

TEST_CASE("worked-example exposures: M2 over M1 = (7.19, 0.52, 0.52, 0.52)") {
  const std::vector<double> exposure = token_exposure(kP2, kP1);
  const std::vector<double> expected = {7.19, 0.52, 0.52, 0.52};
  for (std::size_t t = 0; t < expected.size(); ++t) {
    CHECK(std::exp(exposure[t]) ==
          doctest::Approx(expected[t]).epsilon(0.011 / expected[t]));
  }
}

TEST_CASE("token exposure matches the Definition-3 oracle") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(std::uint64_t{60});
    const auto d1 = oracle::random_distribution(rng, n, 15.0);
    const auto d2 = oracle::random_distribution(rng, n, 15.0);
    const auto exposure = token_exposure(d1, d2);
    const auto expected =
        oracle::exposure(oracle::from_log(d1), oracle::from_log(d2));
    for (std::size_t t = 0; t < n; ++t) {
      CHECK(exposure[t] == doctest::Approx(static_cast<double>(
                               std::log(expected[t])))
                               .epsilon(1e-10));
    }
  }
}

TEST_CASE("identical distributions expose nothing") {
  const std::vector<double> exposure = token_exposure(kP1, kP1);
  for (double e : exposure) CHECK(e == 0.0);
}

TEST_CASE("exposure is antisymmetric, exactly") {
  Rng rng(13);
  const auto d1 = oracle::random_distribution(rng, 50, 10.0);
  const auto d2 = oracle::random_distribution(rng, 50, 10.0);
  const auto forward = token_exposure(d1, d2);
  const auto backward = token_exposure(d2, d1);
  for (std::size_t t = 0; t < forward.size(); ++t) {
    CHECK(forward[t] == -backward[t]);
  }
}

TEST_CASE("exposure rejects mismatched vocabularies") {
  const LogDistribution small = from_probs({0.5, 0.5});
  CHECK_THROWS_AS(token_exposure(kP1, small), Error);
  CHECK_THROWS_AS(mean_absolute_exposure(kP1, small), Error);
}

TEST_CASE("MAE: identical distributions give 1, and MAE is symmetric") {
  CHECK(mean_absolute_exposure(kP1, kP1) == 0.0);
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d1 = oracle::random_distribution(rng, 30, 12.0);
    const auto d2 = oracle::random_distribution(rng, 30, 12.0);
    const double forward = mean_absolute_exposure(d1, d2);
    const double backward = mean_absolute_exposure(d2, d1);
    CHECK(forward == backward);
    CHECK(forward >= 0.0);
  }
}

TEST_CASE("MAE of the worked-example pair matches the 4-token brute force") {
  const double log_mae = mean_absolute_exposure(kP1, kP2);
  const long double expected =
      oracle::mae(oracle::from_log(kP1), oracle::from_log(kP2));
  CHECK(log_mae == doctest::Approx(static_cast<double>(std::log(expected)))
                       .epsilon(1e-12));
}

TEST_CASE("TPR factors into tp1 / tp2 on random pairs") {
  Rng rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(std::uint64_t{100});
    const auto d1 = oracle::random_distribution(rng, n, 20.0);
    const auto d2 = oracle::random_distribution(rng, n, 20.0);
    // Definition-2 route: mean of log ratios
    std::vector<double> ratio_logs(n);
    for (std::size_t t = 0; t < n; ++t) {
      ratio_logs[t] = d1.logp[t] - d2.logp[t];
    }
    const double def2 = geometric_mean_log(ratio_logs);
    const double factored =
        geometric_mean_log(d1.logp) - geometric_mean_log(d2.logp);
    CHECK(std::abs(def2 - factored) <= 1e-9);
  }
}

TEST_CASE("exposures multiply across model triples") {
  Rng rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d1 = oracle::random_distribution(rng, 50, 15.0);
    const auto d2 = oracle::random_distribution(rng, 50, 15.0);
    const auto d3 = oracle::random_distribution(rng, 50, 15.0);
    const MultiplicativityReport report =
        verify_exposure_multiplicativity(d1, d2, d3);
    CHECK(report.holds);
    CHECK(report.max_residual < 1e-9);
  }
}

TEST_CASE("multiplicativity edge cases: d1 = d2 and a closed cycle") {
  Rng rng(17);
  const auto d1 = oracle::random_distribution(rng, 40, 10.0);
  const auto d3 = oracle::random_distribution(rng, 40, 10.0);

  // d1 = d2: exposure(d1, d3) == exposure(d2, d3)
  const auto report = verify_exposure_multiplicativity(d1, d1, d3);
  CHECK(report.holds);

  // d3 = d1: the exposures around the cycle cancel
  const auto out = token_exposure(d1, d3);
  const auto back = token_exposure(d3, d1);
  for (std::size_t t = 0; t < out.size(); ++t) {
    CHECK(std::abs(out[t] + back[t]) == 0.0);
  }
}
