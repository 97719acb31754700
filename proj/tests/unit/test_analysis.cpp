#include <gtest/gtest.h>

#include <cmath>

#include "crowdsim/analysis.hpp"
#include "crowdsim/rng.hpp"

using namespace crowdsim;

namespace {

std::vector<ProblemOutcome> outcomes(std::initializer_list<double> values) {
  std::vector<ProblemOutcome> v;
  int k = 0;
  for (double x : values) v.push_back({"p" + std::to_string(k++), x, {}});
  return v;
}

double cov(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double c = 0;
  for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma) * (b[i] - mb);
  return c / static_cast<double>(a.size());
}

}  // namespace

TEST(Metrics, IdentityIsPerfect) {
  auto p = outcomes({1, 2, 3});
  p[0].distribution = {1, 1, 2};
  const auto m = metrics(p, p);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.avg_wd, 0.0);
  EXPECT_DOUBLE_EQ(m.cosine, 1.0);
  EXPECT_EQ(m.problems, 3u);
}

TEST(Metrics, HandResiduals) {
  auto m = metrics(outcomes({2, 0}), outcomes({1, 1}));
  EXPECT_DOUBLE_EQ(m.mae, 1.0);
  EXPECT_DOUBLE_EQ(m.rmse, 1.0);
  m = metrics(outcomes({1, 3}), outcomes({1, 1}));
  EXPECT_DOUBLE_EQ(m.mae, 1.0);
  EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(2.0));
  EXPECT_GE(m.rmse, m.mae);
}

TEST(Metrics, WassersteinUsesDistributions) {
  auto p = outcomes({2});
  auto r = outcomes({2});
  p[0].distribution = {1, 3};
  r[0].distribution = {2, 2};
  EXPECT_DOUBLE_EQ(metrics(p, r).avg_wd, 1.0);
  r[0].distribution = {3, 1};
  EXPECT_DOUBLE_EQ(metrics(p, r).avg_wd, 0.0);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(metrics(outcomes({}), outcomes({1})), std::invalid_argument);
  std::vector<ProblemOutcome> other{{"zz", 1, {}}};
  EXPECT_THROW(metrics(other, outcomes({1})), std::invalid_argument);
}

TEST(Cosine, ZeroVectors) {
  const std::vector<double> z{0, 0}, a{1, 0};
  EXPECT_EQ(cosine_similarity(z, z), 1.0);
  EXPECT_EQ(cosine_similarity(z, a), 0.0);
}

TEST(Risk, PerfectTwinHasNoDiscrepancy) {
  TwinPopulation p;
  p.human = {1, 4, 2};
  p.digital = p.human;
  p.human_noise = p.digital_noise = {0.1, 0.2, 0.3};
  const auto r = risk_decomposition(p);
  EXPECT_EQ(r.l3, 0.0);
  EXPECT_NEAR(r.l2, 0.2, 1e-12);
  EXPECT_NEAR(r.l4, 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(r.l1, r.l5);
  EXPECT_EQ(r.risk, 0.0);
}

TEST(Risk, AmbiguityTerm) {
  TwinPopulation p;
  p.human = {1, 3};
  p.digital = {1, 3};
  EXPECT_DOUBLE_EQ(risk_decomposition(p).l5, 1.0);
}

TEST(Risk, GapIsTwiceTheDroppedCovariance) {
  // with zero noise: total - (ybar - digital mean)^2 = 2 cov(y, y - y~)
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(19);
    TwinPopulation p;
    std::vector<double> diff;
    for (std::size_t i = 0; i < n; ++i) {
      p.human.push_back(rng.normal(3, 1));
      p.digital.push_back(rng.normal(3, 1));
      diff.push_back(p.human.back() - p.digital.back());
    }
    const auto r = risk_decomposition(p);
    EXPECT_NEAR(r.gap, 2.0 * cov(p.human, diff), 1e-9);
    EXPECT_NEAR(r.total - r.risk, r.gap, 1e-12);
  }
}

TEST(Risk, Errors) {
  TwinPopulation p;
  EXPECT_THROW(risk_decomposition(p), std::invalid_argument);
  p.human = {1, 2};
  p.digital = {1};
  EXPECT_THROW(risk_decomposition(p), std::invalid_argument);
  p.digital = {1, 2};
  p.human_noise = {1};
  EXPECT_THROW(risk_decomposition(p), std::invalid_argument);
}

TEST(PureLlm, Cases) {
  const std::vector<double> y{3, 3}, none;
  EXPECT_EQ(pure_llm_risk(y, none, none, 3.0, 0.0).deviation, 0.0);
  const std::vector<double> h{2, 4};
  const auto r = pure_llm_risk(h, none, none, 3.0, 0.0);
  EXPECT_DOUBLE_EQ(r.deviation, 1.0);
  EXPECT_DOUBLE_EQ(r.l1, 1.0);
  const auto r2 = pure_llm_risk(h, none, none, 3.0, 0.5);
  EXPECT_DOUBLE_EQ(r2.total - r.total, 0.5);
  EXPECT_THROW(pure_llm_risk(none, none, none, 3.0, 0.0), std::invalid_argument);
}

TEST(ToleranceInterval, DegenerateCase) {
  const auto t = tolerance_interval(3, 1.0, 0.0, 0.0, 0.7);
  EXPECT_EQ(t.branch, IntervalBranch::h2);
  EXPECT_EQ(t.delta0, 0.0);
  EXPECT_EQ(t.half_width, 0.0);
  EXPECT_EQ(t.lo, 0.7);
  EXPECT_EQ(t.hi, 0.7);
}

TEST(ToleranceInterval, LargePopulation) {
  const auto t = tolerance_interval(10, 0.1, 10.0, 0.0, 0.0);
  EXPECT_EQ(t.branch, IntervalBranch::h1);
  EXPECT_NEAR(t.delta0, 0.8 * std::sqrt(40.0), 1e-12);
  EXPECT_NEAR(t.half_width, (std::sqrt(1.0 + 1440.0) - 0.8) / 18.0, 1e-12);
  EXPECT_NEAR(t.half_width, 2.064, 1e-3);
}

TEST(ToleranceInterval, TwoMembers) {
  for (double eps2 : {0.0, 3.0, 100.0}) {
    EXPECT_DOUBLE_EQ(tolerance_h2(2, eps2, 1.0), 1.0);
    const auto t = tolerance_interval(2, 0.5, eps2, 1.0, 0.0);
    EXPECT_EQ(t.branch, IntervalBranch::h2);
    EXPECT_DOUBLE_EQ(t.half_width, 1.0);
  }
}

TEST(ToleranceInterval, ContinuousAtBranchBoundary) {
  for (int n : {3, 5, 10, 50}) {
    for (double eps2 : {0.5, 2.0}) {
      const double kappa = tolerance_delta0(n, eps2, 0.3);
      EXPECT_NEAR(tolerance_h1(n, kappa, eps2, 0.3), tolerance_h2(n, eps2, 0.3), 1e-9) << n;
      EXPECT_EQ(tolerance_interval(n, kappa, eps2, 0.3, 0).branch, IntervalBranch::h1);
      EXPECT_EQ(tolerance_interval(n, kappa * (1 + 1e-9), eps2, 0.3, 0).branch, IntervalBranch::h2);
    }
  }
}

TEST(ToleranceInterval, Errors) {
  EXPECT_THROW(tolerance_interval(1, 0.1, 1.0, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(tolerance_interval(5, -0.1, 1.0, 0.0, 0.0), std::invalid_argument);
}

TEST(ToleranceInterval, GapBoundSignProperty) {
  // the bias mean inside the interval guarantees a non-positive gap bound; twice the half-width mostly breaks it
  Rng rng(2026);
  int inside_ok = 0, outside_bad = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const int n = 2 + static_cast<int>(rng.below(49));
    const double kappa = rng.uniform(0.05, 3.0);
    const double delta = rng.uniform(-kappa, kappa);
    const double eta = rng.uniform(0.0, 1.0);
    const double eps2 = rng.uniform(0.0, 4.0);
    const auto iv = tolerance_interval(n, kappa, eps2, eta, delta);
    const double mu = rng.uniform(iv.lo, iv.hi);
    inside_ok += crowd_gap_bound(n, mu, delta, eps2, eta) <= 1e-12;
    const double far = delta + (rng.bernoulli(0.5) ? 2.0 : -2.0) * iv.half_width;
    outside_bad += crowd_gap_bound(n, far, delta, eps2, eta) > 0.0;
  }
  EXPECT_GE(inside_ok, static_cast<int>(0.95 * trials));
  EXPECT_GT(outside_bad, trials / 2);
}

TEST(Kappa, QuantileEstimator) {
  const std::vector<double> d{0.5, 0.1, 0.3, 0.2, 0.4};
  EXPECT_DOUBLE_EQ(estimate_kappa(d, 0.5), 0.3);
  EXPECT_DOUBLE_EQ(estimate_kappa(d, 0.25), 0.4);
  EXPECT_NEAR(estimate_kappa(d, 0.1), 0.46, 1e-12);
  EXPECT_THROW(estimate_kappa(std::vector<double>{}, 0.1), std::invalid_argument);
}

TEST(ConfidenceInterval, Quantile) {
  EXPECT_NEAR(normal_quantile_two_sided(0.05), 1.959964, 1e-6);
  EXPECT_THROW(normal_quantile_two_sided(1.0), std::invalid_argument);
}

TEST(ConfidenceInterval, HandHalfWidth) {
  const double z = normal_quantile_two_sided(0.05);
  const double h = crowd_ci_half_width(0.1, 0.05, 0.25, 100, 1.0, 0.5, 50);
  EXPECT_NEAR(h, 0.1 + z * std::sqrt(0.0025 + 0.01 + 0.01), 1e-12);
  EXPECT_NEAR(h, 0.394, 1e-3);
}

TEST(ConfidenceInterval, PointInterval) {
  const std::vector<double> y{2, 4, 3}, delta{0.5, 0.5, 0.5}, r{1, 1};
  const auto c = crowd_confidence_interval(y, delta, r, 0.0, 0.05, 0.0);
  EXPECT_EQ(c.center, 3.0);
  EXPECT_EQ(c.half_width, 0.0);
  EXPECT_TRUE(c.contains(3.0));
  EXPECT_FALSE(c.contains(3.0001));
}

TEST(ConfidenceInterval, BiasedVariances) {
  const std::vector<double> y{1, 2}, delta{0, 2}, r{1, 3, 5};
  const auto c = crowd_confidence_interval(y, delta, r, 0.0, 0.05, 0.0);
  EXPECT_DOUBLE_EQ(c.sigma_delta2, 1.0);
  EXPECT_DOUBLE_EQ(c.sigma_r2, 8.0 / 3.0);
  EXPECT_THROW(crowd_confidence_interval(std::vector<double>{1}, std::vector<double>{1}, r, 0, 0.05, 0), std::invalid_argument);
  EXPECT_THROW(crowd_confidence_interval(y, std::vector<double>{1}, r, 0, 0.05, 0), std::invalid_argument);
  EXPECT_THROW(crowd_confidence_interval(y, delta, r, 0, 1.5, 0), std::invalid_argument);
}

TEST(Resolution, Cases) {
  EXPECT_EQ(resolution_rate(std::vector<double>{0, 0}), 1.0);
  EXPECT_EQ(resolution_rate(std::vector<double>{0.4, 0.6}), 0.5);
  EXPECT_EQ(resolution_rate(std::vector<double>{0.5}), 0.0);
  EXPECT_EQ(resolution_rate(std::vector<double>{0.1, 0.2}, 0.0), 0.0);
  EXPECT_EQ(resolution_rate(std::vector<double>{0.0, 0.2}, 0.0), 0.0);
  EXPECT_THROW(resolution_rate(std::vector<double>{}), std::invalid_argument);
}

TEST(Spearman, Cases) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{4, 3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{5, 5, 5, 5}), 0.0);
  // ties get average ranks: ranks(y) = {1.5, 1.5, 3, 4}
  EXPECT_NEAR(spearman(x, std::vector<double>{1, 1, 2, 3}), 4.5 / std::sqrt(5.0 * 4.5), 1e-12);
}
