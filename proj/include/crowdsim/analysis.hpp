#pragma once

#include <span>
#include <string>
#include <vector>

namespace crowdsim {

/// Aggregated decision plus the raw decision distribution for one problem.
struct ProblemOutcome {
  std::string id;
  double value = 0.0;
  std::vector<double> distribution;  ///< empty: the value alone is used
};

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  double cosine = 0.0;
  double avg_wd = 0.0;
  std::size_t problems = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// MAE and RMSE of aggregated values, cosine similarity of the stacked value
/// vectors, and the mean per-problem empirical W1 between distributions.
/// Every predicted id must appear in `reference`. Throws std::invalid_argument on
/// an unknown id or an empty overlap.
MetricReport metrics(std::span<const ProblemOutcome> predicted, std::span<const ProblemOutcome> reference);

/// Cosine similarity; two zero vectors count as identical (1), one zero vector as 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// One problem's physical and digital populations, paired by index.
struct TwinPopulation {
  std::vector<double> human;            ///< y_i
  std::vector<double> human_mean;       ///< expected response per human; empty means y_i
  std::vector<double> human_noise;      ///< eta_i^2; empty means 0
  std::vector<double> digital;          ///< noisy digital decisions
  std::vector<double> digital_mean;     ///< expected digital decision per twin; empty means the noisy one
  std::vector<double> digital_noise;    ///< digital noise variances; empty means 0
};

/// Plug-in estimates of the five risk components under squared loss.
/// `total` = L1 + L2 + L3 + L4 - L5; `risk` is the directly evaluated
/// (ybar - digital mean)^2 and `gap` = total - risk.
struct RiskDecomposition {
  double l1 = 0.0;  ///< average human bias, mean (ybar - y_i)^2
  double l2 = 0.0;  ///< human individual noise, mean eta_i^2
  double l3 = 0.0;  ///< twin discrepancy, mean (human mean - digital mean)^2
  double l4 = 0.0;  ///< allowed individual uncertainty, mean digital noise variance
  double l5 = 0.0;  ///< digital population diversity, mean (digital average - digital_i)^2
  double total = 0.0;
  double risk = 0.0;
  double gap = 0.0;
};

/// Throws std::invalid_argument when populations are empty or unpaired.
RiskDecomposition risk_decomposition(const TwinPopulation& pop);

/// Component-wise mean over problems.
RiskDecomposition average(std::span<const RiskDecomposition> parts);

struct PureLlmRisk {
  double l1 = 0.0;
  double l2 = 0.0;
  double deviation = 0.0;  ///< mean (human mean_i - y_ref)^2
  double eta = 0.0;        ///< LLM output variance at the sampling temperature
  double total = 0.0;      ///< l1 + l2 + deviation + eta
};

/// Throws std::invalid_argument on empty input.
PureLlmRisk pure_llm_risk(std::span<const double> human, std::span<const double> human_mean,
                          std::span<const double> human_noise, double y_ref, double eta);

enum class IntervalBranch { h1, h2 };

struct ToleranceInterval {
  double delta = 0.0;
  double half_width = 0.0;
  double delta0 = 0.0;  ///< branch threshold compared against kappa
  IntervalBranch branch = IntervalBranch::h2;
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double mu) const { return mu >= lo && mu <= hi; }
};

/// Tolerance interval [delta - h, delta + h] for the mean belief bias, with
/// h = h1 when delta0 >= kappa and h2 otherwise.
/// Throws std::invalid_argument when N < 2 or an input is negative.
ToleranceInterval tolerance_interval(int n, double kappa, double eps2, double eta, double delta);

/// The two candidate half-widths, exposed for continuity checks.
double tolerance_h1(int n, double kappa, double eps2, double eta);
double tolerance_h2(int n, double eps2, double eta);
double tolerance_delta0(int n, double eps2, double eta);

/// Upper bound on L - L' under the interval's model, with decisions y_ref + delta_i + noise:
/// 2(1 - 1/N) mu^2 - 2 mu Delta - (1 - 2/N) eps2 - eta. Non-positive means the digital crowd is no worse than the pure LLM.
double crowd_gap_bound(int n, double mu, double delta, double eps2, double eta);

/// (1 - alpha) empirical quantile (linear interpolation) of |y_ref - ybar| over problems.
double estimate_kappa(std::span<const double> abs_deviation, double alpha);

struct ConfidenceInterval {
  double center = 0.0;
  double half_width = 0.0;
  double z = 0.0;
  double sigma_delta2 = 0.0;
  double sigma_r2 = 0.0;
  std::size_t n_digital = 0;
  std::size_t n_human = 0;
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double y) const { return y >= lo && y <= hi; }
};

/// z_{1 - alpha/2} of the standard normal.
double normal_quantile_two_sided(double alpha);

/// eps0 + z sqrt(eta/N + sigma_delta2/N + sigma_r2/n).
double crowd_ci_half_width(double eps0, double alpha, double eta, std::size_t n_digital, double sigma_delta2,
                           double sigma_r2, std::size_t n_human);

/// Interval centred on mean(digital). sigma_delta2 and sigma_r2 are the 1/N and
/// 1/n sample variances of `beliefs` and `residuals`.
/// Throws std::invalid_argument when N < 2, n < 2, sizes differ or alpha is outside (0,1).
ConfidenceInterval crowd_confidence_interval(std::span<const double> digital, std::span<const double> beliefs,
                               std::span<const double> residuals, double eta, double alpha, double eps0);

/// Fraction of errors strictly below `threshold`. Throws std::invalid_argument when empty.
double resolution_rate(std::span<const double> abs_errors, double threshold = 0.5);

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace crowdsim
