#include "crowdsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "crowdsim/population.hpp"

namespace crowdsim {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double biased_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

// `v` when present, otherwise `fallback`; sizes must match N.
std::span<const double> or_else(const std::vector<double>& v, const std::vector<double>& fallback, const char* what) {
  if (v.empty()) return fallback;
  if (v.size() != fallback.size()) throw std::invalid_argument(std::string(what) + " has the wrong length");
  return v;
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine of vectors with different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 && bb == 0.0) return 1.0;
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

MetricReport metrics(std::span<const ProblemOutcome> predicted, std::span<const ProblemOutcome> reference) {
  std::map<std::string, const ProblemOutcome*> ref;
  for (const auto& r : reference) ref[r.id] = &r;
  if (predicted.empty()) throw std::invalid_argument("no problems to evaluate");
  std::vector<double> p, q;
  double abs_sum = 0.0, sq_sum = 0.0, wd_sum = 0.0;
  for (const auto& pr : predicted) {
    auto it = ref.find(pr.id);
    if (it == ref.end()) throw std::invalid_argument("problem '" + pr.id + "' has no reference");
    const auto& rf = *it->second;
    const double e = pr.value - rf.value;
    abs_sum += std::abs(e);
    sq_sum += e * e;
    p.push_back(pr.value);
    q.push_back(rf.value);
    const std::vector<double> a = pr.distribution.empty() ? std::vector<double>{pr.value} : pr.distribution;
    const std::vector<double> b = rf.distribution.empty() ? std::vector<double>{rf.value} : rf.distribution;
    wd_sum += empirical_w1(a, b);
  }
  const double n = static_cast<double>(predicted.size());
  return {abs_sum / n, std::sqrt(sq_sum / n), cosine_similarity(p, q), wd_sum / n, predicted.size()};
}

RiskDecomposition risk_decomposition(const TwinPopulation& pop) {
  const std::size_t n = pop.human.size();
  if (n == 0) throw std::invalid_argument("empty population");
  if (pop.digital.size() != n) throw std::invalid_argument("human and digital populations are unpaired");
  const auto hm = or_else(pop.human_mean, pop.human, "human_mean");
  const auto dm = or_else(pop.digital_mean, pop.digital, "digital_mean");
  const std::vector<double> zeros(n, 0.0);
  const auto hn = or_else(pop.human_noise, zeros, "human_noise");
  const auto dn = or_else(pop.digital_noise, zeros, "digital_noise");

  const double ybar = mean_of(pop.human);
  const double dbar = mean_of(pop.digital);
  RiskDecomposition r;
  for (std::size_t i = 0; i < n; ++i) {
    r.l1 += (ybar - pop.human[i]) * (ybar - pop.human[i]);
    r.l2 += hn[i];
    r.l3 += (hm[i] - dm[i]) * (hm[i] - dm[i]);
    r.l4 += dn[i];
    r.l5 += (dbar - pop.digital[i]) * (dbar - pop.digital[i]);
  }
  const double N = static_cast<double>(n);
  r.l1 /= N;
  r.l2 /= N;
  r.l3 /= N;
  r.l4 /= N;
  r.l5 /= N;
  r.total = r.l1 + r.l2 + r.l3 + r.l4 - r.l5;
  r.risk = (ybar - dbar) * (ybar - dbar);
  r.gap = r.total - r.risk;
  return r;
}

RiskDecomposition average(std::span<const RiskDecomposition> parts) {
  RiskDecomposition r;
  if (parts.empty()) return r;
  for (const auto& p : parts) {
    r.l1 += p.l1;
    r.l2 += p.l2;
    r.l3 += p.l3;
    r.l4 += p.l4;
    r.l5 += p.l5;
    r.total += p.total;
    r.risk += p.risk;
    r.gap += p.gap;
  }
  const double n = static_cast<double>(parts.size());
  for (double* x : {&r.l1, &r.l2, &r.l3, &r.l4, &r.l5, &r.total, &r.risk, &r.gap}) *x /= n;
  return r;
}

PureLlmRisk pure_llm_risk(std::span<const double> human, std::span<const double> human_mean,
                          std::span<const double> human_noise, double y_ref, double eta) {
  const std::size_t n = human.size();
  if (n == 0) throw std::invalid_argument("empty population");
  if (!human_mean.empty() && human_mean.size() != n) throw std::invalid_argument("human_mean has the wrong length");
  if (!human_noise.empty() && human_noise.size() != n) throw std::invalid_argument("human_noise has the wrong length");
  if (eta < 0.0) throw std::invalid_argument("eta must be >= 0");
  const auto hm = human_mean.empty() ? human : human_mean;
  const double ybar = mean_of(human);
  PureLlmRisk r;
  for (std::size_t i = 0; i < n; ++i) {
    r.l1 += (ybar - human[i]) * (ybar - human[i]);
    r.l2 += human_noise.empty() ? 0.0 : human_noise[i];
    r.deviation += (hm[i] - y_ref) * (hm[i] - y_ref);
  }
  const double N = static_cast<double>(n);
  r.l1 /= N;
  r.l2 /= N;
  r.deviation /= N;
  r.eta = eta;
  r.total = r.l1 + r.l2 + r.deviation + r.eta;
  return r;
}

namespace {

void check_tolerance_args(int n, double kappa, double eps2, double eta) {
  if (n < 2) throw std::invalid_argument("population size must be >= 2");
  if (kappa < 0.0 || eps2 < 0.0 || eta < 0.0) throw std::invalid_argument("kappa, eps2 and eta must be >= 0");
}

}  // namespace

double tolerance_delta0(int n, double eps2, double eta) {
  check_tolerance_args(n, 0.0, eps2, eta);
  const double N = n;
  return (N - 2.0) / N * std::sqrt(((N - 2.0) * eps2 + N * eta) / 2.0);
}

double tolerance_h1(int n, double kappa, double eps2, double eta) {
  check_tolerance_args(n, kappa, eps2, eta);
  const double N = n;
  const double inner = N * N * kappa * kappa + 2.0 * (N - 1.0) * ((N - 2.0) * eps2 + N * eta);
  return (std::sqrt(inner) - (N - 2.0) * kappa) / (2.0 * (N - 1.0));
}

double tolerance_h2(int n, double eps2, double eta) {
  check_tolerance_args(n, 0.0, eps2, eta);
  const double N = n;
  return std::sqrt(2.0 * ((N - 2.0) * eps2 + N * eta)) / N;
}

ToleranceInterval tolerance_interval(int n, double kappa, double eps2, double eta, double delta) {
  check_tolerance_args(n, kappa, eps2, eta);
  ToleranceInterval t;
  t.delta = delta;
  t.delta0 = tolerance_delta0(n, eps2, eta);
  if (t.delta0 >= kappa) {
    t.branch = IntervalBranch::h1;
    t.half_width = tolerance_h1(n, kappa, eps2, eta);
  } else {
    t.branch = IntervalBranch::h2;
    t.half_width = tolerance_h2(n, eps2, eta);
  }
  t.lo = delta - t.half_width;
  t.hi = delta + t.half_width;
  return t;
}

double crowd_gap_bound(int n, double mu, double delta, double eps2, double eta) {
  check_tolerance_args(n, 0.0, eps2, eta);
  const double N = n;
  return 2.0 * (1.0 - 1.0 / N) * mu * mu - 2.0 * mu * delta - (1.0 - 2.0 / N) * eps2 - eta;
}

double estimate_kappa(std::span<const double> abs_deviation, double alpha) {
  if (abs_deviation.empty()) throw std::invalid_argument("no deviations to estimate kappa from");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  std::vector<double> v(abs_deviation.begin(), abs_deviation.end());
  std::sort(v.begin(), v.end());
  const double pos = (1.0 - alpha) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double normal_quantile_two_sided(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha / 2.0);
}

double crowd_ci_half_width(double eps0, double alpha, double eta, std::size_t n_digital, double sigma_delta2,
                           double sigma_r2, std::size_t n_human) {
  if (n_digital == 0 || n_human == 0) throw std::invalid_argument("sample sizes must be positive");
  if (eps0 < 0.0 || eta < 0.0 || sigma_delta2 < 0.0 || sigma_r2 < 0.0)
    throw std::invalid_argument("eps0 and variances must be >= 0");
  const double N = static_cast<double>(n_digital), n = static_cast<double>(n_human);
  return eps0 + normal_quantile_two_sided(alpha) * std::sqrt(eta / N + sigma_delta2 / N + sigma_r2 / n);
}

ConfidenceInterval crowd_confidence_interval(std::span<const double> digital, std::span<const double> beliefs,
                               std::span<const double> residuals, double eta, double alpha, double eps0) {
  if (digital.size() < 2 || residuals.size() < 2) throw std::invalid_argument("need at least two digital and two human samples");
  if (beliefs.size() != digital.size()) throw std::invalid_argument("one belief bias per digital decision is required");
  ConfidenceInterval c;
  c.center = mean_of(digital);
  c.sigma_delta2 = biased_variance(beliefs);
  c.sigma_r2 = biased_variance(residuals);
  c.n_digital = digital.size();
  c.n_human = residuals.size();
  c.z = normal_quantile_two_sided(alpha);
  c.half_width = crowd_ci_half_width(eps0, alpha, eta, c.n_digital, c.sigma_delta2, c.sigma_r2, c.n_human);
  c.lo = c.center - c.half_width;
  c.hi = c.center + c.half_width;
  return c;
}

double resolution_rate(std::span<const double> abs_errors, double threshold) {
  if (abs_errors.empty()) throw std::invalid_argument("no errors given");
  const auto hits = std::count_if(abs_errors.begin(), abs_errors.end(), [&](double e) { return e < threshold; });
  return static_cast<double>(hits) / static_cast<double>(abs_errors.size());
}

namespace {

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman needs two equal-length samples of size >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace crowdsim
