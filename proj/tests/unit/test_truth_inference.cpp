#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "crowdsim/error.hpp"
#include "crowdsim/truth_inference.hpp"
#include "test_support.hpp"

using namespace crowdsim;

namespace {

const std::vector<double> kBinary{0, 1};

void expect_monotone(const std::vector<double>& trace) {
  for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_GE(trace[k], trace[k - 1] - 1e-9) << "iteration " << k;
}

ResponseMatrix matrix(const std::vector<std::tuple<std::string, std::string, double>>& rows) {
  ResponseMatrix m;
  for (const auto& [w, t, v] : rows) m.add_unchecked({w, t, v});
  return m;
}

std::string item(int t) { return "t" + std::to_string(t); }

// two truthful workers and one that always reports the opposite label
ResponseMatrix adversarial(const std::vector<int>& truth) {
  ResponseMatrix m;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    m.add_unchecked({"good1", item(static_cast<int>(t)), static_cast<double>(truth[t])});
    m.add_unchecked({"good2", item(static_cast<int>(t)), static_cast<double>(truth[t])});
    m.add_unchecked({"liar", item(static_cast<int>(t)), static_cast<double>(1 - truth[t])});
  }
  return m;
}

// Profile log-likelihood of a hard labelling: ML priors and confusion rows are empirical frequencies.
double profile_loglik(const ResponseMatrix& m, const std::map<std::string, int>& labels) {
  auto xlogx = [](double c, double n) { return c > 0 ? c * std::log(c / n) : 0.0; };
  double ll = 0.0;
  std::map<int, double> prior;
  for (const auto& [t, z] : labels) prior[z] += 1.0;
  for (const auto& [z, c] : prior) ll += xlogx(c, static_cast<double>(labels.size()));
  std::map<std::pair<std::string, int>, std::map<int, double>> conf;
  for (const auto& r : m.responses()) conf[{r.participant_id, labels.at(r.problem_id)}][static_cast<int>(r.value)] += 1.0;
  for (const auto& [key, row] : conf) {
    double n = 0;
    for (const auto& [o, c] : row) n += c;
    for (const auto& [o, c] : row) ll += xlogx(c, n);
  }
  return ll;
}

}  // namespace

TEST(DawidSkene, SingleWorkerLabelsAreKept) {
  const auto r = dawid_skene(matrix({{"w", "a", 1}, {"w", "b", 0}, {"w", "c", 1}}), kBinary);
  EXPECT_EQ(r.labels, (std::vector<double>{1, 0, 1}));
  expect_monotone(r.trace);
}

TEST(DawidSkene, ConsensusHasConfidentPosteriors) {
  ResponseMatrix m;
  for (const char* w : {"x", "y", "z"})
    for (int t = 0; t < 5; ++t) m.add_unchecked({w, item(t), static_cast<double>((t * 2) % 3)});
  const auto r = dawid_skene(m, {0, 1, 2});
  for (std::size_t t = 0; t < r.problems.size(); ++t) {
    EXPECT_EQ(r.labels[t], static_cast<double>((t * 2) % 3));
    EXPECT_GT(*std::max_element(r.posteriors[t].begin(), r.posteriors[t].end()), 0.99);
  }
}

TEST(DawidSkene, RecoversBruteForceMaximumLikelihood) {
  const std::vector<int> truth{0, 1, 1, 0, 1, 0, 0, 1};
  const auto m = adversarial(truth);

  // all 2^8 labellings; the maximum is attained by the truth and its mirror image
  double best = -1e300;
  std::set<std::vector<int>> argmax;
  for (int mask = 0; mask < 256; ++mask) {
    std::map<std::string, int> labels;
    std::vector<int> z(8);
    for (int t = 0; t < 8; ++t) labels[item(t)] = z[t] = (mask >> t) & 1;
    const double ll = profile_loglik(m, labels);
    if (ll > best + 1e-9) {
      best = ll;
      argmax.clear();
    }
    if (std::abs(ll - best) <= 1e-9) argmax.insert(z);
  }
  std::vector<int> mirror(truth);
  for (auto& v : mirror) v = 1 - v;
  EXPECT_EQ(argmax, (std::set<std::vector<int>>{truth, mirror}));

  const auto r = dawid_skene(m, kBinary);
  std::vector<int> got;
  for (double v : r.labels) got.push_back(static_cast<int>(v));
  EXPECT_TRUE(argmax.count(got));
  EXPECT_EQ(got, truth);
  const auto liar = static_cast<std::size_t>(
      std::find(r.participants.begin(), r.participants.end(), "liar") - r.participants.begin());
  EXPECT_GT(r.confusion[liar][0][1], 0.9);
  EXPECT_GT(r.confusion[liar][1][0], 0.9);
  expect_monotone(r.trace);
}

TEST(DawidSkene, RejectsUnknownClass) {
  EXPECT_THROW(dawid_skene(matrix({{"w", "a", 7}}), kBinary), DataError);
}

TEST(Glad, SingleWorkerLabelsAreKept) {
  const auto r = glad(matrix({{"w", "a", 1}, {"w", "b", 0}, {"w", "c", 0}}), kBinary);
  EXPECT_EQ(r.labels, (std::vector<double>{1, 0, 0}));
  expect_monotone(r.trace);
}

TEST(Glad, RecoversLabelsFromItsOwnModel) {
  Rng rng(2024);
  const int workers = 10, items = 50;
  std::vector<double> alpha(workers), beta(items);
  for (auto& a : alpha) a = rng.normal(1.5, 0.7);
  for (auto& b : beta) b = std::exp(rng.normal(0.0, 0.5));
  std::vector<int> truth(items);
  ResponseMatrix m;
  for (int t = 0; t < items; ++t) {
    truth[t] = rng.bernoulli(0.5) ? 1 : 0;
    for (int i = 0; i < workers; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-alpha[i] * beta[t]));
      const int v = rng.bernoulli(p) ? truth[t] : 1 - truth[t];
      m.add_unchecked({"w" + std::to_string(i), item(t), static_cast<double>(v)});
    }
  }
  const auto r = glad(m, kBinary);
  int correct = 0;
  for (std::size_t k = 0; k < r.problems.size(); ++k)
    correct += static_cast<int>(r.labels[k]) == truth[std::stoi(r.problems[k].substr(1))];
  EXPECT_GE(correct, 48);  // >= 95%
  expect_monotone(r.trace);
  ASSERT_EQ(r.ability.size(), static_cast<std::size_t>(workers));
  ASSERT_EQ(r.difficulty.size(), static_cast<std::size_t>(items));
}

TEST(Glad, MultiClassOneVsRest) {
  ResponseMatrix m;
  const std::vector<double> truth{1, 2, 3, 2, 1, 3};
  for (int i = 0; i < 5; ++i)
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double v = (i == 4 && t % 2 == 0) ? (truth[t] == 3 ? 1 : truth[t] + 1) : truth[t];
      m.add_unchecked({"w" + std::to_string(i), item(static_cast<int>(t)), v});
    }
  const auto r = glad(m, {1, 2, 3});
  EXPECT_EQ(r.labels, truth);
  for (const auto& row : r.posteriors) {
    double s = 0;
    for (double p : row) s += p;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  expect_monotone(r.trace);
}

TEST(MajorityVote, TiesGoToSmallestLabel) {
  const auto r = majority_vote(matrix({{"a", "x", 2}, {"b", "x", 1}, {"c", "y", 2}}), {1, 2});
  EXPECT_EQ(r.labels, (std::vector<double>{1, 2}));
}
