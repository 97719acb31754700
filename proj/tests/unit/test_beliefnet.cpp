#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "crowdsim/beliefnet.hpp"
#include "crowdsim/dataset.hpp"
#include "crowdsim/error.hpp"
#include "test_support.hpp"

using namespace crowdsim;
using crowdsim::testing::check_gradient;
using crowdsim::testing::random_net;
using crowdsim::testing::random_training_set;

namespace {

const BeliefNetDims kSmall{3, 2, 4, 5, 2, 1};

std::vector<double> vec(std::initializer_list<double> v) { return v; }

// one problem, one participant, zero features: the reconstruction target is 0
TrainingSet single_entry(double y_ref, double y, std::size_t dx = 3, std::size_t dz = 2) {
  TrainingSet s;
  s.features.push_back(Eigen::VectorXd::Zero(dx));
  s.profiles.push_back(Eigen::VectorXd::Zero(dz));
  s.reference.push_back(Eigen::VectorXd::Constant(1, y_ref));
  s.entries.push_back({0, 0, Eigen::VectorXd::Constant(1, y), 0.0});
  s.normalise_weights();
  return s;
}

}  // namespace

TEST(Encode, ZeroNetGivesPrior) {
  const auto net = BeliefNet::zeros(kSmall);
  const auto e = net.encode(vec({1, 2, 3}), vec({0.5, 1}));
  EXPECT_TRUE(e.mean.isZero());
  EXPECT_TRUE(e.variance.isOnes());
  EXPECT_TRUE(e.log_variance.isZero());
}

TEST(Encode, PureFunction) {
  const auto net = random_net(kSmall, 3);
  const auto a = net.encode(vec({0.1, -0.4, 2}), vec({0, 1}));
  const auto b = net.encode(vec({0.1, -0.4, 2}), vec({0, 1}));
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.log_variance, b.log_variance);
}

TEST(Encode, JacobianMatchesFiniteDifferences) {
  const auto net = random_net(kSmall, 5);
  std::vector<double> x{0.3, -0.2, 0.9};
  const std::vector<double> z{1, 0};
  const auto J = net.mean_jacobian(x, z);
  const double h = 1e-5;
  for (std::size_t c = 0; c < x.size(); ++c) {
    auto xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    const Eigen::VectorXd fd = (net.encode(xp, z).mean - net.encode(xm, z).mean) / (2 * h);
    for (Eigen::Index r = 0; r < fd.size(); ++r) EXPECT_LT(crowdsim::testing::relative_error(J(r, c), fd[r]), 1e-6);
  }
}

TEST(SampleBelief, ClampedVarianceCollapsesToMean) {
  auto net = random_net(kSmall, 7);
  net.wlv.setZero();
  net.blv.setConstant(-1e6);  // clamps to the minimum log-variance
  const auto e = net.encode(vec({1, 0, -1}), vec({0, 1}));
  EXPECT_TRUE((e.log_variance.array() == BeliefNet::kMinLogVariance).all());
  const auto d = net.sample_belief(vec({1, 0, -1}), vec({0, 1}), 11);
  EXPECT_LT((d - e.mean).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(SampleBelief, DeterministicAndUnbiased) {
  const auto net = random_net(kSmall, 9);
  const auto x = vec({0.2, 0.4, -0.3});
  const auto z = vec({1, 0});
  EXPECT_EQ(net.sample_belief(x, z, 5), net.sample_belief(x, z, 5));
  const auto e = net.encode(x, z);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kSmall.belief_dim);
  const int n = 100000;
  for (int k = 0; k < n; ++k) sum += net.sample_belief(x, z, static_cast<std::uint64_t>(k));
  const Eigen::VectorXd m = sum / n;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    EXPECT_LT(std::abs(m[i] - e.mean[i]), 0.02 * std::sqrt(e.variance[i])) << i;
}

TEST(Kl, ClosedForm) {
  EXPECT_DOUBLE_EQ(kl_standard_normal(Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0)), 0.0);
  EXPECT_DOUBLE_EQ(kl_standard_normal(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 0)), 0.5);
}

TEST(Elbo, PerfectReconstructionLeavesConstant) {
  // zero net: q = prior (KL 0) and the decoder returns 0 = x
  const auto s = single_entry(3, 5);
  const auto net = BeliefNet::zeros(kSmall);
  EXPECT_NEAR(elbo_loss(net, s, 4, 1), 3 * 0.5 * std::log(2 * std::numbers::pi), 1e-12);
}

TEST(DecisionLoss, HandCases) {
  const auto net = BeliefNet::zeros(kSmall);
  BlenderConfig b;
  EXPECT_DOUBLE_EQ(decision_loss(net, single_entry(3, 5), b, 0), 4.0);
  EXPECT_DOUBLE_EQ(decision_loss(net, single_entry(5, 5), b, 0), 0.0);
}

TEST(DecisionLoss, SilentParticipantContributesNothing) {
  auto s = single_entry(3, 5);
  s.profiles.push_back(Eigen::VectorXd::Ones(2));  // participant 1 never answers
  s.normalise_weights();
  EXPECT_DOUBLE_EQ(s.entries[0].weight, 1.0);
  const auto l = decision_loss(BeliefNet::zeros(kSmall), s, BlenderConfig{}, 0);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_DOUBLE_EQ(l, 4.0);
}

TEST(Weights, InverseParticipantsTimesTasks) {
  auto s = random_training_set(kSmall, 4, 3, 21);
  std::map<std::size_t, std::size_t> tasks;
  for (const auto& e : s.entries) ++tasks[e.participant];
  for (const auto& e : s.entries)
    EXPECT_DOUBLE_EQ(e.weight, 1.0 / (static_cast<double>(tasks.size()) * static_cast<double>(tasks[e.participant])));
}

TEST(Loss, LambdaZeroIsElboOnly) {
  const auto s = random_training_set(kSmall, 3, 3, 2);
  const auto net = random_net(kSmall, 4);
  LossOptions o;
  o.lambda = 0.0;
  o.blender.sigma = 0.3;
  const auto l = evaluate_loss(net, s, o, 8);
  EXPECT_DOUBLE_EQ(l.total, l.l1);
  EXPECT_NEAR(l.l1, l.kl + l.reconstruction, 1e-12);
}

TEST(Gradient, AllParametersMatchFiniteDifferences) {
  for (std::size_t out : {1u, 3u}) {
    BeliefNetDims d = kSmall;
    d.output_dim = out;
    auto net = random_net(d, 31 + out);
    const auto s = random_training_set(d, 3, 3, 5 + out);
    LossOptions o;
    o.lambda = 0.7;
    o.blender.sigma = 0.3;
    o.blender.samples = 3;
    BeliefNet g = net.zeros_like();
    evaluate_loss(net, s, o, 11, &g);
    const auto r = check_gradient(net, g, [&] { return evaluate_loss(net, s, o, 11).total; });
    EXPECT_LT(r.max_rel_error, 1e-4) << "output_dim " << out << " worst " << r.worst;
    EXPECT_EQ(r.checked, net.parameter_count());
  }
}

TEST(Train, LossDecreasesAndIsDeterministic) {
  // 5 problems, 4 participants, responses linear in the features
  const BeliefNetDims d{3, 2, 6, 8, 2, 1};
  TrainingSet s;
  Rng r(4);
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd x(3);
    for (auto& v : x) v = r.normal();
    s.features.push_back(x);
    s.reference.push_back(Eigen::VectorXd::Constant(1, 3.0));
  }
  for (int i = 0; i < 4; ++i) s.profiles.push_back(Eigen::Vector2d(i % 2, i / 2));
  for (int t = 0; t < 5; ++t)
    for (int i = 0; i < 4; ++i)
      s.entries.push_back({static_cast<std::size_t>(t), static_cast<std::size_t>(i),
                           Eigen::VectorXd::Constant(1, 3.0 + s.features[t][0] + 0.5 * i), 0.0});
  s.normalise_weights();
  TrainConfig c;
  c.epochs = 200;
  c.learning_rate = 0.01;
  c.batch_size = 8;
  c.blender.samples = 2;
  c.seed = 3;
  const auto a = train(BeliefNet::random(d, 1), s, c);
  ASSERT_EQ(a.trace.size(), 201u);
  EXPECT_LT(a.trace.back().total, a.trace.front().total);
  const auto b = train(BeliefNet::random(d, 1), s, c);
  EXPECT_EQ(a.net.wx, b.net.wx);
  EXPECT_EQ(a.trace.back().total, b.trace.back().total);
}

TEST(Train, RejectsBadConfig) {
  TrainConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, DivergenceIsReported) {
  const auto s = random_training_set(kSmall, 3, 3, 2);
  TrainConfig c;
  c.epochs = 5;
  c.learning_rate = 1e300;
  EXPECT_THROW(train(random_net(kSmall, 2), s, c), DivergenceError);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto dir = crowdsim::testing::scratch_dir("checkpoint");
  const auto net = random_net(kSmall, 12);
  save_checkpoint(net, {{"note", "x"}}, dir / "c.json");
  const auto back = load_checkpoint(dir / "c.json");
  EXPECT_EQ(back.dims(), net.dims());
  auto a = net.parameters();
  auto b = back.parameters();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(*a[k].value, *b[k].value) << a[k].name;
  crowdsim::testing::write_file(dir / "bad.json", "{\"dims\":");
  EXPECT_THROW(load_checkpoint(dir / "bad.json"), DataError);
}

TEST(TrainingSetBuilder, ChoiceTargetsAreOneHot) {
  ProblemSet ps;
  ps.add({"a", "", "", "", DecisionScale::choice(3), {1.0, 0.0}});
  ResponseMatrix m;
  m.add({"w", "a", 2}, ps.at("a").scale);
  const auto s = make_training_set(ps, m, {{"w", {1.0}}}, {{"a", 3.0}});
  ASSERT_EQ(s.entries.size(), 1u);
  EXPECT_EQ(s.entries[0].target, Eigen::Vector3d(0, 1, 0));
  EXPECT_EQ(s.reference[0], Eigen::Vector3d(0, 0, 1));
  EXPECT_THROW(make_training_set(ps, m, {}, {{"a", 3.0}}), std::invalid_argument);
}
