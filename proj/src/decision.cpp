#include "crowdsim/decision.hpp"

#include <stdexcept>

#include "crowdsim/rng.hpp"

namespace crowdsim {

double map_belief_to_effect(const BeliefNet& net, const Eigen::VectorXd& belief) {
  return net.effect(belief)[0];
}

double map_belief_to_effect(std::span<const double> weights, const Eigen::VectorXd& belief) {
  if (weights.size() != static_cast<std::size_t>(belief.size()))
    throw std::invalid_argument("readout and belief dimensions differ");
  double s = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) s += weights[k] * belief[static_cast<Eigen::Index>(k)];
  return s;
}

PersonalDecision personalized_decision(const BeliefNet& net, const Problem& problem,
                                       std::span<const double> profile, double y_ref, const BlenderConfig& cfg,
                                       std::uint64_t seed) {
  cfg.validate();
  const int J = cfg.samples;
  const auto& scale = problem.scale;

  if (scale.kind() != ScaleKind::choice) {
    double sum = 0.0;
    for (int j = 0; j < J; ++j) {
      const auto delta = net.sample_belief(problem.features, profile, derive_seed(seed, {static_cast<std::uint64_t>(j), 0}));
      Rng noise(derive_seed(seed, {static_cast<std::uint64_t>(j), 1}));
      sum += blend(y_ref, map_belief_to_effect(net, delta), cfg, noise) - y_ref;
    }
    const double mean = y_ref + sum / J;
    return {scale.project(mean), mean};
  }

  const auto m = static_cast<Eigen::Index>(scale.size());
  if (net.dims().output_dim != scale.size())
    throw std::invalid_argument("net output dimension does not match the number of alternatives");
  Eigen::VectorXd score = Eigen::VectorXd::Zero(m);
  score[static_cast<Eigen::Index>(scale.index_of(scale.project(y_ref)))] = 1.0;
  for (int j = 0; j < J; ++j) {
    const auto delta = net.sample_belief(problem.features, profile, derive_seed(seed, {static_cast<std::uint64_t>(j), 0}));
    const Eigen::VectorXd eff = net.effect(delta);
    Rng noise(derive_seed(seed, {static_cast<std::uint64_t>(j), 1}));
    for (Eigen::Index k = 0; k < m; ++k) score[k] += blend(0.0, eff[k], cfg, noise) / J;
  }
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < m; ++k)
    if (score[k] > score[best]) best = k;
  return {scale.levels()[static_cast<std::size_t>(best)], score[best]};
}

}  // namespace crowdsim
