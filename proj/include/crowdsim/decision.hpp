#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "crowdsim/beliefnet.hpp"
#include "crowdsim/blender.hpp"
#include "crowdsim/dataset.hpp"

namespace crowdsim {

/// Scalar effect w . delta; w is the first readout row of the net.
double map_belief_to_effect(const BeliefNet& net, const Eigen::VectorXd& belief);
double map_belief_to_effect(std::span<const double> weights, const Eigen::VectorXd& belief);

struct PersonalDecision {
  double value = 0.0;     ///< projected onto the problem's scale
  double expected = 0.0;  ///< (1/J) sum_j B(y_ref, delta_j) before projection (choice: winning score)
};

/// y^ = (1/J) sum_j B_sigma(y_ref, delta_j), then projected onto the scale. Draw j
/// uses seeds derived from (seed, j), so for fixed seed the result is monotone in
/// y_ref. Choice problems average score vectors one_hot(y_ref) + R delta_j + noise
/// and emit the arg-max alternative (ties to the smaller label).
PersonalDecision personalized_decision(const BeliefNet& net, const Problem& problem,
                                       std::span<const double> profile, double y_ref, const BlenderConfig& cfg,
                                       std::uint64_t seed);

}  // namespace crowdsim
