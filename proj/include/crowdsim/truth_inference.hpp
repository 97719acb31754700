#pragma once

#include <string>
#include <vector>

#include "crowdsim/dataset.hpp"

namespace crowdsim {

/// Output of an EM truth-inference run. Problems and participants follow the
/// first-appearance order of the input matrix; posteriors are over `classes`.
struct AggregationResult {
  std::vector<std::string> problems;
  std::vector<std::string> participants;
  std::vector<double> classes;
  std::vector<double> labels;                     ///< arg-max class per problem
  std::vector<std::vector<double>> posteriors;    ///< problem x class, rows sum to 1
  std::vector<std::vector<std::vector<double>>> confusion;  ///< DS: participant x true x observed
  std::vector<double> ability;                    ///< GLAD: alpha_i (one-vs-rest: mean over classes)
  std::vector<double> difficulty;                 ///< GLAD: 1 / beta_t (one-vs-rest: mean over classes)
  std::vector<double> trace;                      ///< objective after each iteration
  int iterations = 0;
  bool converged = false;
};

struct EmOptions {
  int max_iter = 100;
  double tol = 1e-6;
};

/// Dawid-Skene EM started from vote fractions. Confusion rows and class priors
/// carry a 0.01 pseudo-count; `trace` is the matching penalised log-likelihood.
/// `classes` lists the admissible labels; every response must be one of them.
AggregationResult dawid_skene(const ResponseMatrix& matrix, const std::vector<double>& classes,
                              const EmOptions& options = {});

/// GLAD: P(worker i correct on item t) = sigmoid(alpha_i * beta_t), beta_t > 0.
/// EM with a line-searched gradient-ascent M-step under N(1,1) priors on alpha
/// and N(0,1) on log beta. Two classes are handled natively; more are handled
/// one-vs-rest with the arg-max of the per-class posteriors.
AggregationResult glad(const ResponseMatrix& matrix, const std::vector<double>& classes,
                       const EmOptions& options = {});

/// Majority vote per problem (ties to the smallest label), in the same layout.
AggregationResult majority_vote(const ResponseMatrix& matrix, const std::vector<double>& classes);

}  // namespace crowdsim
