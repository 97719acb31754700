#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crowdsim/blender.hpp"

namespace crowdsim {

struct BeliefNetDims {
  std::size_t feature_dim = 32;  ///< d_x
  std::size_t profile_dim = 0;   ///< d_z
  std::size_t embedding = 64;    ///< width of g_x and g_z
  std::size_t hidden = 64;       ///< encoder and decoder hidden width
  std::size_t belief_dim = 8;    ///< d_delta
  std::size_t output_dim = 1;    ///< 1 for numeric scales, M for choice scales

  friend bool operator==(const BeliefNetDims&, const BeliefNetDims&) = default;
};

/// Diagonal Gaussian q(delta | x, v).
struct BeliefEncoding {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::VectorXd log_variance;
};

/// Profile-conditioned VAE producing belief biases.
///
///   g_x = tanh(Wx x + bx),  g_z = tanh(Wz v + bz)
///   h   = tanh(We [g_x; g_z] + be)
///   mu  = Wmu h + bmu,  log sigma^2 = clamp(Wlv h + blv)
///   x^  = Wo tanh(Wd [delta; g_z] + bd) + bo        (decoder D)
///   effect = R delta                                (readout into decision space)
///
/// Every weight is a named Eigen matrix (biases are n x 1), which is also how
/// checkpoints and gradients are laid out.
class BeliefNet {
public:
  static constexpr double kMinLogVariance = -30.0;
  static constexpr double kMaxLogVariance = 20.0;

  BeliefNet() = default;

  static BeliefNet zeros(const BeliefNetDims& dims);
  /// Glorot-uniform weights, zero biases, seeded.
  static BeliefNet random(const BeliefNetDims& dims, std::uint64_t seed);

  const BeliefNetDims& dims() const noexcept { return dims_; }

  BeliefEncoding encode(std::span<const double> features, std::span<const double> profile) const;

  /// delta = mu + sigma * zeta with zeta ~ N(0, I) from the seeded stream.
  Eigen::VectorXd sample_belief(std::span<const double> features, std::span<const double> profile,
                                std::uint64_t seed) const;

  /// Decoder reconstruction of the problem features.
  Eigen::VectorXd decode(const Eigen::VectorXd& belief, std::span<const double> profile) const;

  /// R * delta.
  Eigen::VectorXd effect(const Eigen::VectorXd& belief) const;

  /// d mu / d features, analytic (belief_dim x feature_dim).
  Eigen::MatrixXd mean_jacobian(std::span<const double> features, std::span<const double> profile) const;

  struct Param {
    std::string name;
    Eigen::MatrixXd* value;
  };
  struct ConstParam {
    std::string name;
    const Eigen::MatrixXd* value;
  };
  std::vector<Param> parameters();
  std::vector<ConstParam> parameters() const;
  std::size_t parameter_count() const;
  bool finite() const;

  /// A net of the same shape with every parameter zero (gradient buffer).
  BeliefNet zeros_like() const { return zeros(dims_); }

  // Parameters (public so tests and the optimiser can address them directly).
  Eigen::MatrixXd wx, bx, wz, bz;
  Eigen::MatrixXd we, be, wmu, bmu, wlv, blv;
  Eigen::MatrixXd wd, bd, wo, bo;
  Eigen::MatrixXd readout;

private:
  BeliefNetDims dims_;
};

/// Squared loss of decisions and reconstruction data for one dataset.
/// Rows index problems and participants; entries are observed responses.
struct TrainingSet {
  struct Entry {
    std::size_t problem;
    std::size_t participant;
    Eigen::VectorXd target;  ///< y (numeric) or one-hot(y) (choice)
    double weight = 0.0;     ///< 1 / (N * T_i)
  };

  std::vector<Eigen::VectorXd> features;  ///< x_t per problem
  std::vector<Eigen::VectorXd> profiles;  ///< encoded v_i per participant
  std::vector<Eigen::VectorXd> reference; ///< y_ref (or one-hot) per problem
  std::vector<Entry> entries;

  /// Sets weights to 1/(N*T_i), N = participants with at least one entry;
  /// participants with no entries contribute nothing.
  void normalise_weights();
};

class ProblemSet;
class ResponseMatrix;

/// Builds a training set. `profiles` maps participant id to its encoded vector and
/// `reference` maps problem id to y_ref. Numeric scales give output_dim 1, choice
/// scales one-hot targets of size M (all choice problems must share M).
/// Throws std::invalid_argument when a responded problem has no y_ref or a
/// participant has no profile.
TrainingSet make_training_set(const ProblemSet& problems, const ResponseMatrix& responses,
                              const std::map<std::string, std::vector<double>>& profiles,
                              const std::map<std::string, double>& reference);

/// Width of the decision vector for a problem set (1, or M for choice scales).
std::size_t output_dim_for(const ProblemSet& problems);

struct LossOptions {
  double lambda = 1.0;
  BlenderConfig blender;
};

struct LossBreakdown {
  double l1 = 0.0;  ///< KL + reconstruction NLL
  double l2 = 0.0;  ///< decision loss
  double total = 0.0;
  double kl = 0.0;
  double reconstruction = 0.0;
};

/// L = L1 + lambda * L2 over `entries` (all when empty), with every random draw
/// (belief noise zeta, blender noise) derived from `seed` and the entry index, so
/// the loss is a deterministic function of the parameters. When `gradient` is
/// non-null it receives dL/dparams (accumulated, scaled by `scale`).
LossBreakdown evaluate_loss(const BeliefNet& net, const TrainingSet& data, const LossOptions& options,
                            std::uint64_t seed, BeliefNet* gradient = nullptr,
                            std::span<const std::size_t> entries = {}, double scale = 1.0);

/// Closed-form KL(N(mu, diag(var)) || N(0, I)).
double kl_standard_normal(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_variance);

/// L1 alone.
double elbo_loss(const BeliefNet& net, const TrainingSet& data, int belief_samples, std::uint64_t seed);

/// L2 alone. Throws std::invalid_argument when a problem lacks a reference decision.
double decision_loss(const BeliefNet& net, const TrainingSet& data, const BlenderConfig& blender, std::uint64_t seed);

struct TrainConfig {
  double lambda = 1.0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 200;
  std::size_t batch_size = 32;
  BlenderConfig blender;  ///< blender.samples is J
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLoss {
  int epoch;
  double l1;
  double l2;
  double total;
};

struct TrainResult {
  BeliefNet net;
  std::vector<EpochLoss> trace;  ///< epoch 0 is the initial loss
};

/// Adam on minibatches. Each epoch reshuffles with a seed derived from cfg.seed
/// and records full-dataset losses under a fixed evaluation seed.
/// Throws DivergenceError when a loss becomes non-finite.
TrainResult train(BeliefNet net, const TrainingSet& data, const TrainConfig& cfg);

nlohmann::json to_json(const BeliefNetDims& dims);
BeliefNetDims dims_from_json(const nlohmann::json& j);

void save_checkpoint(const BeliefNet& net, const nlohmann::json& config, const std::filesystem::path& path);
BeliefNet load_checkpoint(const std::filesystem::path& path);

void save_loss_trace(const std::vector<EpochLoss>& trace, const std::filesystem::path& path);

}  // namespace crowdsim
