#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "crowdsim/aggregate.hpp"
#include "crowdsim/backend.hpp"
#include "crowdsim/beliefnet.hpp"
#include "crowdsim/blender.hpp"
#include "crowdsim/harness.hpp"

namespace crowdsim {

/// Missing keys keep the values already in `base`.
BlenderConfig blender_from_json(const nlohmann::json& j, BlenderConfig base = {});
nlohmann::ordered_json to_json(const BlenderConfig& cfg);

/// Keys: lambda, learning_rate, beta1, beta2, epsilon, epochs, batch_size, J, sigma, family, seed.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::ordered_json to_json(const TrainConfig& cfg);

/// Partial dims (embedding, hidden, belief_dim) over `base`.
BeliefNetDims net_shape_from_json(const nlohmann::json& j, BeliefNetDims base);

struct BackendConfig {
  std::string kind = "stub";  ///< stub | http
  std::string url;
  std::string model;
  std::string api_key_env = "CROWDSIM_API_KEY";
  int parallelism = 1;
  std::string cache_path;     ///< default <out>/cache/responses.jsonl
  double stub_noise = 1.0;    ///< stub answers span each problem's own scale
};

struct DecisionConfig {
  std::string method = "mean";  ///< mean | median | majority | ds | glad
  int max_iter = 100;
  double tol = 1e-6;
};

struct AnalysisConfig {
  double alpha = 0.05;
  std::optional<double> kappa;  ///< estimated from training problems when absent
  double human_noise = 0.0;     ///< eta_i^2 assumed for every human
  std::optional<double> eps0;   ///< root mean squared twin residual when absent
  double resolution_threshold = 0.5;
};

/// The single JSON configuration document. Relative paths resolve against the
/// directory holding the config file.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;

  std::filesystem::path problems;
  std::filesystem::path responses;
  std::filesystem::path profiles;
  std::filesystem::path profile_spec;
  std::size_t feature_dim = kDefaultFeatureDim;

  BackendConfig backend;
  ReferenceOptions reference;
  BeliefNetDims net;  ///< feature/profile/output dims are inferred from the data
  TrainConfig train;
  BlenderConfig blender;  ///< used when simulating
  std::string population = "twins";  ///< twins | sampled
  std::size_t population_size = 20;
  DecisionConfig decision;
  AnalysisConfig analysis;
  std::optional<std::filesystem::path> evaluate_predicted;
  std::optional<std::filesystem::path> evaluate_reference;
  SimConfig sweep;

  nlohmann::json raw;  ///< the document as read, for report snapshots
};

/// Throws ConfigError on a malformed document or invalid values, DataError when unreadable.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace crowdsim
