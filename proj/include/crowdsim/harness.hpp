#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsim/beliefnet.hpp"
#include "crowdsim/dataset.hpp"
#include "crowdsim/population.hpp"

namespace crowdsim {

/// Two-field demo spec (Gender, Age) used by the simulation study.
ProfileSpec demo_profile_spec();

/// The seeded ground-truth model and the design of one synthetic dataset.
struct WorldSpec {
  // ground-truth model (shared by every dataset drawn with the same model_seed)
  std::uint64_t model_seed = 1;
  std::size_t n_problems = 50;
  std::size_t feature_dim = 8;
  BeliefNetDims teacher{8, 0, 8, 16, 2, 1};  ///< feature/profile dims are filled in
  double effect_scale = 1.0;                 ///< teacher readout multiplier
  double ref_lo = 1.0;                       ///< stub reference range
  double ref_hi = 5.0;
  double scale_lo = -50.0;                   ///< continuous decision scale
  double scale_hi = 50.0;
  ProfileSpec profile_spec = demo_profile_spec();

  // dataset design
  std::size_t n_workers = 10;
  std::size_t tasks_per_worker = 5;
  double response_error = 0.0;    ///< sd of Gaussian response noise
  double belief_diversity = 0.0;  ///< sd of per-worker additive offsets
  double train_fraction = 1.0;    ///< share of problems workers answer; the rest are held out
};

struct SyntheticWorld {
  ProblemSet problems;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::vector<Profile> workers;
  std::map<std::string, double> offsets;  ///< per-worker belief offset
  ResponseMatrix responses;               ///< on training problems only
  std::map<std::string, double> y_ref;
  std::map<std::string, double> truth;    ///< population-mean answer per problem
};

/// Deterministic synthetic dataset: y = y_ref + teacher effect(x) + offset_i + noise,
/// with offset_i ~ N(0, belief_diversity^2) and noise ~ N(0, response_error^2).
SyntheticWorld synth_world(const WorldSpec& spec, std::uint64_t seed);

struct SimConfig {
  std::vector<std::size_t> n_workers{2, 5, 10, 20};
  std::vector<std::size_t> tasks_per_worker{5, 10};
  std::vector<double> response_error{0.0, 1.0, 2.0};
  std::vector<double> belief_diversity{0.0, 1.0, 2.0};
  int repetitions = 10;
  std::size_t test_virtual_workers = 20;
  double test_fraction = 0.2;
  double resolution_threshold = 0.5;
  std::uint64_t seed = 0;
  int parallelism = 1;
  WorldSpec world;
  BeliefNetDims student{8, 0, 8, 16, 2, 1};  ///< feature/profile dims are filled in
  TrainConfig train;

  void validate() const;
};

struct SweepCell {
  std::size_t n_workers = 0;
  std::size_t tasks_per_worker = 0;
  double response_error = 0.0;
  double belief_diversity = 0.0;
  std::vector<double> mae;                 ///< one per successful repetition
  std::vector<std::uint64_t> seeds;        ///< one per repetition
  std::vector<double> resolution_curve;    ///< k = 1..test_virtual_workers, mean over repetitions
  std::vector<std::string> failures;       ///< messages of diverged repetitions
  double mae_mean = 0.0;
  double mae_std = 0.0;
  bool failed = false;                     ///< no repetition succeeded
};

struct SweepResult {
  std::vector<SweepCell> cells;  ///< grid order: workers, tasks, response error, diversity (last fastest)
  nlohmann::ordered_json config;
};

SweepResult run_sweep(const SimConfig& cfg);

/// Result of one (cell, repetition): MAE over held-out problems and per-k resolution rates.
struct RepetitionOutcome {
  double mae = 0.0;
  std::vector<double> resolution_curve;
};
RepetitionOutcome run_repetition(const SimConfig& cfg, const WorldSpec& design, std::uint64_t seed);

nlohmann::ordered_json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const SweepResult& result);
void save_sweep(const SweepResult& result, const std::filesystem::path& json_path,
                const std::filesystem::path& csv_path, const std::filesystem::path& curve_csv_path);

/// Qualitative checks on a sweep over the full factor grid.
struct SweepFindings {
  std::map<double, double> mae_by_diversity_at_zero_error;  ///< mean MAE per belief diversity at response_error 0
  std::map<double, double> mae_by_error;                    ///< mean MAE per response error
  std::map<double, double> worker_spearman;                 ///< rho(n_workers, MAE) at diversity 0, per response error
  bool zero_diversity_best = false;
  bool workers_trend_nonnegative = false;
  bool error_monotone = false;
};
SweepFindings analyse_sweep(const SweepResult& result);

}  // namespace crowdsim
