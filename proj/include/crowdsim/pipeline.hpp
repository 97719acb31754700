#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsim/backend.hpp"
#include "crowdsim/config.hpp"
#include "crowdsim/dataset.hpp"
#include "crowdsim/population.hpp"
#include "crowdsim/report.hpp"

namespace crowdsim {

/// Output layout under --out-dir.
struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path cache() const { return root / "cache"; }
  std::filesystem::path sweeps() const { return root / "sweeps"; }

  std::filesystem::path ingest() const { return reports() / "ingest.json"; }
  std::filesystem::path reference() const { return reports() / "reference.json"; }
  std::filesystem::path checkpoint() const { return reports() / "checkpoint.json"; }
  std::filesystem::path loss_trace() const { return reports() / "loss_trace.csv"; }
  std::filesystem::path digital() const { return reports() / "digital.csv"; }
  std::filesystem::path simulation() const { return reports() / "simulation.jsonl"; }
  std::filesystem::path aggregate() const { return reports() / "aggregate.json"; }
  std::filesystem::path report() const { return reports() / "report.json"; }
  std::filesystem::path metrics_table() const { return reports() / "metrics.csv"; }
  std::filesystem::path risk_table() const { return reports() / "risk.csv"; }
  std::filesystem::path plot_data() const { return reports() / "plot_data.csv"; }
};

struct Dataset {
  ProblemSet problems;
  ResponseMatrix responses;
  std::optional<ProfileSpec> spec;
  std::vector<Profile> profiles;

  std::map<std::string, std::vector<double>> encoded_profiles() const;
};

/// Loads whatever the config's data section names. Throws DataError / ConfigError.
Dataset load_dataset(const PipelineConfig& cfg, bool need_responses = true);

/// Cached backend for one problem: the stub answers on the problem's own levels.
std::shared_ptr<LlmBackend> make_backend(const PipelineConfig& cfg, const Problem& problem,
                                         const std::shared_ptr<ResponseCache>& cache);

struct ReferenceEntry {
  double y_ref = 0.0;
  std::vector<double> samples;
  double eta = 0.0;  ///< sample variance of the samples, 0 when fewer than two
};
using ReferenceTable = std::map<std::string, ReferenceEntry>;

ReferenceTable load_reference(const std::filesystem::path& path);

/// Every step reads its inputs from the config and earlier outputs, and writes
/// into the layout. Each returns a short summary for the console.
nlohmann::ordered_json run_ingest(const PipelineConfig& cfg, const OutputLayout& out);
nlohmann::ordered_json run_reference(const PipelineConfig& cfg, const OutputLayout& out);
nlohmann::ordered_json run_train(const PipelineConfig& cfg, const OutputLayout& out);
nlohmann::ordered_json run_simulate(const PipelineConfig& cfg, const OutputLayout& out);
nlohmann::ordered_json run_aggregate(const PipelineConfig& cfg, const OutputLayout& out);
nlohmann::ordered_json run_evaluate(const PipelineConfig& cfg, const OutputLayout& out);
nlohmann::ordered_json run_report(const PipelineConfig& cfg, const OutputLayout& out);
nlohmann::ordered_json run_sweep_step(const PipelineConfig& cfg, const OutputLayout& out);

/// Aggregated value of `values` under a named method (mean, median, majority,
/// ds, glad) for every problem of a response matrix. ds and glad need discrete
/// scales; they are skipped (absent from the result) otherwise.
std::map<std::string, std::map<std::string, double>> aggregate_all(const ResponseMatrix& matrix,
                                                                   const ProblemSet& problems,
                                                                   const DecisionConfig& decision);

}  // namespace crowdsim
