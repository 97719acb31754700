#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsim/analysis.hpp"

namespace crowdsim {

struct ProblemReport {
  std::string id;
  double y_ref = 0.0;
  std::vector<double> human;                      ///< raw human decisions
  std::vector<double> digital;                    ///< raw digital decisions
  std::map<std::string, double> aggregated;       ///< digital, per aggregator
  std::map<std::string, double> human_aggregated; ///< human, per aggregator
  nlohmann::json diagnostics = nlohmann::json::object();

  friend bool operator==(const ProblemReport&, const ProblemReport&) = default;
};

struct RunReport {
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<ProblemReport> problems;
  std::map<std::string, MetricReport> metrics;  ///< per aggregator
  nlohmann::json diagnostics = nlohmann::json::object();

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

nlohmann::ordered_json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

/// Writes the report as a single JSON document. Throws std::runtime_error on I/O failure.
void save_report(const RunReport& report, const std::filesystem::path& path);

/// Throws DataError on an unreadable, truncated or malformed file.
RunReport load_report(const std::filesystem::path& path);

}  // namespace crowdsim
