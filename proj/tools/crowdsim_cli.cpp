#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "crowdsim/config.hpp"
#include "crowdsim/error.hpp"
#include "crowdsim/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

using Step = std::function<nlohmann::ordered_json(const crowdsim::PipelineConfig&, const crowdsim::OutputLayout&)>;

crowdsim::PipelineConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw crowdsim::DataError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw crowdsim::ConfigError("malformed config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw crowdsim::ConfigError("config must be a JSON object");
  if (seed) j["seed"] = *seed;
  return crowdsim::config_from_json(j, std::filesystem::path(path).parent_path());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdsim: digital crowd simulation, aggregation and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "JSON configuration document")->required();
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out-dir", out_dir, "output directory (reports/, cache/, sweeps/)");

  const std::map<std::string, std::pair<std::string, Step>> steps{
      {"ingest", {"validate and summarise the datasets", crowdsim::run_ingest}},
      {"reference", {"precompute reference decisions through the cached backend", crowdsim::run_reference}},
      {"train", {"train the belief network", crowdsim::run_train}},
      {"simulate", {"draw digital population decisions", crowdsim::run_simulate}},
      {"aggregate", {"aggregate decisions per problem", crowdsim::run_aggregate}},
      {"evaluate", {"metrics and diagnostics against human decisions", crowdsim::run_evaluate}},
      {"sweep", {"run the simulation-study sweep", crowdsim::run_sweep_step}},
      {"report", {"render tables and plot-data CSVs", crowdsim::run_report}},
  };
  for (const auto& [name, entry] : steps) app.add_subcommand(name, entry.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = resolve_config(config_path, seed);
    const auto summary = steps.at(name).second(cfg, crowdsim::OutputLayout{out_dir});
    std::cout << name << ' ' << summary.dump() << '\n';
    return kOk;
  } catch (const crowdsim::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const crowdsim::UnparseableResponse& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const crowdsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
