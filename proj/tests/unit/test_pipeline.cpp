#include <gtest/gtest.h>

#include <fstream>

#include "crowdsim/config.hpp"
#include "crowdsim/error.hpp"
#include "crowdsim/pipeline.hpp"
#include "crowdsim/report.hpp"
#include "test_support.hpp"

using namespace crowdsim;
using crowdsim::testing::read_file;
using crowdsim::testing::scratch_dir;
using crowdsim::testing::source_dir;

namespace {

nlohmann::json shipped(const char* name) {
  std::ifstream in(source_dir() / "configs" / name);
  return nlohmann::json::parse(in);
}

PipelineConfig quick_config() {
  auto j = shipped("pipeline.json");
  j["train"]["epochs"] = 15;
  return config_from_json(j, source_dir() / "configs");
}

void run_all(const PipelineConfig& cfg, const OutputLayout& out) {
  run_ingest(cfg, out);
  run_reference(cfg, out);
  run_train(cfg, out);
  run_simulate(cfg, out);
  run_aggregate(cfg, out);
  run_evaluate(cfg, out);
  run_report(cfg, out);
}

}  // namespace

TEST(Pipeline, TwoRunsAreByteIdentical) {
  const auto cfg = quick_config();
  const OutputLayout a{scratch_dir("pipe_a")}, b{scratch_dir("pipe_b")};
  run_all(cfg, a);
  run_all(cfg, b);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.root);
    ASSERT_TRUE(std::filesystem::exists(b.root / rel)) << rel;
    EXPECT_EQ(read_file(e.path()), read_file(b.root / rel)) << rel;
    ++files;
  }
  EXPECT_GE(files, 12u);
  const auto report = load_report(a.report());
  EXPECT_EQ(report.problems.size(), 10u);
  EXPECT_TRUE(report.metrics.count("mean"));
}

TEST(Pipeline, FixtureEvaluationIsExact) {
  const auto cfg = load_config(source_dir() / "configs" / "evaluate_fixture.json");
  const OutputLayout out{scratch_dir("pipe_fixture")};
  run_evaluate(cfg, out);
  const auto report = load_report(out.report());
  for (const auto& [method, m] : report.metrics) {
    EXPECT_EQ(m.mae, 0.0) << method;
    EXPECT_EQ(m.rmse, 0.0) << method;
  }
}

TEST(Pipeline, ZeroNetCrowdReproducesReference) {
  auto j = shipped("pipeline.json");
  j["train"]["epochs"] = 1;
  j["blender"]["sigma"] = 0.0;
  const auto cfg = config_from_json(j, source_dir() / "configs");
  const OutputLayout out{scratch_dir("pipe_zero")};
  run_reference(cfg, out);
  run_train(cfg, out);
  save_checkpoint(BeliefNet::zeros(load_checkpoint(out.checkpoint()).dims()), {}, out.checkpoint());
  run_simulate(cfg, out);

  const auto data = load_dataset(cfg);
  const auto ref = load_reference(out.reference());
  std::map<std::string, std::vector<double>> digital;
  std::ifstream in(out.simulation());
  for (std::string line; std::getline(in, line);) {
    const auto row = nlohmann::json::parse(line);
    digital[row["problem_id"]].push_back(row["value"]);
  }
  ASSERT_EQ(digital.size(), data.problems.size());
  for (const auto& [id, values] : digital) {
    const double expected = data.problems.at(id).scale.project(ref.at(id).y_ref);
    for (double v : values) EXPECT_EQ(v, expected) << id;
  }
}

TEST(Pipeline, MissingPrerequisiteIsDataError) {
  const auto cfg = quick_config();
  const OutputLayout out{scratch_dir("pipe_missing")};
  EXPECT_THROW(run_simulate(cfg, out), DataError);
}
