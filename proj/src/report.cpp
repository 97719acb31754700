#include "crowdsim/report.hpp"

#include <fstream>
#include <sstream>

#include "crowdsim/error.hpp"

namespace crowdsim {

namespace {

nlohmann::ordered_json metric_json(const MetricReport& m) {
  nlohmann::ordered_json j;
  j["mae"] = m.mae;
  j["rmse"] = m.rmse;
  j["cosine"] = m.cosine;
  j["avg_wd"] = m.avg_wd;
  j["problems"] = m.problems;
  return j;
}

MetricReport metric_from_json(const nlohmann::json& j) {
  return {j.at("mae").get<double>(), j.at("rmse").get<double>(), j.at("cosine").get<double>(),
          j.at("avg_wd").get<double>(), j.at("problems").get<std::size_t>()};
}

}  // namespace

nlohmann::ordered_json to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["config"] = r.config;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [name, m] : r.metrics) metrics[name] = metric_json(m);
  j["metrics"] = metrics;
  j["diagnostics"] = r.diagnostics;
  nlohmann::ordered_json problems = nlohmann::ordered_json::array();
  for (const auto& p : r.problems) {
    nlohmann::ordered_json jp;
    jp["id"] = p.id;
    jp["y_ref"] = p.y_ref;
    jp["aggregated"] = p.aggregated;
    jp["human_aggregated"] = p.human_aggregated;
    jp["diagnostics"] = p.diagnostics;
    jp["human"] = p.human;
    jp["digital"] = p.digital;
    problems.push_back(jp);
  }
  j["problems"] = problems;
  return j;
}

RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = j.at("config");
  for (const auto& [name, m] : j.at("metrics").items()) r.metrics[name] = metric_from_json(m);
  r.diagnostics = j.at("diagnostics");
  for (const auto& jp : j.at("problems")) {
    ProblemReport p;
    p.id = jp.at("id").get<std::string>();
    p.y_ref = jp.at("y_ref").get<double>();
    p.aggregated = jp.at("aggregated").get<std::map<std::string, double>>();
    p.human_aggregated = jp.at("human_aggregated").get<std::map<std::string, double>>();
    p.diagnostics = jp.at("diagnostics");
    p.human = jp.at("human").get<std::vector<double>>();
    p.digital = jp.at("digital").get<std::vector<double>>();
    r.problems.push_back(std::move(p));
  }
  return r;
}

void save_report(const RunReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << to_json(report).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

RunReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed report '" + path.string() + "': " + e.what());
  }
}

}  // namespace crowdsim
