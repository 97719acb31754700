#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <tuple>
#include <vector>

#include "crowdsim/aggregate.hpp"
#include "crowdsim/analysis.hpp"
#include "crowdsim/config.hpp"
#include "crowdsim/dataset.hpp"
#include "crowdsim/decision.hpp"
#include "crowdsim/error.hpp"
#include "crowdsim/harness.hpp"
#include "crowdsim/pipeline.hpp"
#include "crowdsim/population.hpp"
#include "crowdsim/truth_inference.hpp"

namespace py = pybind11;
using namespace crowdsim;

namespace {

using Triple = std::tuple<std::string, std::string, double>;

ResponseMatrix to_matrix(const std::vector<Triple>& rows) {
  ResponseMatrix m;
  for (const auto& [who, what, v] : rows) m.add_unchecked({who, what, v});
  return m;
}

py::dict aggregation_dict(const AggregationResult& r) {
  py::dict d;
  d["problems"] = r.problems;
  d["participants"] = r.participants;
  d["classes"] = r.classes;
  d["labels"] = r.labels;
  d["posteriors"] = r.posteriors;
  d["ability"] = r.ability;
  d["difficulty"] = r.difficulty;
  d["trace"] = r.trace;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  return d;
}

std::vector<ProblemOutcome> outcomes(const std::vector<std::tuple<std::string, double, std::vector<double>>>& rows) {
  std::vector<ProblemOutcome> out;
  for (const auto& [id, v, dist] : rows) out.push_back({id, v, dist});
  return out;
}

PipelineConfig pipeline_config(const std::string& path, std::optional<std::uint64_t> seed) {
  auto cfg = load_config(path);
  if (seed) {
    auto raw = cfg.raw;
    raw["seed"] = *seed;
    cfg = config_from_json(raw, cfg.base_dir);
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Digital crowd simulation: aggregation, belief network, diagnostics and sweeps.";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  m.def("hashed_features", [](const std::string& text, std::size_t dim) { return hashed_features(text, dim); },
        py::arg("text"), py::arg("dim") = kDefaultFeatureDim);

  m.def(
      "aggregate",
      [](const std::vector<double>& values, const std::string& method) {
        return aggregate(values, aggregate_method_from_string(method));
      },
      py::arg("values"), py::arg("method") = "mean");

  m.def(
      "dawid_skene",
      [](const std::vector<Triple>& rows, const std::vector<double>& classes, int max_iter, double tol) {
        return aggregation_dict(dawid_skene(to_matrix(rows), classes, {max_iter, tol}));
      },
      py::arg("responses"), py::arg("classes"), py::arg("max_iter") = 100, py::arg("tol") = 1e-6,
      "responses: list of (participant_id, problem_id, value)");
  m.def(
      "glad",
      [](const std::vector<Triple>& rows, const std::vector<double>& classes, int max_iter, double tol) {
        return aggregation_dict(glad(to_matrix(rows), classes, {max_iter, tol}));
      },
      py::arg("responses"), py::arg("classes"), py::arg("max_iter") = 100, py::arg("tol") = 1e-6);
  m.def(
      "majority_vote",
      [](const std::vector<Triple>& rows, const std::vector<double>& classes) {
        return aggregation_dict(majority_vote(to_matrix(rows), classes));
      },
      py::arg("responses"), py::arg("classes"));

  py::class_<MetricReport>(m, "MetricReport")
      .def_readonly("mae", &MetricReport::mae)
      .def_readonly("rmse", &MetricReport::rmse)
      .def_readonly("cosine", &MetricReport::cosine)
      .def_readonly("avg_wd", &MetricReport::avg_wd)
      .def_readonly("problems", &MetricReport::problems);
  m.def(
      "metrics",
      [](const std::vector<std::tuple<std::string, double, std::vector<double>>>& predicted,
         const std::vector<std::tuple<std::string, double, std::vector<double>>>& reference) {
        const auto p = outcomes(predicted), r = outcomes(reference);
        return metrics(p, r);
      },
      py::arg("predicted"), py::arg("reference"), "rows: (problem_id, aggregated value, decision distribution)");
  m.def("empirical_w1", [](const std::vector<double>& a, const std::vector<double>& b) { return empirical_w1(a, b); });
  m.def("smoothing_w1_bound", &smoothing_w1_bound, py::arg("eps"), py::arg("eta"));
  m.def(
      "resolution_rate", [](const std::vector<double>& e, double thr) { return resolution_rate(e, thr); },
      py::arg("abs_errors"), py::arg("threshold") = 0.5);
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); });

  py::class_<RiskDecomposition>(m, "RiskDecomposition")
      .def_readonly("l1", &RiskDecomposition::l1)
      .def_readonly("l2", &RiskDecomposition::l2)
      .def_readonly("l3", &RiskDecomposition::l3)
      .def_readonly("l4", &RiskDecomposition::l4)
      .def_readonly("l5", &RiskDecomposition::l5)
      .def_readonly("total", &RiskDecomposition::total)
      .def_readonly("risk", &RiskDecomposition::risk)
      .def_readonly("gap", &RiskDecomposition::gap);
  m.def(
      "risk_decomposition",
      [](std::vector<double> human, std::vector<double> digital, std::vector<double> human_mean,
         std::vector<double> human_noise, std::vector<double> digital_mean, std::vector<double> digital_noise) {
        return risk_decomposition({std::move(human), std::move(human_mean), std::move(human_noise), std::move(digital),
                                   std::move(digital_mean), std::move(digital_noise)});
      },
      py::arg("human"), py::arg("digital"), py::arg("human_mean") = std::vector<double>{},
      py::arg("human_noise") = std::vector<double>{}, py::arg("digital_mean") = std::vector<double>{},
      py::arg("digital_noise") = std::vector<double>{});

  py::class_<ToleranceInterval>(m, "ToleranceInterval")
      .def_readonly("delta", &ToleranceInterval::delta)
      .def_readonly("half_width", &ToleranceInterval::half_width)
      .def_readonly("delta0", &ToleranceInterval::delta0)
      .def_property_readonly("branch",
                             [](const ToleranceInterval& t) { return t.branch == IntervalBranch::h1 ? "h1" : "h2"; })
      .def_readonly("lo", &ToleranceInterval::lo)
      .def_readonly("hi", &ToleranceInterval::hi)
      .def("contains", &ToleranceInterval::contains);
  m.def("tolerance_interval", &tolerance_interval, py::arg("n"), py::arg("kappa"), py::arg("eps2"), py::arg("eta"),
        py::arg("delta"));

  py::class_<ConfidenceInterval>(m, "ConfidenceInterval")
      .def_readonly("center", &ConfidenceInterval::center)
      .def_readonly("half_width", &ConfidenceInterval::half_width)
      .def_readonly("z", &ConfidenceInterval::z)
      .def_readonly("lo", &ConfidenceInterval::lo)
      .def_readonly("hi", &ConfidenceInterval::hi)
      .def("contains", &ConfidenceInterval::contains);
  m.def(
      "confidence_interval",
      [](const std::vector<double>& digital, const std::vector<double>& beliefs, const std::vector<double>& residuals,
         double eta, double alpha, double eps0) { return crowd_confidence_interval(digital, beliefs, residuals, eta, alpha, eps0); },
      py::arg("digital"), py::arg("beliefs"), py::arg("residuals"), py::arg("eta"), py::arg("alpha"), py::arg("eps0"));
  m.def("normal_quantile_two_sided", &normal_quantile_two_sided, py::arg("alpha"));

  m.def(
      "zero_net_crowd_mean",
      [](const std::vector<double>& features, const std::vector<double>& profile, double y_ref, double lo, double hi,
         std::uint64_t seed) {
        BeliefNetDims dims;
        dims.feature_dim = features.size();
        dims.profile_dim = profile.size();
        Problem p;
        p.id = "p";
        p.scale = DecisionScale::continuous(lo, hi);
        p.features = features;
        BlenderConfig b;
        return personalized_decision(BeliefNet::zeros(dims), p, profile, y_ref, b, seed).value;
      },
      py::arg("features"), py::arg("profile"), py::arg("y_ref"), py::arg("lo"), py::arg("hi"), py::arg("seed") = 0,
      "Decision of a zero belief network with a noiseless blender (returns y_ref projected).");

  m.def(
      "run_sweep",
      [](const std::string& config_json) {
        const auto cfg = sim_config_from_json(nlohmann::json::parse(config_json));
        const auto result = run_sweep(cfg);
        return to_json(result).dump();
      },
      py::arg("config_json"), "Runs a sweep from a JSON SimConfig and returns the SweepResult as JSON text.");

  m.def(
      "run_step",
      [](const std::string& step, const std::string& config, const std::string& out_dir,
         std::optional<std::uint64_t> seed) {
        const auto cfg = pipeline_config(config, seed);
        const OutputLayout out{out_dir};
        nlohmann::ordered_json summary;
        if (step == "ingest") summary = run_ingest(cfg, out);
        else if (step == "reference") summary = run_reference(cfg, out);
        else if (step == "train") summary = run_train(cfg, out);
        else if (step == "simulate") summary = run_simulate(cfg, out);
        else if (step == "aggregate") summary = run_aggregate(cfg, out);
        else if (step == "evaluate") summary = run_evaluate(cfg, out);
        else if (step == "report") summary = run_report(cfg, out);
        else if (step == "sweep") summary = run_sweep_step(cfg, out);
        else throw ConfigError("unknown step '" + step + "'");
        return summary.dump();
      },
      py::arg("step"), py::arg("config"), py::arg("out_dir"), py::arg("seed") = py::none(),
      "Runs one pipeline step and returns its summary as JSON text.");
}
