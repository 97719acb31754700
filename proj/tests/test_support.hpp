#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "crowdsim/beliefnet.hpp"
#include "crowdsim/rng.hpp"

namespace crowdsim::testing {

inline std::filesystem::path source_dir() { return CROWDSIM_SOURCE_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("crowdsim_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// |a - f| / max(|a|, |f|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Small random training set over `problems` x `participants` with a few entries missing.
inline TrainingSet random_training_set(const BeliefNetDims& d, std::size_t problems, std::size_t participants,
                                       std::uint64_t seed) {
  Rng r(seed);
  TrainingSet s;
  for (std::size_t t = 0; t < problems; ++t) {
    Eigen::VectorXd x(d.feature_dim);
    for (auto& v : x) v = r.normal();
    s.features.push_back(x);
    Eigen::VectorXd ref(d.output_dim);
    for (auto& v : ref) v = r.normal();
    s.reference.push_back(ref);
  }
  for (std::size_t i = 0; i < participants; ++i) {
    Eigen::VectorXd v(d.profile_dim);
    for (auto& z : v) z = r.uniform();
    s.profiles.push_back(v);
  }
  for (std::size_t t = 0; t < problems; ++t)
    for (std::size_t i = 0; i < participants; ++i) {
      if (r.uniform() < 0.25) continue;
      Eigen::VectorXd y(d.output_dim);
      for (auto& v : y) v = r.normal(0.0, 2.0);
      s.entries.push_back({t, i, y, 0.0});
    }
  if (s.entries.empty()) s.entries.push_back({0, 0, Eigen::VectorXd::Zero(d.output_dim), 0.0});
  s.normalise_weights();
  return s;
}

/// Random net with nonzero biases so every parameter matters.
inline BeliefNet random_net(const BeliefNetDims& d, std::uint64_t seed) {
  BeliefNet net = BeliefNet::random(d, seed);
  Rng r(derive_seed(seed, {99}));
  for (auto& p : net.parameters())
    if (p.value->cols() == 1)
      for (Eigen::Index i = 0; i < p.value->size(); ++i) (*p.value)(i, 0) = r.uniform(-0.5, 0.5);
  return net;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

/// Central differences of `loss` against the analytic gradient `grad` for every parameter.
inline GradientCheck check_gradient(BeliefNet& net, const BeliefNet& grad, const std::function<double()>& loss,
                                    double h = 1e-5) {
  GradientCheck out;
  auto ps = net.parameters();
  auto gs = grad.parameters();
  for (std::size_t k = 0; k < ps.size(); ++k)
    for (Eigen::Index i = 0; i < ps[k].value->size(); ++i) {
      double& w = ps[k].value->data()[i];
      const double w0 = w;
      w = w0 + h;
      const double a = loss();
      w = w0 - h;
      const double b = loss();
      w = w0;
      const double fd = (a - b) / (2.0 * h);
      const double e = relative_error(gs[k].value->data()[i], fd);
      ++out.checked;
      if (e > out.max_rel_error) {
        out.max_rel_error = e;
        out.worst = ps[k].name + "[" + std::to_string(i) + "]";
      }
    }
  return out;
}

}  // namespace crowdsim::testing
