#include "crowdsim/truth_inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "crowdsim/error.hpp"

namespace crowdsim {

namespace {

constexpr double kPseudo = 0.01;

struct Obs {
  std::size_t worker;
  std::size_t label;
};

struct Layout {
  std::vector<std::string> problems;
  std::vector<std::string> participants;
  std::vector<std::vector<Obs>> by_item;
};

Layout layout_of(const ResponseMatrix& matrix, const std::vector<double>& classes) {
  if (classes.size() < 2) throw ConfigError("truth inference needs at least two classes");
  Layout l{matrix.problems(), matrix.participants(), {}};
  for (const auto& pid : l.problems) {
    std::vector<Obs> row;
    for (const auto& e : matrix.for_problem(pid)) {
      auto it = std::find_if(classes.begin(), classes.end(), [&](double c) { return std::abs(c - e.value) <= 1e-9; });
      if (it == classes.end())
        throw DataError("response " + format_number(e.value) + " to '" + pid + "' is not one of the classes");
      row.push_back({e.participant, static_cast<std::size_t>(it - classes.begin())});
    }
    l.by_item.push_back(std::move(row));
  }
  return l;
}

std::vector<std::vector<double>> vote_fractions(const Layout& l, std::size_t k) {
  std::vector<std::vector<double>> post(l.by_item.size(), std::vector<double>(k, 0.0));
  for (std::size_t t = 0; t < l.by_item.size(); ++t) {
    for (const auto& o : l.by_item[t]) post[t][o.label] += 1.0;
    const double n = static_cast<double>(l.by_item[t].size());
    for (auto& p : post[t]) p = n > 0 ? p / n : 1.0 / static_cast<double>(k);
  }
  return post;
}

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void fill_labels(AggregationResult& r) {
  r.labels.clear();
  for (const auto& p : r.posteriors) r.labels.push_back(r.classes[argmax(p)]);
}

// log sigmoid(x), stable for large |x|.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

struct BinaryGlad {
  std::vector<double> post;  // P(Z_t = 1)
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

// labels in `items` are 0/1; the class prior is fixed at 1/2.
BinaryGlad glad_binary(const std::vector<std::vector<Obs>>& items, std::size_t workers, const EmOptions& opt) {
  const std::size_t T = items.size();
  BinaryGlad g;
  g.post.assign(T, 0.5);
  for (std::size_t t = 0; t < T; ++t) {
    if (items[t].empty()) continue;
    double ones = 0;
    for (const auto& o : items[t]) ones += static_cast<double>(o.label);
    g.post[t] = ones / static_cast<double>(items[t].size());
  }
  std::vector<double> alpha(workers, 1.0), b(T, 0.0);
  double step = 1.0;

  auto q_value = [&](const std::vector<double>& a, const std::vector<double>& bb) {
    double q = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double beta = std::exp(bb[t]);
      for (const auto& o : items[t]) {
        const double correct = o.label == 1 ? g.post[t] : 1.0 - g.post[t];
        const double x = a[o.worker] * beta;
        q += correct * log_sigmoid(x) + (1.0 - correct) * log_sigmoid(-x);
      }
      q -= 0.5 * bb[t] * bb[t];
    }
    for (double ai : a) q -= 0.5 * (ai - 1.0) * (ai - 1.0);
    return q;
  };

  for (int it = 1; it <= opt.max_iter; ++it) {

    // M-step: gradient ascent with backtracking on the expected complete log posterior.
    double q = q_value(alpha, b);
    for (int inner = 0; inner < 50; ++inner) {
      std::vector<double> ga(workers), gb(T);
      for (std::size_t i = 0; i < workers; ++i) ga[i] = -(alpha[i] - 1.0);
      for (std::size_t t = 0; t < T; ++t) {
        const double beta = std::exp(b[t]);
        gb[t] = -b[t];
        for (const auto& o : items[t]) {
          const double correct = o.label == 1 ? g.post[t] : 1.0 - g.post[t];
          const double r = correct - sigmoid(alpha[o.worker] * beta);
          ga[o.worker] += r * beta;
          gb[t] += r * alpha[o.worker] * beta;
        }
      }
      double norm2 = 0.0;
      for (double x : ga) norm2 += x * x;
      for (double x : gb) norm2 += x * x;
      if (norm2 < 1e-20) break;

      bool accepted = false;
      step = std::min(1.0, 2.0 * step);
      for (int halve = 0; halve < 50; ++halve, step *= 0.5) {
        std::vector<double> na(workers), nb(T);
        for (std::size_t i = 0; i < workers; ++i) na[i] = alpha[i] + step * ga[i];
        for (std::size_t t = 0; t < T; ++t) nb[t] = b[t] + step * gb[t];
        const double nq = q_value(na, nb);
        if (nq >= q + 1e-4 * step * norm2) {
          alpha = std::move(na);
          b = std::move(nb);
          accepted = nq - q > 1e-12;
          q = nq;
          break;
        }
      }
      if (!accepted) break;
    }

    // E-step and objective.
    double obj = 0.0;
    for (double ai : alpha) obj -= 0.5 * (ai - 1.0) * (ai - 1.0);
    double change = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      obj -= 0.5 * b[t] * b[t];
      const double beta = std::exp(b[t]);
      double l1 = std::log(0.5), l0 = std::log(0.5);
      for (const auto& o : items[t]) {
        const double x = alpha[o.worker] * beta;
        l1 += o.label == 1 ? log_sigmoid(x) : log_sigmoid(-x);
        l0 += o.label == 0 ? log_sigmoid(x) : log_sigmoid(-x);
      }
      const double ll = log_sum_exp({l0, l1});
      obj += ll;
      const double p1 = std::exp(l1 - ll);
      change = std::max(change, std::abs(p1 - g.post[t]));
      g.post[t] = p1;
    }
    g.trace.push_back(obj);
    g.iterations = it;
    if (change < opt.tol) {
      g.converged = true;
      break;
    }
  }
  g.alpha = alpha;
  g.beta.resize(T);
  for (std::size_t t = 0; t < T; ++t) g.beta[t] = std::exp(b[t]);
  return g;
}

}  // namespace

AggregationResult majority_vote(const ResponseMatrix& matrix, const std::vector<double>& classes) {
  const auto l = layout_of(matrix, classes);
  AggregationResult r;
  r.problems = l.problems;
  r.participants = l.participants;
  r.classes = classes;
  r.posteriors = vote_fractions(l, classes.size());
  fill_labels(r);
  r.converged = true;
  return r;
}

AggregationResult dawid_skene(const ResponseMatrix& matrix, const std::vector<double>& classes,
                              const EmOptions& opt) {
  const auto l = layout_of(matrix, classes);
  const std::size_t K = classes.size(), W = l.participants.size(), T = l.problems.size();
  AggregationResult r;
  r.problems = l.problems;
  r.participants = l.participants;
  r.classes = classes;
  auto post = vote_fractions(l, K);
  std::vector<double> prior(K);
  std::vector<std::vector<std::vector<double>>> conf(W, std::vector<std::vector<double>>(K, std::vector<double>(K)));

  for (int it = 1; it <= opt.max_iter; ++it) {
    // M-step.
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += post[t][k];
      prior[k] = (kPseudo + s) / (kPseudo * static_cast<double>(K) + static_cast<double>(T));
    }
    for (auto& c : conf)
      for (auto& row : c) std::fill(row.begin(), row.end(), kPseudo);
    for (std::size_t t = 0; t < T; ++t)
      for (const auto& o : l.by_item[t])
        for (std::size_t k = 0; k < K; ++k) conf[o.worker][k][o.label] += post[t][k];
    for (auto& c : conf)
      for (auto& row : c) {
        double s = 0.0;
        for (double x : row) s += x;
        for (double& x : row) x /= s;
      }

    // E-step and penalised log-likelihood.
    double obj = 0.0;
    for (double p : prior) obj += kPseudo * std::log(p);
    for (const auto& c : conf)
      for (const auto& row : c)
        for (double x : row) obj += kPseudo * std::log(x);
    double change = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> lu(K);
      for (std::size_t k = 0; k < K; ++k) {
        lu[k] = std::log(prior[k]);
        for (const auto& o : l.by_item[t]) lu[k] += std::log(conf[o.worker][k][o.label]);
      }
      const double ll = log_sum_exp(lu);
      obj += ll;
      for (std::size_t k = 0; k < K; ++k) {
        const double p = std::exp(lu[k] - ll);
        change = std::max(change, std::abs(p - post[t][k]));
        post[t][k] = p;
      }
    }
    r.trace.push_back(obj);
    r.iterations = it;
    if (change < opt.tol) {
      r.converged = true;
      break;
    }
  }
  r.posteriors = std::move(post);
  r.confusion = std::move(conf);
  fill_labels(r);
  return r;
}

AggregationResult glad(const ResponseMatrix& matrix, const std::vector<double>& classes, const EmOptions& opt) {
  const auto l = layout_of(matrix, classes);
  const std::size_t K = classes.size(), W = l.participants.size(), T = l.problems.size();
  AggregationResult r;
  r.problems = l.problems;
  r.participants = l.participants;
  r.classes = classes;
  r.posteriors.assign(T, std::vector<double>(K, 0.0));
  r.ability.assign(W, 0.0);
  r.difficulty.assign(T, 0.0);
  r.converged = true;

  // Two classes: one run with class 1 as positive. Otherwise one run per class.
  const std::size_t runs = K == 2 ? 1 : K;
  std::vector<BinaryGlad> fits;
  for (std::size_t k = 0; k < runs; ++k) {
    const std::size_t positive = K == 2 ? 1 : k;
    std::vector<std::vector<Obs>> items(T);
    for (std::size_t t = 0; t < T; ++t)
      for (const auto& o : l.by_item[t]) items[t].push_back({o.worker, o.label == positive ? 1u : 0u});
    fits.push_back(glad_binary(items, W, opt));
  }

  for (std::size_t t = 0; t < T; ++t) {
    if (K == 2) {
      r.posteriors[t] = {1.0 - fits[0].post[t], fits[0].post[t]};
      continue;
    }
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += fits[k].post[t];
    for (std::size_t k = 0; k < K; ++k)
      r.posteriors[t][k] = s > 0 ? fits[k].post[t] / s : 1.0 / static_cast<double>(K);
  }
  std::size_t longest = 0;
  for (const auto& f : fits) {
    longest = std::max(longest, f.trace.size());
    r.iterations = std::max(r.iterations, f.iterations);
    r.converged = r.converged && f.converged;
    for (std::size_t i = 0; i < W; ++i) r.ability[i] += f.alpha[i] / static_cast<double>(fits.size());
    for (std::size_t t = 0; t < T; ++t) r.difficulty[t] += 1.0 / f.beta[t] / static_cast<double>(fits.size());
  }
  // Sum of per-class objectives, each padded with its final value.
  r.trace.assign(longest, 0.0);
  for (const auto& f : fits)
    for (std::size_t i = 0; i < longest; ++i)
      r.trace[i] += f.trace.empty() ? 0.0 : f.trace[std::min(i, f.trace.size() - 1)];
  fill_labels(r);
  return r;
}

}  // namespace crowdsim
