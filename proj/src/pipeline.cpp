#include "crowdsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <set>

#include "crowdsim/analysis.hpp"
#include "crowdsim/decision.hpp"
#include "crowdsim/error.hpp"
#include "crowdsim/harness.hpp"
#include "crowdsim/truth_inference.hpp"

namespace crowdsim {

namespace {

enum : std::uint64_t { kTagInit = 0x696e6974, kTagSimulate = 0x73696d75, kTagPopulation = 0x706f7075 };

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

nlohmann::json read_json(const std::filesystem::path& path, const std::string& hint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' (run `" + hint + "` first)");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed '" + path.string() + "': " + e.what());
  }
}

void require(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("config is missing data.") + what);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double biased_variance(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

struct SimRecord {
  std::string participant;
  std::string problem;
  double value = 0.0;
  double expected = 0.0;
  double delta = 0.0;
};

std::vector<SimRecord> load_simulation(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' (run `simulate` first)");
  std::vector<SimRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("participant_id").get<std::string>(), j.at("problem_id").get<std::string>(),
                     j.at("value").get<double>(), j.at("expected").get<double>(), j.at("delta").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed simulation record: ") + e.what(), line_no);
    }
  }
  return out;
}

nlohmann::ordered_json risk_json(const RiskDecomposition& r) {
  return {{"l1", r.l1}, {"l2", r.l2}, {"l3", r.l3}, {"l4", r.l4}, {"l5", r.l5},
          {"total", r.total}, {"risk", r.risk}, {"gap", r.gap}};
}

}  // namespace

std::map<std::string, std::vector<double>> Dataset::encoded_profiles() const {
  std::map<std::string, std::vector<double>> out;
  for (const auto& p : profiles) out[p.participant_id] = p.encoded;
  return out;
}

Dataset load_dataset(const PipelineConfig& cfg, bool need_responses) {
  require(cfg.problems, "problems");
  Dataset d;
  d.problems = load_problems(cfg.problems, cfg.feature_dim);
  if (d.problems.empty()) throw DataError("'" + cfg.problems.string() + "' holds no problems");
  if (need_responses) {
    require(cfg.responses, "responses");
    d.responses = load_responses(cfg.responses, format_from_path(cfg.responses), d.problems);
  }
  if (!cfg.profile_spec.empty()) {
    d.spec = load_profile_spec(cfg.profile_spec);
    if (!cfg.profiles.empty()) d.profiles = load_profiles(*d.spec, cfg.profiles);
  } else if (!cfg.profiles.empty()) {
    throw ConfigError("data.profiles needs data.profile_spec");
  }
  return d;
}

std::shared_ptr<LlmBackend> make_backend(const PipelineConfig& cfg, const Problem& problem,
                                         const std::shared_ptr<ResponseCache>& cache) {
  std::shared_ptr<LlmBackend> inner;
  if (cfg.backend.kind == "stub") {
    const auto& s = problem.scale;
    if (s.discrete()) {
      inner = std::make_shared<HashStub>(s.levels().front(), s.levels().back(), cfg.backend.stub_noise, s.levels());
    } else {
      inner = std::make_shared<HashStub>(s.lo(), s.hi(), cfg.backend.stub_noise);
    }
  } else {
    HttpBackendOptions o;
    o.base_url = cfg.backend.url;
    o.model = cfg.backend.model;
    o.api_key_env = cfg.backend.api_key_env;
    inner = std::make_shared<HttpBackend>(o);
  }
  return std::make_shared<CachedBackend>(inner, cache);
}

ReferenceTable load_reference(const std::filesystem::path& path) {
  const auto j = read_json(path, "reference");
  ReferenceTable t;
  try {
    for (const auto& p : j.at("problems")) {
      ReferenceEntry e;
      e.y_ref = p.at("y_ref").get<double>();
      e.samples = p.at("samples").get<std::vector<double>>();
      e.eta = p.at("eta").get<double>();
      t[p.at("id").get<std::string>()] = std::move(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed reference table: " + std::string(e.what()));
  }
  return t;
}

nlohmann::ordered_json run_ingest(const PipelineConfig& cfg, const OutputLayout& out) {
  const Dataset d = load_dataset(cfg, !cfg.responses.empty());
  nlohmann::ordered_json j;
  j["problems"] = d.problems.size();
  j["feature_dim"] = d.problems.feature_dim();
  j["responses"] = d.responses.size();
  j["participants"] = d.responses.participants().size();
  j["profiles"] = d.profiles.size();
  std::map<std::string, std::size_t> kinds;
  for (const auto& p : d.problems.problems()) ++kinds[to_string(p.scale.kind())];
  j["scales"] = kinds;
  if (!d.profiles.empty()) {
    std::set<std::string> have;
    for (const auto& p : d.profiles) have.insert(p.participant_id);
    std::size_t missing = 0;
    for (const auto& id : d.responses.participants()) missing += have.count(id) ? 0 : 1;
    j["participants_without_profile"] = missing;
  }
  std::size_t unanswered = 0;
  for (const auto& p : d.problems.problems()) unanswered += d.responses.count(p.id) == 0 ? 1 : 0;
  j["problems_without_responses"] = unanswered;
  write_text(out.ingest(), j.dump(2) + "\n");
  return j;
}

nlohmann::ordered_json run_reference(const PipelineConfig& cfg, const OutputLayout& out) {
  const Dataset d = load_dataset(cfg, false);
  const std::filesystem::path journal =
      cfg.backend.cache_path.empty() ? out.cache() / "responses.jsonl" : std::filesystem::path(cfg.backend.cache_path);
  std::filesystem::create_directories(journal.parent_path());
  auto cache = std::make_shared<ResponseCache>(journal);

  const auto& problems = d.problems.problems();
  std::vector<ReferenceResult> results(problems.size());
  std::vector<std::size_t> live(problems.size(), 0);
  auto one = [&](std::size_t t) {
    auto backend = make_backend(cfg, problems[t], cache);
    ReferenceOptions opt = cfg.reference;
    opt.parallelism = 1;
    results[t] = generate_reference(problems[t], *backend, opt, derive_seed(cfg.seed, {t}));
    live[t] = static_cast<CachedBackend&>(*backend).live_calls();
  };
  const auto P = static_cast<std::size_t>(std::max(1, cfg.backend.parallelism));
  for (std::size_t start = 0; start < problems.size(); start += P) {
    std::vector<std::future<void>> batch;
    for (std::size_t t = start; t < std::min(problems.size(), start + P); ++t)
      batch.push_back(std::async(P == 1 ? std::launch::deferred : std::launch::async, one, t));
    for (auto& f : batch) f.get();
  }

  nlohmann::ordered_json j;
  j["strategy"] = to_string(cfg.reference.strategy);
  j["samples"] = cfg.reference.samples;
  j["temperature"] = cfg.reference.temperature;
  j["aggregator"] = to_string(cfg.reference.aggregator);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < problems.size(); ++t) {
    const auto& s = results[t].samples;
    const double eta = s.size() >= 2 ? biased_variance(s) * static_cast<double>(s.size()) / (s.size() - 1.0) : 0.0;
    rows.push_back({{"id", problems[t].id}, {"y_ref", results[t].value}, {"eta", eta}, {"samples", s}});
  }
  j["problems"] = rows;
  write_text(out.reference(), j.dump(2) + "\n");
  return {{"problems", problems.size()},
          {"live_calls", std::accumulate(live.begin(), live.end(), std::size_t{0})},
          {"cache_entries", cache->size()}};
}

nlohmann::ordered_json run_train(const PipelineConfig& cfg, const OutputLayout& out) {
  const Dataset d = load_dataset(cfg);
  if (!d.spec || d.profiles.empty()) throw ConfigError("train needs data.profile_spec and data.profiles");
  const auto ref = load_reference(out.reference());
  std::map<std::string, double> y_ref;
  for (const auto& [id, e] : ref) y_ref[id] = e.y_ref;

  TrainingSet data;
  try {
    data = make_training_set(d.problems, d.responses, d.encoded_profiles(), y_ref);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  BeliefNetDims dims = cfg.net;
  dims.feature_dim = d.problems.feature_dim();
  dims.profile_dim = d.spec->encoded_dim();
  dims.output_dim = output_dim_for(d.problems);
  const auto result = train(BeliefNet::random(dims, derive_seed(cfg.train.seed, {kTagInit})), data, cfg.train);

  nlohmann::json meta;
  meta["train"] = to_json(cfg.train);
  save_checkpoint(result.net, meta, out.checkpoint());
  save_loss_trace(result.trace, out.loss_trace());
  const auto& last = result.trace.back();
  return {{"entries", data.entries.size()},
          {"parameters", result.net.parameter_count()},
          {"epochs", cfg.train.epochs},
          {"final_l1", last.l1},
          {"final_l2", last.l2},
          {"final_total", last.total}};
}

nlohmann::ordered_json run_simulate(const PipelineConfig& cfg, const OutputLayout& out) {
  const bool twins = cfg.population == "twins";
  const Dataset d = load_dataset(cfg, twins);
  if (!d.spec) throw ConfigError("simulate needs data.profile_spec");
  const BeliefNet net = load_checkpoint(out.checkpoint());
  const auto ref = load_reference(out.reference());

  std::vector<Profile> population;
  if (twins) {
    if (d.profiles.empty()) throw ConfigError("twins population needs data.profiles");
    population = d.profiles;
  } else {
    population = sample_profiles(*d.spec, cfg.population_size, derive_seed(cfg.seed, {kTagPopulation}), "v");
  }
  if (population.front().encoded.size() != net.dims().profile_dim)
    throw DataError("profile encoding does not match the checkpoint");

  ResponseMatrix digital;
  std::string lines;
  const auto& problems = d.problems.problems();
  for (std::size_t t = 0; t < problems.size(); ++t) {
    const auto& problem = problems[t];
    const auto it = ref.find(problem.id);
    if (it == ref.end()) throw DataError("no reference decision for problem '" + problem.id + "'");
    for (std::size_t i = 0; i < population.size(); ++i) {
      const auto& who = population[i];
      if (twins && !d.responses.participates(who.participant_id, problem.id)) continue;
      const auto dec = personalized_decision(net, problem, who.encoded, it->second.y_ref, cfg.blender,
                                             derive_seed(cfg.seed, {kTagSimulate, t, i}));
      const double delta = problem.scale.kind() == ScaleKind::choice ? 0.0 : dec.expected - it->second.y_ref;
      digital.add_unchecked({who.participant_id, problem.id, dec.value});
      nlohmann::ordered_json rec{{"participant_id", who.participant_id}, {"problem_id", problem.id},
                                 {"value", dec.value},           {"expected", dec.expected},
                                 {"delta", delta}};
      lines += rec.dump() + "\n";
    }
  }
  if (digital.empty()) throw DataError("no digital decisions were produced");
  std::filesystem::create_directories(out.reports());
  save_responses(digital, out.digital());
  write_text(out.simulation(), lines);
  return {{"population", twins ? "twins" : "sampled"},
          {"participants", population.size()},
          {"decisions", digital.size()}};
}

std::map<std::string, std::map<std::string, double>> aggregate_all(const ResponseMatrix& matrix,
                                                                   const ProblemSet& problems,
                                                                   const DecisionConfig& decision) {
  std::map<std::string, std::map<std::string, double>> out;
  std::map<std::vector<double>, std::vector<std::string>> groups;
  for (const auto& pid : matrix.problems()) {
    const auto values = matrix.values_for_problem(pid);
    auto& row = out[pid];
    row["mean"] = aggregate(values, AggregateMethod::mean);
    row["median"] = aggregate(values, AggregateMethod::median);
    row["majority"] = aggregate(values, AggregateMethod::majority);
    const auto& scale = problems.at(pid).scale;
    if (scale.discrete()) groups[scale.levels()].push_back(pid);
  }
  const EmOptions em{decision.max_iter, decision.tol};
  for (const auto& [levels, ids] : groups) {
    const std::set<std::string> wanted(ids.begin(), ids.end());
    ResponseMatrix sub;
    for (const auto& r : matrix.responses())
      if (wanted.count(r.problem_id)) sub.add_unchecked(r);
    std::vector<double> classes = levels;
    for (const auto& r : sub.responses())
      if (std::none_of(classes.begin(), classes.end(), [&](double c) { return std::abs(c - r.value) <= 1e-9; }))
        classes.push_back(r.value);  // off-level values only arise from foreign inputs
    std::sort(classes.begin(), classes.end());
    const auto ds = dawid_skene(sub, classes, em);
    const auto gl = glad(sub, classes, em);
    for (std::size_t t = 0; t < ds.problems.size(); ++t) out[ds.problems[t]]["ds"] = ds.labels[t];
    for (std::size_t t = 0; t < gl.problems.size(); ++t) out[gl.problems[t]]["glad"] = gl.labels[t];
  }
  return out;
}

nlohmann::ordered_json run_aggregate(const PipelineConfig& cfg, const OutputLayout& out) {
  const Dataset d = load_dataset(cfg, !cfg.responses.empty());
  const auto digital = load_responses(out.digital(), ResponseFormat::csv, d.problems);
  const auto dig = aggregate_all(digital, d.problems, cfg.decision);
  nlohmann::ordered_json j;
  j["method"] = cfg.decision.method;
  nlohmann::ordered_json jd = nlohmann::ordered_json::object();
  for (const auto& [pid, row] : dig) jd[pid] = row;
  j["digital"] = jd;
  nlohmann::ordered_json jh = nlohmann::ordered_json::object();
  if (!d.responses.empty())
    for (const auto& [pid, row] : aggregate_all(d.responses, d.problems, cfg.decision)) jh[pid] = row;
  j["human"] = jh;
  nlohmann::ordered_json decisions = nlohmann::ordered_json::object();
  for (const auto& [pid, row] : dig) {
    const auto it = row.find(cfg.decision.method);
    decisions[pid] = it != row.end() ? it->second : row.at("mean");
  }
  j["decisions"] = decisions;
  write_text(out.aggregate(), j.dump(2) + "\n");
  return {{"method", cfg.decision.method}, {"problems", dig.size()}};
}

nlohmann::ordered_json run_evaluate(const PipelineConfig& cfg, const OutputLayout& out) {
  RunReport report;
  report.seed = cfg.seed;
  report.config = cfg.raw;

  const bool fixtures = cfg.evaluate_predicted.has_value() || cfg.evaluate_reference.has_value();
  if (fixtures && !(cfg.evaluate_predicted && cfg.evaluate_reference))
    throw ConfigError("evaluate.predicted and evaluate.reference go together");

  const Dataset d = load_dataset(cfg, !fixtures);
  ResponseMatrix predicted, reference;
  std::vector<SimRecord> sim;
  ReferenceTable refs;
  if (fixtures) {
    predicted = load_responses(*cfg.evaluate_predicted, format_from_path(*cfg.evaluate_predicted), d.problems);
    reference = load_responses(*cfg.evaluate_reference, format_from_path(*cfg.evaluate_reference), d.problems);
    if (std::filesystem::exists(out.reference())) refs = load_reference(out.reference());
  } else {
    predicted = load_responses(out.digital(), ResponseFormat::csv, d.problems);
    reference = d.responses;
    sim = load_simulation(out.simulation());
    refs = load_reference(out.reference());
  }

  const auto pred_agg = aggregate_all(predicted, d.problems, cfg.decision);
  const auto ref_agg = aggregate_all(reference, d.problems, cfg.decision);

  std::map<std::string, std::map<std::string, const SimRecord*>> by_problem;
  for (const auto& r : sim) by_problem[r.problem][r.participant] = &r;

  // kappa from |y_ref - ybar| over the problems both sides answered
  std::vector<double> abs_dev;
  for (const auto& p : d.problems.problems()) {
    const auto it = refs.find(p.id);
    if (it == refs.end() || !ref_agg.count(p.id) || p.scale.kind() == ScaleKind::choice) continue;
    abs_dev.push_back(std::abs(it->second.y_ref - ref_agg.at(p.id).at("mean")));
  }
  std::optional<double> kappa = cfg.analysis.kappa;
  if (!kappa && !abs_dev.empty()) kappa = estimate_kappa(abs_dev, cfg.analysis.alpha);

  std::vector<RiskDecomposition> risks;
  std::vector<PureLlmRisk> pure;
  std::size_t t3_checked = 0, t3_inside = 0, t5_checked = 0, t5_covered = 0;
  std::map<std::string, std::pair<std::vector<ProblemOutcome>, std::vector<ProblemOutcome>>> outcomes;

  for (const auto& p : d.problems.problems()) {
    if (!pred_agg.count(p.id) || !ref_agg.count(p.id)) continue;
    ProblemReport pr;
    pr.id = p.id;
    const auto rit = refs.find(p.id);
    pr.y_ref = rit != refs.end() ? rit->second.y_ref : 0.0;
    pr.human = reference.values_for_problem(p.id);
    pr.digital = predicted.values_for_problem(p.id);
    pr.aggregated = pred_agg.at(p.id);
    pr.human_aggregated = ref_agg.at(p.id);
    for (const auto& [name, v] : pr.aggregated) {
      const auto h = pr.human_aggregated.find(name);
      if (h == pr.human_aggregated.end()) continue;
      outcomes[name].first.push_back({p.id, v, pr.digital});
      outcomes[name].second.push_back({p.id, h->second, pr.human});
    }

    const bool numeric = p.scale.kind() != ScaleKind::choice;
    if (!fixtures && numeric && rit != refs.end()) {
      const double eta = rit->second.eta;
      const std::vector<double> noise(pr.human.size(), cfg.analysis.human_noise);
      const auto pl = pure_llm_risk(pr.human, {}, noise, pr.y_ref, eta);
      pure.push_back(pl);
      pr.diagnostics["pure_llm"] = {{"l1", pl.l1}, {"l2", pl.l2}, {"deviation", pl.deviation},
                                    {"eta", pl.eta}, {"total", pl.total}};

      // digital beliefs for this problem, and twin pairs when the population mirrors the humans
      const auto& recs = by_problem[p.id];
      std::vector<double> deltas, twin_h, twin_d, twin_e, twin_delta;
      for (const auto& [pid, rec] : recs) deltas.push_back(rec->delta);
      for (const auto& e : reference.for_problem(p.id)) {
        const auto& who = reference.participants()[e.participant];
        const auto tw = recs.find(who);
        if (tw == recs.end()) continue;
        twin_h.push_back(e.value);
        twin_d.push_back(tw->second->value);
        twin_e.push_back(tw->second->expected);
        twin_delta.push_back(tw->second->delta);
      }
      const double ybar = mean_of(pr.human);

      if (twin_h.size() == pr.human.size() && !twin_h.empty()) {
        TwinPopulation pop;
        pop.human = twin_h;
        pop.human_noise.assign(twin_h.size(), cfg.analysis.human_noise);
        pop.digital = twin_d;
        pop.digital_mean = twin_e;
        const auto rd = risk_decomposition(pop);
        risks.push_back(rd);
        pr.diagnostics["risk"] = risk_json(rd);
      }

      if (kappa && deltas.size() >= 2) {
        const auto ti = tolerance_interval(static_cast<int>(deltas.size()), *kappa, biased_variance(deltas), eta,
                                          ybar - pr.y_ref);
        const double mu = mean_of(deltas);
        ++t3_checked;
        t3_inside += ti.contains(mu) ? 1 : 0;
        pr.diagnostics["tolerance_interval"] = {{"delta", ti.delta},     {"half_width", ti.half_width},
                                                {"delta0", ti.delta0},   {"branch", ti.branch == IntervalBranch::h1 ? "h1" : "h2"},
                                                {"lo", ti.lo},           {"hi", ti.hi},
                                                {"mean_belief", mu},     {"contains", ti.contains(mu)}};
      }

      if (twin_h.size() >= 2 && deltas.size() >= 2) {
        std::vector<double> resid(twin_h.size());
        double ss = 0.0;
        for (std::size_t i = 0; i < twin_h.size(); ++i) {
          resid[i] = twin_h[i] - twin_d[i];
          ss += resid[i] * resid[i];
        }
        const double eps0 = cfg.analysis.eps0.value_or(std::sqrt(ss / static_cast<double>(resid.size())));
        std::vector<double> dig_all;
        for (const auto& [pid, rec] : recs) dig_all.push_back(rec->value);
        const auto ci = crowd_confidence_interval(dig_all, deltas, resid, eta, cfg.analysis.alpha, eps0);
        ++t5_checked;
        t5_covered += ci.contains(ybar) ? 1 : 0;
        pr.diagnostics["confidence_interval"] = {{"center", ci.center}, {"half_width", ci.half_width},
                                                 {"z", ci.z},           {"eps0", eps0},
                                                 {"lo", ci.lo},         {"hi", ci.hi},
                                                 {"covers_human_mean", ci.contains(ybar)}};
      }
    }
    report.problems.push_back(std::move(pr));
  }
  if (report.problems.empty()) throw DataError("predicted and reference decisions share no problem");

  for (const auto& [name, pair] : outcomes) report.metrics[name] = metrics(pair.first, pair.second);
  if (!risks.empty()) report.diagnostics["risk"] = risk_json(average(risks));
  if (!pure.empty()) {
    PureLlmRisk m;
    for (const auto& p : pure) {
      m.l1 += p.l1;
      m.l2 += p.l2;
      m.deviation += p.deviation;
      m.eta += p.eta;
      m.total += p.total;
    }
    const double n = static_cast<double>(pure.size());
    report.diagnostics["pure_llm"] = {{"l1", m.l1 / n}, {"l2", m.l2 / n}, {"deviation", m.deviation / n},
                                      {"eta", m.eta / n}, {"total", m.total / n}};
  }
  if (kappa) report.diagnostics["kappa"] = *kappa;
  report.diagnostics["tolerance_interval"] = {{"problems", t3_checked}, {"inside", t3_inside}};
  report.diagnostics["confidence_interval"] = {{"problems", t5_checked}, {"covered", t5_covered}};
  std::vector<double> errs;
  for (const auto& pr : report.problems) {
    const auto it = pr.aggregated.find(cfg.decision.method);
    const auto h = pr.human_aggregated.find(cfg.decision.method);
    if (it != pr.aggregated.end() && h != pr.human_aggregated.end()) errs.push_back(std::abs(it->second - h->second));
  }
  if (!errs.empty()) report.diagnostics["resolution_rate"] = resolution_rate(errs, cfg.analysis.resolution_threshold);

  save_report(report, out.report());
  nlohmann::ordered_json summary;
  summary["problems"] = report.problems.size();
  for (const auto& [name, m] : report.metrics) summary["mae_" + name] = m.mae;
  return summary;
}

nlohmann::ordered_json run_report(const PipelineConfig&, const OutputLayout& out) {
  const RunReport r = load_report(out.report());
  std::string table = "method,mae,rmse,cosine,avg_wd,problems\n";
  for (const auto& [name, m] : r.metrics)
    table += name + ',' + format_number(m.mae) + ',' + format_number(m.rmse) + ',' + format_number(m.cosine) + ',' +
             format_number(m.avg_wd) + ',' + std::to_string(m.problems) + '\n';
  write_text(out.metrics_table(), table);

  std::string risk = "problem,l1,l2,l3,l4,l5,total,risk,gap\n";
  std::size_t risk_rows = 0;
  for (const auto& p : r.problems) {
    if (!p.diagnostics.contains("risk")) continue;
    const auto& j = p.diagnostics.at("risk");
    risk += p.id;
    for (const char* k : {"l1", "l2", "l3", "l4", "l5", "total", "risk", "gap"})
      risk += ',' + format_number(j.at(k).get<double>());
    risk += '\n';
    ++risk_rows;
  }
  write_text(out.risk_table(), risk);

  std::string plot = "x,series,y\n";
  for (std::size_t t = 0; t < r.problems.size(); ++t) {
    const auto& p = r.problems[t];
    const std::string x = std::to_string(t + 1);
    plot += x + ",y_ref," + format_number(p.y_ref) + '\n';
    for (const auto& [name, v] : p.human_aggregated) plot += x + ",human_" + name + ',' + format_number(v) + '\n';
    for (const auto& [name, v] : p.aggregated) plot += x + ",digital_" + name + ',' + format_number(v) + '\n';
  }
  write_text(out.plot_data(), plot);
  return {{"methods", r.metrics.size()}, {"problems", r.problems.size()}, {"risk_rows", risk_rows}};
}

nlohmann::ordered_json run_sweep_step(const PipelineConfig& cfg, const OutputLayout& out) {
  const auto result = run_sweep(cfg.sweep);
  save_sweep(result, out.sweeps() / "sweep.json", out.sweeps() / "sweep.csv", out.sweeps() / "resolution_curve.csv");
  const auto f = analyse_sweep(result);
  std::size_t failed = 0;
  for (const auto& c : result.cells) failed += c.failed ? 1 : 0;
  nlohmann::ordered_json j;
  j["cells"] = result.cells.size();
  j["failed_cells"] = failed;
  j["zero_diversity_best"] = f.zero_diversity_best;
  j["workers_trend_nonnegative"] = f.workers_trend_nonnegative;
  j["error_monotone"] = f.error_monotone;
  nlohmann::ordered_json rho = nlohmann::ordered_json::object();
  for (const auto& [e, r] : f.worker_spearman) rho[format_number(e)] = r;
  j["worker_spearman"] = rho;
  return j;
}

}  // namespace crowdsim
