#include "crowdsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>

#include "crowdsim/analysis.hpp"
#include "crowdsim/backend.hpp"
#include "crowdsim/config.hpp"
#include "crowdsim/decision.hpp"
#include "crowdsim/error.hpp"

namespace crowdsim {

ProfileSpec demo_profile_spec() {
  return ProfileSpec({{"Gender", CategoricalField{{"F", "M"}, {0.5, 0.5}, {}}, std::nullopt},
                      {"Age", UniformField{18.0, 80.0}, std::nullopt}});
}

namespace {

std::string problem_id(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%03zu", k + 1);
  return buf;
}

enum : std::uint64_t {
  kTagFeatures = 0x66656174,
  kTagTeacher = 0x74656163,
  kTagSplit = 0x73706c69,
  kTagWorkers = 0x776f726b,
  kTagOffset = 0x6f666673,
  kTagTasks = 0x7461736b,
  kTagStudent = 0x73747564,
  kTagTrain = 0x74726169,
  kTagVirtual = 0x76697274,
  kTagDecide = 0x64656369,
};

}  // namespace

SyntheticWorld synth_world(const WorldSpec& spec, std::uint64_t seed) {
  if (spec.n_problems == 0 || spec.feature_dim == 0) throw ConfigError("world needs problems and features");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) throw ConfigError("train_fraction must be in (0, 1]");
  if (spec.response_error < 0.0 || spec.belief_diversity < 0.0) throw ConfigError("noise scales must be >= 0");

  SyntheticWorld w;
  HashStub stub(spec.ref_lo, spec.ref_hi, 0.0);
  ReferenceOptions ref_opt;
  ref_opt.samples = 1;

  BeliefNetDims td = spec.teacher;
  td.feature_dim = spec.feature_dim;
  td.profile_dim = spec.profile_spec.encoded_dim();
  td.output_dim = 1;
  BeliefNet teacher = BeliefNet::random(td, derive_seed(spec.model_seed, {kTagTeacher}));
  teacher.wz.setZero();
  teacher.readout *= spec.effect_scale;
  const std::vector<double> neutral(td.profile_dim, 0.0);

  Rng feat(derive_seed(spec.model_seed, {kTagFeatures}));
  for (std::size_t k = 0; k < spec.n_problems; ++k) {
    Problem p;
    p.id = problem_id(k);
    p.description = "Synthetic problem " + std::to_string(k + 1) + ".";
    p.requirements = "Give one number.";
    p.context = "Simulation study.";
    p.scale = DecisionScale::continuous(spec.scale_lo, spec.scale_hi);
    p.features.resize(spec.feature_dim);
    for (auto& f : p.features) f = feat.normal();
    const double y_ref = generate_reference(p, stub, ref_opt, spec.model_seed).value;
    const double effect = teacher.effect(teacher.encode(p.features, neutral).mean)[0];
    w.y_ref[p.id] = y_ref;
    w.truth[p.id] = y_ref + effect;
    w.problems.add(std::move(p));
  }

  std::vector<std::size_t> order(spec.n_problems);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split(derive_seed(seed, {kTagSplit}));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split.below(i)]);
  auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(spec.n_problems)));
  n_train = std::clamp<std::size_t>(n_train, 1, spec.n_problems);
  if (spec.train_fraction < 1.0 && n_train == spec.n_problems) --n_train;
  if (n_train == 0) throw ConfigError("no training problems left");
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(train.begin(), train.end());
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(test.begin(), test.end());
  for (auto t : train) w.train_ids.push_back(problem_id(t));
  for (auto t : test) w.test_ids.push_back(problem_id(t));
  if (spec.tasks_per_worker > n_train) throw ConfigError("tasks_per_worker exceeds the number of training problems");

  w.workers = sample_profiles(spec.profile_spec, spec.n_workers, derive_seed(seed, {kTagWorkers}), "w");
  for (std::size_t i = 0; i < w.workers.size(); ++i) {
    const auto& id = w.workers[i].participant_id;
    Rng rng(derive_seed(seed, {kTagOffset, i}));
    const double offset = spec.belief_diversity * rng.normal();
    w.offsets[id] = offset;
    Rng tasks(derive_seed(seed, {kTagTasks, i}));
    std::vector<std::size_t> pool = train;
    for (std::size_t k = 0; k < spec.tasks_per_worker; ++k) {
      std::swap(pool[k], pool[k + tasks.below(pool.size() - k)]);
      const auto& problem = w.problems.problems()[pool[k]];
      const double y = w.truth[problem.id] + offset + spec.response_error * rng.normal();
      w.responses.add({id, problem.id, problem.scale.project(y)}, problem.scale);
    }
  }
  return w;
}

void SimConfig::validate() const {
  if (n_workers.empty() || tasks_per_worker.empty() || response_error.empty() || belief_diversity.empty())
    throw ConfigError("every sweep grid needs at least one value");
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (test_virtual_workers < 1) throw ConfigError("test_virtual_workers must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  train.validate();
}

RepetitionOutcome run_repetition(const SimConfig& cfg, const WorldSpec& design, std::uint64_t seed) {
  const SyntheticWorld w = synth_world(design, seed);

  std::map<std::string, std::vector<double>> profiles;
  for (const auto& p : w.workers) profiles[p.participant_id] = p.encoded;
  const TrainingSet data = make_training_set(w.problems, w.responses, profiles, w.y_ref);

  BeliefNetDims dims = cfg.student;
  dims.feature_dim = design.feature_dim;
  dims.profile_dim = design.profile_spec.encoded_dim();
  dims.output_dim = 1;
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, {kTagTrain});
  const BeliefNet net = train(BeliefNet::random(dims, derive_seed(seed, {kTagStudent})), data, tc).net;

  const auto virt = sample_profiles(design.profile_spec, cfg.test_virtual_workers, derive_seed(seed, {kTagVirtual}), "t");
  const std::size_t K = virt.size();
  std::vector<std::vector<double>> err(K);  // err[k][problem]
  for (std::size_t t = 0; t < w.test_ids.size(); ++t) {
    const auto& problem = w.problems.at(w.test_ids[t]);
    const double y_ref = w.y_ref.at(problem.id), truth = w.truth.at(problem.id);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      sum += personalized_decision(net, problem, virt[k].encoded, y_ref, tc.blender,
                                   derive_seed(seed, {kTagDecide, t, k}))
                 .value;
      err[k].push_back(std::abs(sum / static_cast<double>(k + 1) - truth));
    }
  }
  RepetitionOutcome out;
  out.mae = std::accumulate(err[K - 1].begin(), err[K - 1].end(), 0.0) / static_cast<double>(err[K - 1].size());
  for (std::size_t k = 0; k < K; ++k) out.resolution_curve.push_back(resolution_rate(err[k], cfg.resolution_threshold));
  return out;
}

SweepResult run_sweep(const SimConfig& cfg) {
  cfg.validate();
  SweepResult result;
  result.config = to_json(cfg);
  for (auto nw : cfg.n_workers)
    for (auto tp : cfg.tasks_per_worker)
      for (auto re : cfg.response_error)
        for (auto bd : cfg.belief_diversity) {
          SweepCell c;
          c.n_workers = nw;
          c.tasks_per_worker = tp;
          c.response_error = re;
          c.belief_diversity = bd;
          result.cells.push_back(c);
        }

  struct Job {
    std::size_t cell;
    int rep;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < result.cells.size(); ++c)
    for (int r = 0; r < cfg.repetitions; ++r)
      jobs.push_back({c, r, derive_seed(cfg.seed, {c, static_cast<std::uint64_t>(r)})});

  struct Slot {
    bool ok = false;
    RepetitionOutcome outcome;
    std::string failure;
  };
  std::vector<Slot> slots(jobs.size());
  auto run = [&](std::size_t j) {
    const auto& job = jobs[j];
    const auto& cell = result.cells[job.cell];
    WorldSpec design = cfg.world;
    design.n_workers = cell.n_workers;
    design.tasks_per_worker = cell.tasks_per_worker;
    design.response_error = cell.response_error;
    design.belief_diversity = cell.belief_diversity;
    design.train_fraction = 1.0 - cfg.test_fraction;
    try {
      slots[j].outcome = run_repetition(cfg, design, job.seed);
      slots[j].ok = true;
    } catch (const DivergenceError& e) {
      slots[j].failure = "repetition " + std::to_string(job.rep) + ": " + e.what();
    }
  };
  const auto P = static_cast<std::size_t>(cfg.parallelism);
  for (std::size_t start = 0; start < jobs.size(); start += P) {
    std::vector<std::future<void>> batch;
    for (std::size_t j = start; j < std::min(jobs.size(), start + P); ++j)
      batch.push_back(std::async(P == 1 ? std::launch::deferred : std::launch::async, run, j));
    for (auto& f : batch) f.get();
  }

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    auto& cell = result.cells[jobs[j].cell];
    cell.seeds.push_back(jobs[j].seed);
    if (!slots[j].ok) {
      cell.failures.push_back(slots[j].failure);
      continue;
    }
    cell.mae.push_back(slots[j].outcome.mae);
    const auto& curve = slots[j].outcome.resolution_curve;
    if (cell.resolution_curve.empty()) cell.resolution_curve.assign(curve.size(), 0.0);
    for (std::size_t k = 0; k < curve.size(); ++k) cell.resolution_curve[k] += curve[k];
  }
  for (auto& cell : result.cells) {
    if (cell.mae.empty()) {
      cell.failed = true;
      continue;
    }
    const double n = static_cast<double>(cell.mae.size());
    for (auto& v : cell.resolution_curve) v /= n;
    cell.mae_mean = std::accumulate(cell.mae.begin(), cell.mae.end(), 0.0) / n;
    double ss = 0.0;
    for (double m : cell.mae) ss += (m - cell.mae_mean) * (m - cell.mae_mean);
    cell.mae_std = cell.mae.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return result;
}

nlohmann::ordered_json to_json(const SimConfig& cfg) {
  nlohmann::ordered_json j;
  j["n_workers"] = cfg.n_workers;
  j["tasks_per_worker"] = cfg.tasks_per_worker;
  j["response_error"] = cfg.response_error;
  j["belief_diversity"] = cfg.belief_diversity;
  j["repetitions"] = cfg.repetitions;
  j["test_virtual_workers"] = cfg.test_virtual_workers;
  j["test_fraction"] = cfg.test_fraction;
  j["resolution_threshold"] = cfg.resolution_threshold;
  j["seed"] = cfg.seed;
  j["parallelism"] = cfg.parallelism;
  nlohmann::ordered_json w;
  w["model_seed"] = cfg.world.model_seed;
  w["n_problems"] = cfg.world.n_problems;
  w["feature_dim"] = cfg.world.feature_dim;
  w["effect_scale"] = cfg.world.effect_scale;
  w["ref_lo"] = cfg.world.ref_lo;
  w["ref_hi"] = cfg.world.ref_hi;
  w["scale_lo"] = cfg.world.scale_lo;
  w["scale_hi"] = cfg.world.scale_hi;
  w["teacher"] = {{"embedding", cfg.world.teacher.embedding},
                  {"hidden", cfg.world.teacher.hidden},
                  {"belief_dim", cfg.world.teacher.belief_dim}};
  w["profile_spec"] = to_json(cfg.world.profile_spec);
  j["world"] = w;
  j["student"] = {{"embedding", cfg.student.embedding},
                  {"hidden", cfg.student.hidden},
                  {"belief_dim", cfg.student.belief_dim}};
  j["train"] = to_json(cfg.train);
  return j;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  try {
    c.n_workers = j.value("n_workers", c.n_workers);
    c.tasks_per_worker = j.value("tasks_per_worker", c.tasks_per_worker);
    c.response_error = j.value("response_error", c.response_error);
    c.belief_diversity = j.value("belief_diversity", c.belief_diversity);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.test_virtual_workers = j.value("test_virtual_workers", c.test_virtual_workers);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.resolution_threshold = j.value("resolution_threshold", c.resolution_threshold);
    c.seed = j.value("seed", c.seed);
    c.parallelism = j.value("parallelism", c.parallelism);
    if (j.contains("world")) {
      const auto& w = j.at("world");
      c.world.model_seed = w.value("model_seed", c.world.model_seed);
      c.world.n_problems = w.value("n_problems", c.world.n_problems);
      c.world.feature_dim = w.value("feature_dim", c.world.feature_dim);
      c.world.effect_scale = w.value("effect_scale", c.world.effect_scale);
      c.world.ref_lo = w.value("ref_lo", c.world.ref_lo);
      c.world.ref_hi = w.value("ref_hi", c.world.ref_hi);
      c.world.scale_lo = w.value("scale_lo", c.world.scale_lo);
      c.world.scale_hi = w.value("scale_hi", c.world.scale_hi);
      if (w.contains("teacher")) c.world.teacher = net_shape_from_json(w.at("teacher"), c.world.teacher);
      if (w.contains("profile_spec")) c.world.profile_spec = profile_spec_from_json(w.at("profile_spec"));
    }
    if (j.contains("student")) c.student = net_shape_from_json(j.at("student"), c.student);
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const SweepResult& result) {
  nlohmann::ordered_json j;
  j["config"] = result.config;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : result.cells) {
    nlohmann::ordered_json jc;
    jc["n_workers"] = c.n_workers;
    jc["tasks_per_worker"] = c.tasks_per_worker;
    jc["response_error"] = c.response_error;
    jc["belief_diversity"] = c.belief_diversity;
    jc["mae_mean"] = c.mae_mean;
    jc["mae_std"] = c.mae_std;
    jc["failed"] = c.failed;
    jc["mae"] = c.mae;
    jc["resolution_curve"] = c.resolution_curve;
    jc["seeds"] = c.seeds;
    jc["failures"] = c.failures;
    cells.push_back(jc);
  }
  j["cells"] = cells;
  return j;
}

void save_sweep(const SweepResult& result, const std::filesystem::path& json_path,
                const std::filesystem::path& csv_path, const std::filesystem::path& curve_csv_path) {
  for (const auto& p : {json_path, csv_path, curve_csv_path})
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + json_path.string() + "'");
    out << to_json(result).dump(2) << '\n';
  }
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + csv_path.string() + "'");
    out << "n_workers,tasks_per_worker,response_error,belief_diversity,mae_mean,mae_std,resolution_rate,repetitions_ok,failed\n";
    for (const auto& c : result.cells) {
      out << c.n_workers << ',' << c.tasks_per_worker << ',' << format_number(c.response_error) << ','
          << format_number(c.belief_diversity) << ',' << format_number(c.mae_mean) << ',' << format_number(c.mae_std)
          << ',' << (c.resolution_curve.empty() ? "" : format_number(c.resolution_curve.back())) << ','
          << c.mae.size() << ',' << (c.failed ? 1 : 0) << '\n';
    }
  }
  std::ofstream out(curve_csv_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + curve_csv_path.string() + "'");
  out << "x,series,y\n";
  for (const auto& c : result.cells) {
    const std::string series = "w" + std::to_string(c.n_workers) + "_t" + std::to_string(c.tasks_per_worker) + "_e" +
                               format_number(c.response_error) + "_d" + format_number(c.belief_diversity);
    for (std::size_t k = 0; k < c.resolution_curve.size(); ++k)
      out << (k + 1) << ',' << series << ',' << format_number(c.resolution_curve[k]) << '\n';
  }
}

SweepFindings analyse_sweep(const SweepResult& result) {
  SweepFindings f;
  std::map<double, std::vector<double>> by_div, by_err;
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> trend;
  for (const auto& c : result.cells) {
    if (c.failed) continue;
    by_err[c.response_error].push_back(c.mae_mean);
    if (c.response_error == 0.0) by_div[c.belief_diversity].push_back(c.mae_mean);
    if (c.belief_diversity == 0.0 && c.response_error > 0.0) {
      trend[c.response_error].first.push_back(static_cast<double>(c.n_workers));
      trend[c.response_error].second.push_back(c.mae_mean);
    }
  }
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  for (const auto& [d, v] : by_div) f.mae_by_diversity_at_zero_error[d] = mean(v);
  for (const auto& [e, v] : by_err) f.mae_by_error[e] = mean(v);
  for (const auto& [e, xy] : trend)
    if (xy.first.size() >= 2) f.worker_spearman[e] = spearman(xy.first, xy.second);

  if (f.mae_by_diversity_at_zero_error.count(0.0) && f.mae_by_diversity_at_zero_error.size() > 1) {
    const double zero = f.mae_by_diversity_at_zero_error.at(0.0);
    f.zero_diversity_best = std::all_of(f.mae_by_diversity_at_zero_error.begin(), f.mae_by_diversity_at_zero_error.end(),
                                        [&](const auto& kv) { return kv.first == 0.0 || zero <= kv.second; });
  }
  f.workers_trend_nonnegative = !f.worker_spearman.empty() &&
                                std::all_of(f.worker_spearman.begin(), f.worker_spearman.end(),
                                            [](const auto& kv) { return kv.second >= 0.0; });
  f.error_monotone = f.mae_by_error.size() > 1;
  double prev = -1.0;
  for (const auto& [e, m] : f.mae_by_error) {
    if (m < prev) f.error_monotone = false;
    prev = m;
  }
  return f;
}

}  // namespace crowdsim
