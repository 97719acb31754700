#include "crowdsim/config.hpp"

#include <fstream>

#include "crowdsim/error.hpp"

namespace crowdsim {

namespace {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  std::filesystem::path p = j.at(key).get<std::string>();
  return p.is_absolute() || base.empty() ? p : base / p;
}

void require_object(const nlohmann::json& j, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be an object");
}

}  // namespace

BlenderConfig blender_from_json(const nlohmann::json& j, BlenderConfig base) {
  require_object(j, "blender");
  read(j, "sigma", base.sigma);
  read(j, "J", base.samples);
  read(j, "samples", base.samples);
  if (j.contains("family")) base.family = noise_family_from_string(j.at("family").get<std::string>());
  base.validate();
  return base;
}

nlohmann::ordered_json to_json(const BlenderConfig& cfg) {
  nlohmann::ordered_json j;
  j["family"] = to_string(cfg.family);
  j["sigma"] = cfg.sigma;
  j["J"] = cfg.samples;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
  require_object(j, "train");
  read(j, "lambda", base.lambda);
  read(j, "learning_rate", base.learning_rate);
  read(j, "beta1", base.beta1);
  read(j, "beta2", base.beta2);
  read(j, "epsilon", base.adam_epsilon);
  read(j, "epochs", base.epochs);
  read(j, "batch_size", base.batch_size);
  read(j, "seed", base.seed);
  read(j, "J", base.blender.samples);
  read(j, "sigma", base.blender.sigma);
  if (j.contains("family")) base.blender.family = noise_family_from_string(j.at("family").get<std::string>());
  base.validate();
  return base;
}

nlohmann::ordered_json to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["lambda"] = cfg.lambda;
  j["learning_rate"] = cfg.learning_rate;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["epsilon"] = cfg.adam_epsilon;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["J"] = cfg.blender.samples;
  j["sigma"] = cfg.blender.sigma;
  j["family"] = to_string(cfg.blender.family);
  j["seed"] = cfg.seed;
  return j;
}

BeliefNetDims net_shape_from_json(const nlohmann::json& j, BeliefNetDims base) {
  require_object(j, "network shape");
  read(j, "embedding", base.embedding);
  read(j, "hidden", base.hidden);
  read(j, "belief_dim", base.belief_dim);
  if (base.embedding == 0 || base.hidden == 0 || base.belief_dim == 0)
    throw ConfigError("network sizes must be positive");
  return base;
}

PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  require_object(j, "config");
  PipelineConfig c;
  c.base_dir = base_dir;
  c.raw = j;
  try {
    read(j, "seed", c.seed);
    if (j.contains("data")) {
      const auto& d = j.at("data");
      require_object(d, "data");
      c.problems = resolve(base_dir, d, "problems");
      c.responses = resolve(base_dir, d, "responses");
      c.profiles = resolve(base_dir, d, "profiles");
      c.profile_spec = resolve(base_dir, d, "profile_spec");
      read(d, "feature_dim", c.feature_dim);
      if (c.feature_dim == 0) throw ConfigError("data.feature_dim must be positive");
    }
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      require_object(b, "backend");
      read(b, "kind", c.backend.kind);
      read(b, "url", c.backend.url);
      read(b, "model", c.backend.model);
      read(b, "api_key_env", c.backend.api_key_env);
      read(b, "parallelism", c.backend.parallelism);
      if (b.contains("cache")) c.backend.cache_path = resolve(base_dir, b, "cache").string();
      read(b, "stub_noise", c.backend.stub_noise);
      if (c.backend.kind != "stub" && c.backend.kind != "http")
        throw ConfigError("backend.kind must be 'stub' or 'http'");
      if (c.backend.kind == "http" && c.backend.url.empty()) throw ConfigError("backend.url is required for http");
      if (c.backend.parallelism < 1) throw ConfigError("backend.parallelism must be >= 1");
      if (!(c.backend.stub_noise >= 0.0)) throw ConfigError("backend.stub_noise must be >= 0");
    }
    if (j.contains("reference")) {
      const auto& r = j.at("reference");
      require_object(r, "reference");
      if (r.contains("strategy"))
        c.reference = ReferenceOptions::for_strategy(strategy_from_string(r.at("strategy").get<std::string>()));
      read(r, "samples", c.reference.samples);
      read(r, "temperature", c.reference.temperature);
      read(r, "parse_retries", c.reference.parse_retries);
      if (r.contains("aggregator"))
        c.reference.aggregator = aggregate_method_from_string(r.at("aggregator").get<std::string>());
      if (c.reference.samples < 1) throw ConfigError("reference.samples must be >= 1");
      if (c.reference.temperature < 0.0) throw ConfigError("reference.temperature must be >= 0");
      if (c.reference.parse_retries < 0) throw ConfigError("reference.parse_retries must be >= 0");
    }
    c.reference.parallelism = c.backend.parallelism;
    if (j.contains("beliefnet")) c.net = net_shape_from_json(j.at("beliefnet"), c.net);
    c.train.seed = c.seed;
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    c.blender = c.train.blender;
    if (j.contains("blender")) c.blender = blender_from_json(j.at("blender"), c.blender);
    if (j.contains("population")) {
      const auto& p = j.at("population");
      require_object(p, "population");
      read(p, "mode", c.population);
      read(p, "size", c.population_size);
      if (c.population != "twins" && c.population != "sampled")
        throw ConfigError("population.mode must be 'twins' or 'sampled'");
      if (c.population == "sampled" && c.population_size == 0) throw ConfigError("population.size must be positive");
    }
    if (j.contains("decision")) {
      const auto& d = j.at("decision");
      require_object(d, "decision");
      read(d, "method", c.decision.method);
      read(d, "max_iter", c.decision.max_iter);
      read(d, "tol", c.decision.tol);
      static const std::vector<std::string> methods{"mean", "median", "majority", "ds", "glad"};
      if (std::find(methods.begin(), methods.end(), c.decision.method) == methods.end())
        throw ConfigError("decision.method must be one of mean, median, majority, ds, glad");
      if (c.decision.max_iter < 1 || !(c.decision.tol > 0.0)) throw ConfigError("decision.max_iter/tol must be positive");
    }
    if (j.contains("analysis")) {
      const auto& a = j.at("analysis");
      require_object(a, "analysis");
      read(a, "alpha", c.analysis.alpha);
      read(a, "human_noise", c.analysis.human_noise);
      read(a, "resolution_threshold", c.analysis.resolution_threshold);
      if (a.contains("kappa") && !a.at("kappa").is_null()) c.analysis.kappa = a.at("kappa").get<double>();
      if (a.contains("eps0") && !a.at("eps0").is_null()) c.analysis.eps0 = a.at("eps0").get<double>();
      if (!(c.analysis.alpha > 0.0 && c.analysis.alpha < 1.0)) throw ConfigError("analysis.alpha must be in (0, 1)");
      if (c.analysis.human_noise < 0.0) throw ConfigError("analysis.human_noise must be >= 0");
      if (c.analysis.kappa && *c.analysis.kappa < 0.0) throw ConfigError("analysis.kappa must be >= 0");
      if (c.analysis.eps0 && *c.analysis.eps0 < 0.0) throw ConfigError("analysis.eps0 must be >= 0");
    }
    if (j.contains("evaluate")) {
      const auto& e = j.at("evaluate");
      require_object(e, "evaluate");
      if (e.contains("predicted")) c.evaluate_predicted = resolve(base_dir, e, "predicted");
      if (e.contains("reference")) c.evaluate_reference = resolve(base_dir, e, "reference");
    }
    if (j.contains("sweep")) {
      nlohmann::json s = j.at("sweep");
      require_object(s, "sweep");
      if (!s.contains("seed")) s["seed"] = c.seed;
      c.sweep = sim_config_from_json(s);
    } else {
      c.sweep.seed = c.seed;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

}  // namespace crowdsim
