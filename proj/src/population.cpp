#include "crowdsim/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "crowdsim/error.hpp"

namespace crowdsim {

namespace {

constexpr int kMaxRejections = 1000;
constexpr double kSimplexTolerance = 1e-9;

void check_simplex(std::span<const double> probs, const std::string& what) {
  if (probs.empty()) throw ConfigError(what + ": no probabilities");
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw ConfigError(what + ": probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw ConfigError(what + ": probabilities sum to " + std::to_string(total) + ", expected 1");
  }
}

std::pair<double, double> encoding_range(const FieldSpec& f) {
  if (f.allowed_range) return *f.allowed_range;
  if (const auto* u = std::get_if<UniformField>(&f.dist)) return {u->lo, u->hi};
  const auto& n = std::get<NormalField>(f.dist);
  return {n.mean - 3.0 * n.stddev, n.mean + 3.0 * n.stddev};
}

bool qualifies(const FieldSpec& f, const FieldValue& v) {
  if (const auto* c = std::get_if<CategoricalField>(&f.dist)) {
    if (c->allowed.empty()) return true;
    return std::find(c->allowed.begin(), c->allowed.end(), std::get<std::string>(v)) != c->allowed.end();
  }
  if (!f.allowed_range) return true;
  const double x = std::get<double>(v);
  return x >= f.allowed_range->first && x <= f.allowed_range->second;
}

FieldValue draw(const FieldSpec& f, Rng& rng) {
  if (const auto* c = std::get_if<CategoricalField>(&f.dist)) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < c->levels.size(); ++k) {
      acc += c->probs[k];
      if (u < acc) return c->levels[k];
    }
    // Rounding leftovers land on the last level with positive mass.
    for (std::size_t k = c->levels.size(); k-- > 0;) {
      if (c->probs[k] > 0.0) return c->levels[k];
    }
    return c->levels.back();
  }
  if (const auto* u = std::get_if<UniformField>(&f.dist)) return rng.uniform(u->lo, u->hi);
  const auto& n = std::get<NormalField>(f.dist);
  return rng.normal(n.mean, n.stddev);
}

}  // namespace

ProfileSpec::ProfileSpec(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw ConfigError("profile spec needs at least one field");
  for (const auto& f : fields_) {
    offsets_.push_back(encoded_dim_);
    if (const auto* c = std::get_if<CategoricalField>(&f.dist)) {
      if (c->levels.empty() || c->levels.size() != c->probs.size()) {
        throw ConfigError("field '" + f.name + "': levels and probs must be nonempty and equally long");
      }
      check_simplex(c->probs, "field '" + f.name + "'");
      for (const auto& a : c->allowed) {
        if (std::find(c->levels.begin(), c->levels.end(), a) == c->levels.end()) {
          throw ConfigError("field '" + f.name + "': allowed level '" + a + "' is not a level");
        }
      }
      encoded_dim_ += c->levels.size();
    } else {
      if (const auto* u = std::get_if<UniformField>(&f.dist)) {
        if (!std::isfinite(u->lo) || !std::isfinite(u->hi) || !(u->lo < u->hi)) {
          throw ConfigError("field '" + f.name + "': uniform bounds must be finite with lo < hi");
        }
      } else {
        const auto& n = std::get<NormalField>(f.dist);
        if (!std::isfinite(n.mean) || !std::isfinite(n.stddev) || !(n.stddev > 0.0)) {
          throw ConfigError("field '" + f.name + "': normal needs finite mean and sd > 0");
        }
      }
      if (f.allowed_range) {
        const auto [lo, hi] = *f.allowed_range;
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
          throw ConfigError("field '" + f.name + "': allowed range must be finite with lo < hi");
        }
      }
      encoded_dim_ += 1;
    }
  }
}

ProfileSpec profile_spec_from_json(const nlohmann::json& j) {
  std::vector<FieldSpec> fields;
  for (const auto& jf : j.at("fields")) {
    FieldSpec f;
    f.name = jf.at("name").get<std::string>();
    const auto type = jf.at("type").get<std::string>();
    if (type == "categorical") {
      CategoricalField c;
      c.levels = jf.at("levels").get<std::vector<std::string>>();
      c.probs = jf.at("probs").get<std::vector<double>>();
      if (jf.contains("allowed")) c.allowed = jf.at("allowed").get<std::vector<std::string>>();
      f.dist = std::move(c);
    } else if (type == "uniform") {
      f.dist = UniformField{jf.at("lo").get<double>(), jf.at("hi").get<double>()};
    } else if (type == "normal") {
      f.dist = NormalField{jf.at("mean").get<double>(), jf.at("std").get<double>()};
    } else {
      throw ConfigError("field '" + f.name + "': unknown type '" + type + "'");
    }
    if (jf.contains("allowed_range")) {
      const auto r = jf.at("allowed_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("field '" + f.name + "': allowed_range needs [lo, hi]");
      f.allowed_range = std::pair{r[0], r[1]};
    }
    fields.push_back(std::move(f));
  }
  return ProfileSpec(std::move(fields));
}

nlohmann::ordered_json to_json(const ProfileSpec& spec) {
  nlohmann::ordered_json fields = nlohmann::ordered_json::array();
  for (const auto& f : spec.fields()) {
    nlohmann::ordered_json jf;
    jf["name"] = f.name;
    if (const auto* c = std::get_if<CategoricalField>(&f.dist)) {
      jf["type"] = "categorical";
      jf["levels"] = c->levels;
      jf["probs"] = c->probs;
      if (!c->allowed.empty()) jf["allowed"] = c->allowed;
    } else if (const auto* u = std::get_if<UniformField>(&f.dist)) {
      jf["type"] = "uniform";
      jf["lo"] = u->lo;
      jf["hi"] = u->hi;
    } else {
      const auto& n = std::get<NormalField>(f.dist);
      jf["type"] = "normal";
      jf["mean"] = n.mean;
      jf["std"] = n.stddev;
    }
    if (f.allowed_range) jf["allowed_range"] = {f.allowed_range->first, f.allowed_range->second};
    fields.push_back(jf);
  }
  nlohmann::ordered_json out;
  out["fields"] = fields;
  return out;
}

ProfileSpec load_profile_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return profile_spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed profile spec '" + path.string() + "': " + e.what());
  }
}

std::vector<double> encode_profile(const ProfileSpec& spec, std::span<const FieldValue> values) {
  if (values.size() != spec.fields().size()) throw DataError("profile has wrong number of fields");
  std::vector<double> enc(spec.encoded_dim(), 0.0);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto& f = spec.fields()[k];
    const std::size_t off = spec.offset(k);
    if (const auto* c = std::get_if<CategoricalField>(&f.dist)) {
      const auto* level = std::get_if<std::string>(&values[k]);
      if (level == nullptr) throw DataError("field '" + f.name + "' expects a categorical level");
      auto it = std::find(c->levels.begin(), c->levels.end(), *level);
      if (it == c->levels.end()) throw DataError("field '" + f.name + "': unknown level '" + *level + "'");
      enc[off + static_cast<std::size_t>(it - c->levels.begin())] = 1.0;
    } else {
      const auto* x = std::get_if<double>(&values[k]);
      if (x == nullptr || !std::isfinite(*x)) throw DataError("field '" + f.name + "' expects a finite number");
      const auto [lo, hi] = encoding_range(f);
      enc[off] = (*x - lo) / (hi - lo);
    }
  }
  return enc;
}

std::string decode_categorical(const ProfileSpec& spec, std::span<const double> encoded, std::size_t field) {
  const auto& f = spec.fields().at(field);
  const auto* c = std::get_if<CategoricalField>(&f.dist);
  if (c == nullptr) throw std::invalid_argument("field '" + f.name + "' is not categorical");
  const auto block = encoded.subspan(spec.offset(field), c->levels.size());
  const auto best = std::max_element(block.begin(), block.end());
  return c->levels[static_cast<std::size_t>(best - block.begin())];
}

Profile make_profile(const ProfileSpec& spec, std::string participant_id, std::vector<FieldValue> values) {
  Profile p;
  p.participant_id = std::move(participant_id);
  p.encoded = encode_profile(spec, values);
  for (std::size_t k = 0; k < values.size(); ++k) {
    p.values.emplace_back(spec.fields()[k].name, std::move(values[k]));
  }
  return p;
}

std::vector<Profile> sample_profiles(const ProfileSpec& spec, std::size_t n, std::uint64_t seed,
                                     const std::string& id_prefix) {
  std::vector<Profile> out;
  out.reserve(n);
  const int width = std::max<int>(4, static_cast<int>(std::to_string(n).size()));
  for (std::size_t i = 0; i < n; ++i) {
    // Each profile owns a stream, so profile i does not depend on n.
    Rng rng(derive_seed(seed, {0x70726f66ULL, i}));
    std::vector<FieldValue> values;
    values.reserve(spec.fields().size());
    for (const auto& f : spec.fields()) {
      FieldValue v;
      int attempt = 0;
      do {
        if (++attempt > kMaxRejections) {
          throw ConfigError("field '" + f.name + "': qualified pool rejected 1000 consecutive draws");
        }
        v = draw(f, rng);
      } while (!qualifies(f, v));
      values.push_back(std::move(v));
    }
    std::string id = std::to_string(i + 1);
    id.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0');
    out.push_back(make_profile(spec, id_prefix + id, std::move(values)));
  }
  return out;
}

std::vector<Profile> load_profiles(const ProfileSpec& spec, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<Profile> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& jp = j.at("profile");
      std::vector<FieldValue> values;
      for (const auto& f : spec.fields()) {
        const auto& jv = jp.at(f.name);
        if (std::holds_alternative<CategoricalField>(f.dist)) {
          values.emplace_back(jv.get<std::string>());
        } else {
          values.emplace_back(jv.get<double>());
        }
      }
      out.push_back(make_profile(spec, j.at("participant_id").get<std::string>(), std::move(values)));
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    } catch (const std::exception& e) {
      throw DataError(std::string("malformed profile: ") + e.what(), line_no);
    }
  }
  return out;
}

void save_profiles(const std::vector<Profile>& profiles, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (const auto& p : profiles) {
    nlohmann::ordered_json jp;
    for (const auto& [name, v] : p.values) {
      std::visit([&](const auto& x) { jp[name] = x; }, v);
    }
    nlohmann::ordered_json j{{"participant_id", p.participant_id}, {"profile", jp}};
    out << j.dump() << '\n';
  }
}

double GaussianMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t k = 0;
  for (; k + 1 < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) break;
  }
  return means[k] + stddev * rng.normal();
}

std::vector<double> GaussianMixture::sample(std::size_t n, std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = sample(rng);
  return out;
}

GaussianMixture smooth_discrete(std::span<const double> levels, std::span<const double> probs, double eps,
                                double eta) {
  if (levels.size() != probs.size()) throw ConfigError("levels and probs must be equally long");
  check_simplex(probs, "smooth_discrete");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("smoothing scale must lie in (0, 1)");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be a positive constant");
  return {{levels.begin(), levels.end()}, {probs.begin(), probs.end()}, eps * eta};
}

double smoothing_w1_bound(double eps, double eta) { return std::sqrt(2.0 / std::numbers::pi) * eta * eps; }

double empirical_w1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("empirical_w1 needs nonempty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa.size() != sb.size()) {
    const std::size_t m = std::max(sa.size(), sb.size());
    auto resample = [m](const std::vector<double>& s) {
      std::vector<double> q(m);
      if (s.size() == 1) {
        std::fill(q.begin(), q.end(), s.front());
        return q;
      }
      for (std::size_t k = 0; k < m; ++k) {
        const double pos = static_cast<double>(k) * static_cast<double>(s.size() - 1) / static_cast<double>(m - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, s.size() - 1);
        const double w = pos - static_cast<double>(lo);
        q[k] = (1.0 - w) * s[lo] + w * s[hi];
      }
      return q;
    };
    if (sa.size() < m) sa = resample(sa);
    if (sb.size() < m) sb = resample(sb);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < sa.size(); ++k) total += std::abs(sa[k] - sb[k]);
  return total / static_cast<double>(sa.size());
}

Mask sample_participation(const std::vector<std::vector<double>>& probabilities, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x70617274ULL}));
  Mask mask;
  mask.reserve(probabilities.size());
  for (const auto& row : probabilities) {
    auto& out = mask.emplace_back(row.size(), 0);
    for (std::size_t t = 0; t < row.size(); ++t) {
      const double p = row[t];
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("participation probability out of [0, 1]");
      out[t] = rng.bernoulli(p) ? 1 : 0;
    }
  }
  return mask;
}

}  // namespace crowdsim
