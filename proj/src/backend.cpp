#include "crowdsim/backend.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "crowdsim/error.hpp"
#include "crowdsim/rng.hpp"

namespace crowdsim {

CycleStub::CycleStub(std::vector<std::string> replies) : replies_(std::move(replies)) {
  if (replies_.empty()) throw ConfigError("CycleStub needs at least one reply");
}

std::string CycleStub::complete(const std::string&, double, std::uint64_t seed) {
  return replies_[seed % replies_.size()];
}

HashStub::HashStub(double lo, double hi, double noise, std::vector<double> levels)
    : lo_(lo), hi_(hi), noise_(noise), levels_(std::move(levels)) {
  if (!(lo < hi)) throw ConfigError("HashStub needs lo < hi");
  if (!(noise >= 0.0)) throw ConfigError("HashStub noise must be >= 0");
  std::sort(levels_.begin(), levels_.end());
}

double HashStub::base_value(const std::string& prompt) const {
  const double u = static_cast<double>(mix64(fnv1a(prompt)) >> 11) * 0x1.0p-53;
  return lo_ + (hi_ - lo_) * u;
}

std::string HashStub::complete(const std::string& prompt, double temperature, std::uint64_t seed) {
  double value = base_value(prompt);
  if (temperature > 0.0 && noise_ > 0.0) {
    Rng rng(derive_seed(fnv1a(prompt), {seed}));
    value += noise_ * temperature * rng.normal();
  }
  value = std::clamp(value, lo_, hi_);
  if (!levels_.empty()) {
    auto nearest = std::min_element(levels_.begin(), levels_.end(),
                                    [&](double a, double b) { return std::abs(a - value) < std::abs(b - value); });
    value = *nearest;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return std::string("My decision is ") + buf + ".";
}

BackendDescriptor HashStub::descriptor() const {
  std::ostringstream name;
  name << "stub-hash(" << lo_ << ',' << hi_ << ',' << noise_;
  for (double l : levels_) name << ';' << l;
  name << ')';
  return {name.str(), "local"};
}

ResponseCache::ResponseCache(std::filesystem::path journal) : journal_(std::move(journal)) {
  std::ifstream in(*journal_);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      entries_.insert_or_assign(j.at("key").get<std::string>(), j.at("raw").get<std::string>());
    } catch (const std::exception& e) {
      throw DataError(std::string("corrupt cache journal: ") + e.what(), line_no);
    }
  }
}

std::string ResponseCache::key(const std::string& prompt, double temperature, std::uint64_t seed,
                               const BackendDescriptor& model) {
  const std::string material = model.model + '\x1f' + model.endpoint + '\x1f' + format_number(temperature) + '\x1f' +
                               std::to_string(seed) + '\x1f' + prompt;
  // Two independent 64-bit hashes give a 128-bit key.
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(fnv1a(material)),
                static_cast<unsigned long long>(mix64(fnv1a(material) ^ material.size()) ^ fnv1a(prompt)));
  return buf;
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::insert(const std::string& key, const std::string& prompt, double temperature,
                           std::uint64_t seed, const std::string& raw) {
  std::lock_guard lock(mutex_);
  if (entries_.contains(key)) return;
  entries_.emplace(key, raw);
  if (journal_) {
    if (journal_->has_parent_path()) std::filesystem::create_directories(journal_->parent_path());
    std::ofstream out(*journal_, std::ios::app | std::ios::binary);
    if (!out) throw std::runtime_error("cannot append to cache journal '" + journal_->string() + "'");
    nlohmann::ordered_json j{{"key", key}, {"prompt", prompt}, {"temperature", temperature}, {"seed", seed},
                             {"raw", raw}};
    out << j.dump() << '\n';
  }
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

CachedBackend::CachedBackend(std::shared_ptr<LlmBackend> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::string CachedBackend::complete(const std::string& prompt, double temperature, std::uint64_t seed) {
  const auto key = ResponseCache::key(prompt, temperature, seed, inner_->descriptor());
  if (auto hit = cache_->lookup(key)) return *hit;
  ++live_calls_;
  auto raw = inner_->complete(prompt, temperature, seed);
  cache_->insert(key, prompt, temperature, seed, raw);
  return raw;
}

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  const auto& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("backend.url must start with http:// or https://");
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (options_.model.empty()) throw ConfigError("backend.model must be set for the HTTP backend");
}

std::string HttpBackend::complete(const std::string& prompt, double temperature, std::uint64_t seed) {
  nlohmann::json body{{"model", options_.model},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                      {"temperature", temperature},
                      {"seed", seed}};
  httplib::Headers headers;
  if (const char* key = std::getenv(options_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error;
  auto delay = options_.backoff;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      const auto reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw BackendError(std::string("unexpected completion payload: ") + e.what());
    }
  }
  throw BackendError("backend unreachable after " + std::to_string(options_.max_retries + 1) +
                     " attempts (" + last_error + ")");
}

std::string to_string(PromptStrategy s) {
  switch (s) {
    case PromptStrategy::zero_shot: return "zero_shot";
    case PromptStrategy::multi_persona: return "multi_persona";
    case PromptStrategy::self_consistency: return "self_consistency";
  }
  return "unknown";
}

PromptStrategy strategy_from_string(const std::string& s) {
  if (s == "zero_shot") return PromptStrategy::zero_shot;
  if (s == "multi_persona") return PromptStrategy::multi_persona;
  if (s == "self_consistency") return PromptStrategy::self_consistency;
  throw ConfigError("unknown prompt strategy '" + s + "'");
}

PromptBundle render_prompt(const Problem& problem, PromptStrategy strategy, const std::optional<Profile>& persona) {
  const bool wants_persona = strategy == PromptStrategy::multi_persona;
  if (wants_persona && !persona) throw ConfigError("multi_persona prompting requires a persona profile");
  if (!wants_persona && persona) throw ConfigError("a persona is only valid with multi_persona prompting");

  std::ostringstream out;
  out << "### Problem\n" << problem.description << "\n\n";
  out << "### Requirements\n" << problem.requirements << '\n' << problem.scale.instruction() << "\n\n";
  out << "### Context\n" << problem.context << '\n';
  if (persona) {
    out << "You are answering as a participant with the following profile:\n";
    for (const auto& [name, value] : persona->values) {
      out << "- " << name << ": ";
      std::visit(
          [&](const auto& v) {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, double>) {
              out << format_number(v);
            } else {
              out << v;
            }
          },
          value);
      out << '\n';
    }
  }
  out << "\n### Answer\n";
  return {strategy, out.str(), persona};
}

double parse_decision(const std::string& raw, const DecisionScale& scale) {
  std::size_t i = 0;
  const std::size_t n = raw.size();
  auto is_digit = [&](std::size_t k) { return k < n && std::isdigit(static_cast<unsigned char>(raw[k])); };
  while (i < n) {
    std::size_t start = i;
    bool candidate = false;
    if (is_digit(i)) {
      candidate = true;
    } else if ((raw[i] == '-' || raw[i] == '+') && (is_digit(i + 1) || (raw[i + 1] == '.' && is_digit(i + 2)))) {
      // A sign only counts when it does not follow a word or number ("1-5").
      candidate = i == 0 || !std::isalnum(static_cast<unsigned char>(raw[i - 1]));
    } else if (raw[i] == '.' && is_digit(i + 1) && (i == 0 || !std::isalnum(static_cast<unsigned char>(raw[i - 1])))) {
      candidate = true;
    }
    if (!candidate) {
      ++i;
      continue;
    }
    std::size_t j = start;
    if (raw[j] == '+' || raw[j] == '-') ++j;
    while (is_digit(j)) ++j;
    if (j < n && raw[j] == '.' && is_digit(j + 1)) {
      ++j;
      while (is_digit(j)) ++j;
    }
    std::string token = raw.substr(start, j - start);
    if (!token.empty() && token.front() == '+') token.erase(0, 1);
    double v = 0.0;
    std::from_chars(token.data(), token.data() + token.size(), v);
    i = j;
    if (scale.kind() == ScaleKind::continuous) return scale.project(v);
    if (scale.contains(v)) return scale.levels()[scale.index_of(v)];
  }
  throw UnparseableResponse("no on-scale decision in response: '" + raw.substr(0, 200) + "'");
}

ReferenceOptions ReferenceOptions::for_strategy(PromptStrategy strategy) {
  ReferenceOptions o;
  o.strategy = strategy;
  if (strategy == PromptStrategy::self_consistency) {
    o.temperature = 0.5;
    o.aggregator = AggregateMethod::majority;
  }
  return o;
}

ReferenceResult generate_reference(const Problem& problem, LlmBackend& backend, const ReferenceOptions& options,
                                   std::uint64_t seed, const std::optional<Profile>& persona) {
  if (options.samples < 1) throw ConfigError("reference generation needs K >= 1");
  if (options.temperature < 0.0) throw ConfigError("temperature must be >= 0");
  const auto prompt = render_prompt(problem, options.strategy, persona);
  const auto K = static_cast<std::uint64_t>(options.samples);

  auto draw = [&](std::uint64_t k) -> std::optional<double> {
    for (int r = 0; r <= options.parse_retries; ++r) {
      const std::uint64_t s = seed + k + static_cast<std::uint64_t>(r) * K;
      try {
        return parse_decision(backend.complete(prompt.text, options.temperature, s), problem.scale);
      } catch (const UnparseableResponse&) {
      }
    }
    return std::nullopt;
  };

  std::vector<std::optional<double>> drawn(K);
  if (options.parallelism <= 1 || K == 1) {
    for (std::uint64_t k = 0; k < K; ++k) drawn[k] = draw(k);
  } else {
    // Each sample owns its (prompt, seed) key, so completion order is irrelevant.
    const auto width = static_cast<std::uint64_t>(options.parallelism);
    for (std::uint64_t base = 0; base < K; base += width) {
      std::vector<std::future<std::optional<double>>> batch;
      for (std::uint64_t k = base; k < std::min(K, base + width); ++k) {
        batch.push_back(std::async(std::launch::async, draw, k));
      }
      for (std::uint64_t k = 0; k < batch.size(); ++k) drawn[base + k] = batch[k].get();
    }
  }

  ReferenceResult result;
  for (const auto& d : drawn) {
    if (d) result.samples.push_back(*d);
  }
  if (result.samples.empty()) {
    throw UnparseableResponse("all " + std::to_string(K) + " reference samples for problem '" + problem.id +
                              "' were unparseable");
  }
  result.value = aggregate(result.samples, options.aggregator);
  return result;
}

double estimate_backend_variance(const Problem& problem, LlmBackend& backend, double temperature, int m,
                                 std::uint64_t seed) {
  if (m < 2) throw ConfigError("variance estimation needs m >= 2 samples");
  ReferenceOptions o;
  o.samples = m;
  o.temperature = temperature;
  const auto samples = generate_reference(problem, backend, o, seed).samples;
  if (samples.size() < 2) throw UnparseableResponse("fewer than 2 parseable samples for variance estimate");
  const double mean = aggregate(samples, AggregateMethod::mean);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(samples.size() - 1);
}

}  // namespace crowdsim
