#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "crowdsim/aggregate.hpp"
#include "crowdsim/dataset.hpp"
#include "crowdsim/population.hpp"

namespace crowdsim {

struct BackendDescriptor {
  std::string model;
  std::string endpoint;
};

/// A text-completion model. Implementations must be safe to call concurrently.
class LlmBackend {
public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const std::string& prompt, double temperature, std::uint64_t seed) = 0;
  virtual BackendDescriptor descriptor() const = 0;
};

/// Returns values[seed % size] formatted as text, whatever the prompt or temperature.
class CycleStub final : public LlmBackend {
public:
  explicit CycleStub(std::vector<std::string> replies);
  std::string complete(const std::string& prompt, double temperature, std::uint64_t seed) override;
  BackendDescriptor descriptor() const override { return {"stub-cycle", "local"}; }

private:
  std::vector<std::string> replies_;
};

/// Deterministic fake LLM. The answer to a prompt is a hash-derived point in
/// [lo, hi]; at temperature t > 0 Gaussian jitter of sd `noise * t` seeded by
/// (prompt, seed) is added. When `levels` is nonempty the answer snaps to the
/// nearest level. A pure function of (prompt, temperature, seed).
class HashStub final : public LlmBackend {
public:
  HashStub(double lo, double hi, double noise, std::vector<double> levels = {});
  std::string complete(const std::string& prompt, double temperature, std::uint64_t seed) override;
  BackendDescriptor descriptor() const override;

  /// The noise-free value the stub centres on for this prompt.
  double base_value(const std::string& prompt) const;

private:
  double lo_;
  double hi_;
  double noise_;
  std::vector<double> levels_;
};

/// Append-only prompt cache backed by a JSON-lines journal
/// {key, prompt, temperature, seed, raw}. Replaying the journal rebuilds the cache.
class ResponseCache {
public:
  ResponseCache() = default;
  /// Opens (and replays) a journal; the file is created on first insert.
  explicit ResponseCache(std::filesystem::path journal);

  static std::string key(const std::string& prompt, double temperature, std::uint64_t seed,
                         const BackendDescriptor& model);

  std::optional<std::string> lookup(const std::string& key) const;
  void insert(const std::string& key, const std::string& prompt, double temperature, std::uint64_t seed,
              const std::string& raw);
  std::size_t size() const;

private:
  mutable std::mutex mutex_;
  std::map<std::string, std::string> entries_;
  std::optional<std::filesystem::path> journal_;
};

/// Serves from the cache when possible; otherwise forwards and records.
class CachedBackend final : public LlmBackend {
public:
  CachedBackend(std::shared_ptr<LlmBackend> inner, std::shared_ptr<ResponseCache> cache);
  std::string complete(const std::string& prompt, double temperature, std::uint64_t seed) override;
  BackendDescriptor descriptor() const override { return inner_->descriptor(); }

  /// Number of calls that reached the wrapped backend.
  std::size_t live_calls() const noexcept { return live_calls_.load(); }

private:
  std::shared_ptr<LlmBackend> inner_;
  std::shared_ptr<ResponseCache> cache_;
  std::atomic<std::size_t> live_calls_{0};
};

struct HttpBackendOptions {
  std::string base_url;             ///< e.g. http://localhost:8000/v1
  std::string model;
  std::string api_key_env = "CROWDSIM_API_KEY";
  int max_retries = 3;
  std::chrono::milliseconds backoff{200};
  std::chrono::seconds timeout{120};
};

/// Chat-completions style HTTP client: POST {base_url}/chat/completions with
/// {"model", "messages":[{"role":"user","content":prompt}], "temperature", "seed"};
/// the decision text is choices[0].message.content. Transport failures and 5xx
/// replies are retried with exponential backoff, then raise BackendError.
class HttpBackend final : public LlmBackend {
public:
  explicit HttpBackend(HttpBackendOptions options);
  std::string complete(const std::string& prompt, double temperature, std::uint64_t seed) override;
  BackendDescriptor descriptor() const override { return {options_.model, options_.base_url}; }

private:
  HttpBackendOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

enum class PromptStrategy { zero_shot, multi_persona, self_consistency };

std::string to_string(PromptStrategy s);
PromptStrategy strategy_from_string(const std::string& s);

struct PromptBundle {
  PromptStrategy strategy = PromptStrategy::zero_shot;
  std::string text;
  std::optional<Profile> persona;
};

/// Renders f(x_t, R_t, C_t). Multi-persona prompts differ from zero-shot ones
/// only in the context block, which additionally lists the persona's profile.
/// Throws ConfigError when a persona is given without multi_persona or vice versa.
PromptBundle render_prompt(const Problem& problem, PromptStrategy strategy,
                           const std::optional<Profile>& persona = std::nullopt);

/// Extracts the first on-scale decision from model output. Discrete scales take
/// the first numeric token equal to a level; continuous scales take the first
/// numeric token clamped to [lo, hi]. Throws UnparseableResponse otherwise.
double parse_decision(const std::string& raw, const DecisionScale& scale);

struct ReferenceOptions {
  PromptStrategy strategy = PromptStrategy::zero_shot;
  int samples = 8;  ///< K
  AggregateMethod aggregator = AggregateMethod::mean;
  double temperature = 0.0;
  int parse_retries = 2;
  int parallelism = 1;

  /// Defaults for a strategy: self-consistency samples at temperature 0.5 and
  /// takes the majority.
  static ReferenceOptions for_strategy(PromptStrategy strategy);
};

struct ReferenceResult {
  double value = 0.0;
  std::vector<double> samples;
};

/// y_ref = h(y'_1..y'_K). Sample k uses seed + k; an unparseable reply is retried
/// with seed + k + r*K for r = 1..parse_retries. Samples that stay unparseable are
/// dropped; if all K fail, UnparseableResponse is thrown.
ReferenceResult generate_reference(const Problem& problem, LlmBackend& backend, const ReferenceOptions& options,
                                   std::uint64_t seed, const std::optional<Profile>& persona = std::nullopt);

/// Unbiased sample variance of m >= 2 zero-shot samples at `temperature`.
double estimate_backend_variance(const Problem& problem, LlmBackend& backend, double temperature, int m,
                                 std::uint64_t seed);

}  // namespace crowdsim
