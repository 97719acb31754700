#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crowdsim/scale.hpp"

namespace crowdsim {

inline constexpr std::size_t kDefaultFeatureDim = 32;

/// A decision task: description, requirements and context, plus the numeric
/// feature vector the belief generator conditions on.
struct Problem {
  std::string id;
  std::string description;
  std::string requirements;
  std::string context;
  DecisionScale scale = DecisionScale::continuous(0.0, 1.0);
  std::vector<double> features;

  friend bool operator==(const Problem&, const Problem&) = default;
};

/// Deterministic signed hashed bag-of-tokens embedding, L2-normalised.
/// Tokens are maximal runs of ASCII alphanumerics, lower-cased.
std::vector<double> hashed_features(std::string_view text, std::size_t dim = kDefaultFeatureDim);

/// Stable 64-bit FNV-1a hash.
std::uint64_t fnv1a(std::string_view text) noexcept;

/// Problems indexed by id, all sharing one feature dimension.
class ProblemSet {
public:
  ProblemSet() = default;
  explicit ProblemSet(std::vector<Problem> problems);

  const std::vector<Problem>& problems() const noexcept { return problems_; }
  std::size_t size() const noexcept { return problems_.size(); }
  bool empty() const noexcept { return problems_.empty(); }
  std::size_t feature_dim() const noexcept { return feature_dim_; }

  const Problem* find(std::string_view id) const;
  const Problem& at(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;

  void add(Problem problem);

private:
  std::vector<Problem> problems_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::size_t feature_dim_ = 0;
};

/// Reads problems from JSON-lines. Problems without a `features` array receive
/// hashed features of dimension `feature_dim` computed from the description.
ProblemSet load_problems(const std::filesystem::path& path, std::size_t feature_dim = kDefaultFeatureDim);
void save_problems(const ProblemSet& problems, const std::filesystem::path& path);

struct Response {
  std::string participant_id;
  std::string problem_id;
  double value = 0.0;

  friend bool operator==(const Response&, const Response&) = default;
};

/// Sparse participant x problem decisions. The participation mask is exactly
/// the support of the response set.
class ResponseMatrix {
public:
  struct Entry {
    std::size_t participant;
    double value;
  };

  /// Adds a response after checking `value` against `scale`.
  /// Throws DataError on an off-scale value or a duplicate pair.
  void add(Response response, const DecisionScale& scale);

  /// Adds without a scale check; used for digital decisions already projected.
  void add_unchecked(Response response);

  const std::vector<Response>& responses() const noexcept { return responses_; }
  std::size_t size() const noexcept { return responses_.size(); }
  bool empty() const noexcept { return responses_.empty(); }

  /// Participant and problem ids in order of first appearance.
  const std::vector<std::string>& participants() const noexcept { return participants_; }
  const std::vector<std::string>& problems() const noexcept { return problems_; }

  /// phi_{t,i}.
  bool participates(std::string_view participant_id, std::string_view problem_id) const;
  std::optional<double> value(std::string_view participant_id, std::string_view problem_id) const;

  /// N_t, the number of responses to a problem (0 for unknown problems).
  std::size_t count(std::string_view problem_id) const;

  /// T_i, the number of problems a participant answered.
  std::size_t tasks_of(std::string_view participant_id) const;

  /// (participant index, value) for one problem, in insertion order.
  std::vector<Entry> for_problem(std::string_view problem_id) const;
  std::vector<double> values_for_problem(std::string_view problem_id) const;

  friend bool operator==(const ResponseMatrix& a, const ResponseMatrix& b) {
    return a.responses_ == b.responses_;
  }

private:
  std::vector<Response> responses_;
  std::vector<std::string> participants_;
  std::vector<std::string> problems_;
  std::map<std::string, std::size_t, std::less<>> participant_index_;
  std::map<std::string, std::size_t, std::less<>> problem_index_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> cell_;
  std::vector<std::vector<std::size_t>> by_problem_;
  std::vector<std::size_t> tasks_per_participant_;
};

enum class ResponseFormat { csv, jsonl };

/// Infers the format from the file extension (.csv, .jsonl/.json).
ResponseFormat format_from_path(const std::filesystem::path& path);

/// Loads responses and validates each value against its problem's scale.
/// Errors (with 1-based line numbers): malformed row, unknown problem,
/// off-scale value, duplicate (participant, problem) pair.
ResponseMatrix load_responses(const std::filesystem::path& path, ResponseFormat format,
                              const ProblemSet& problems);

void save_responses(const ResponseMatrix& matrix, const std::filesystem::path& path);

/// Locale-independent shortest round-trip formatting of a double.
std::string format_number(double value);

}  // namespace crowdsim
