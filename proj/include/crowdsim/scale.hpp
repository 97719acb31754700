#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace crowdsim {

enum class ScaleKind { continuous, ordinal, choice };

std::string to_string(ScaleKind kind);

/// The decision domain of a problem.
///
/// Ordinal levels and choice labels are stored as numbers (choice labels are
/// 1..M), so squared losses and Wasserstein distances are defined on every scale.
/// Construction validates; an invalid scale cannot exist.
class DecisionScale {
public:
  static DecisionScale continuous(double lo, double hi);
  static DecisionScale ordinal(std::vector<double> levels);
  static DecisionScale choice(int alternatives);

  ScaleKind kind() const noexcept { return kind_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

  /// Ordinal levels, or 1..M for choice. Empty for continuous scales.
  const std::vector<double>& levels() const noexcept { return levels_; }

  /// Number of alternatives for discrete scales, 0 for continuous.
  std::size_t size() const noexcept { return levels_.size(); }
  bool discrete() const noexcept { return kind_ != ScaleKind::continuous; }

  bool contains(double value) const;

  /// Maps an arbitrary real onto the scale: continuous clamps, discrete scales
  /// round to the nearest level with ties going to the higher level.
  double project(double value) const;

  /// Index of `value` among the levels. Throws std::out_of_range if off-scale.
  std::size_t index_of(double value) const;

  /// Human-readable instruction describing admissible answers.
  std::string instruction() const;

  friend bool operator==(const DecisionScale&, const DecisionScale&) = default;

private:
  DecisionScale() = default;

  ScaleKind kind_ = ScaleKind::continuous;
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<double> levels_;
};

void to_json(nlohmann::json& j, const DecisionScale& scale);
DecisionScale scale_from_json(const nlohmann::json& j);

}  // namespace crowdsim
