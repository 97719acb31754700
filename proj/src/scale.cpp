#include "crowdsim/scale.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "crowdsim/error.hpp"

namespace crowdsim {

namespace {
constexpr double kLevelTolerance = 1e-9;
}

std::string to_string(ScaleKind kind) {
  switch (kind) {
    case ScaleKind::continuous: return "continuous";
    case ScaleKind::ordinal: return "ordinal";
    case ScaleKind::choice: return "choice";
  }
  return "unknown";
}

DecisionScale DecisionScale::continuous(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw ConfigError("continuous scale requires finite lo < hi");
  }
  DecisionScale s;
  s.kind_ = ScaleKind::continuous;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

DecisionScale DecisionScale::ordinal(std::vector<double> levels) {
  if (levels.size() < 2) throw ConfigError("ordinal scale requires at least 2 levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!std::isfinite(levels[i])) throw ConfigError("ordinal levels must be finite");
    if (i > 0 && !(levels[i - 1] < levels[i])) {
      throw ConfigError("ordinal levels must be strictly increasing");
    }
  }
  DecisionScale s;
  s.kind_ = ScaleKind::ordinal;
  s.lo_ = levels.front();
  s.hi_ = levels.back();
  s.levels_ = std::move(levels);
  return s;
}

DecisionScale DecisionScale::choice(int alternatives) {
  if (alternatives < 2) throw ConfigError("choice scale requires at least 2 alternatives");
  DecisionScale s;
  s.kind_ = ScaleKind::choice;
  s.levels_.resize(static_cast<std::size_t>(alternatives));
  for (int k = 0; k < alternatives; ++k) s.levels_[static_cast<std::size_t>(k)] = k + 1;
  s.lo_ = 1;
  s.hi_ = alternatives;
  return s;
}

bool DecisionScale::contains(double value) const {
  if (!std::isfinite(value)) return false;
  if (kind_ == ScaleKind::continuous) return value >= lo_ && value <= hi_;
  return std::any_of(levels_.begin(), levels_.end(),
                     [&](double l) { return std::abs(l - value) <= kLevelTolerance; });
}

double DecisionScale::project(double value) const {
  if (std::isnan(value)) throw std::invalid_argument("cannot project NaN onto a scale");
  if (kind_ == ScaleKind::continuous) return std::clamp(value, lo_, hi_);
  if (value <= levels_.front()) return levels_.front();
  if (value >= levels_.back()) return levels_.back();
  auto upper = std::lower_bound(levels_.begin(), levels_.end(), value);
  if (*upper == value) return value;
  const double below = *(upper - 1);
  const double above = *upper;
  return (value - below < above - value) ? below : above;
}

std::size_t DecisionScale::index_of(double value) const {
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (std::abs(levels_[k] - value) <= kLevelTolerance) return k;
  }
  throw std::out_of_range("value is not a level of this scale");
}

std::string DecisionScale::instruction() const {
  std::ostringstream out;
  switch (kind_) {
    case ScaleKind::continuous:
      out << "Answer with a single number between " << lo_ << " and " << hi_ << ".";
      break;
    case ScaleKind::ordinal: {
      out << "Answer with exactly one of the values:";
      for (double l : levels_) out << ' ' << l;
      out << '.';
      break;
    }
    case ScaleKind::choice:
      out << "Answer with the number of exactly one option from 1 to " << levels_.size() << ".";
      break;
  }
  return out.str();
}

void to_json(nlohmann::json& j, const DecisionScale& scale) {
  switch (scale.kind()) {
    case ScaleKind::continuous:
      j = {{"kind", "continuous"}, {"lo", scale.lo()}, {"hi", scale.hi()}};
      break;
    case ScaleKind::ordinal:
      j = {{"kind", "ordinal"}, {"levels", scale.levels()}};
      break;
    case ScaleKind::choice:
      j = {{"kind", "choice"}, {"m", scale.size()}};
      break;
  }
}

DecisionScale scale_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "continuous") return DecisionScale::continuous(j.at("lo").get<double>(), j.at("hi").get<double>());
  if (kind == "ordinal") return DecisionScale::ordinal(j.at("levels").get<std::vector<double>>());
  if (kind == "choice") return DecisionScale::choice(j.at("m").get<int>());
  throw ConfigError("unknown scale kind '" + kind + "'");
}

}  // namespace crowdsim
