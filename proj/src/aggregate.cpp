#include "crowdsim/aggregate.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "crowdsim/error.hpp"

namespace crowdsim {

std::string to_string(AggregateMethod m) {
  switch (m) {
    case AggregateMethod::mean: return "mean";
    case AggregateMethod::median: return "median";
    case AggregateMethod::majority: return "majority";
  }
  return "unknown";
}

AggregateMethod aggregate_method_from_string(const std::string& s) {
  if (s == "mean") return AggregateMethod::mean;
  if (s == "median") return AggregateMethod::median;
  if (s == "majority" || s == "mv") return AggregateMethod::majority;
  throw ConfigError("unknown aggregation method '" + s + "'");
}

double aggregate(std::span<const double> values, AggregateMethod method) {
  if (values.empty()) throw std::invalid_argument("cannot aggregate an empty response set");
  switch (method) {
    case AggregateMethod::mean: {
      // shifted sum: exact when all values agree
      const double v0 = values.front();
      double s = 0.0;
      for (double v : values) s += v - v0;
      return v0 + s / static_cast<double>(values.size());
    }
    case AggregateMethod::median: {
      std::vector<double> v(values.begin(), values.end());
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
    case AggregateMethod::majority: {
      std::map<double, std::size_t> counts;
      for (double x : values) ++counts[x];
      // std::map iterates ascending, so strict > keeps the smallest tied value.
      auto best = counts.begin();
      for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      return best->first;
    }
  }
  throw std::invalid_argument("unknown aggregation method");
}

}  // namespace crowdsim
