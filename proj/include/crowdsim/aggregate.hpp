#pragma once

#include <span>
#include <string>

namespace crowdsim {

enum class AggregateMethod { mean, median, majority };

std::string to_string(AggregateMethod m);
AggregateMethod aggregate_method_from_string(const std::string& s);

/// Mean, median (average of the middle pair for even counts) or majority vote
/// (ties go to the smallest value). Throws std::invalid_argument when empty.
double aggregate(std::span<const double> values, AggregateMethod method);

}  // namespace crowdsim
