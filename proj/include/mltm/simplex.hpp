#pragma once

#include <span>
#include <string_view>

namespace mltm {

enum class Metric { kl, js, hellinger };

Metric parse_metric(std::string_view name);
std::string_view to_string(Metric metric);

// All functions use natural logarithms and the convention 0 log 0 = 0.
// Inputs must have equal length and lie on the simplex within 1e-6;
// otherwise InvalidArgument is thrown.

// Kullback-Leibler divergence. Returns +infinity when q_i = 0 < p_i.
double kl(std::span<const double> p, std::span<const double> q);

// Jensen-Shannon divergence, in [0, ln 2].
double js(std::span<const double> p, std::span<const double> q);

// Hellinger distance sqrt(1 - sum_i sqrt(p_i q_i)), in [0, 1].
double hellinger(std::span<const double> p, std::span<const double> q);

double divergence(Metric metric, std::span<const double> p, std::span<const double> q);

}  // namespace mltm
