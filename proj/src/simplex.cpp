#include "mltm/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mltm/error.hpp"

namespace mltm {

Metric parse_metric(std::string_view name) {
  if (name == "kl") return Metric::kl;
  if (name == "js") return Metric::js;
  if (name == "hellinger") return Metric::hellinger;
  throw ConfigError("unknown metric '" + std::string(name) + "' (expected js, kl or hellinger)");
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kl: return "kl";
    case Metric::js: return "js";
    case Metric::hellinger: return "hellinger";
  }
  return "?";
}

namespace {

void check_simplex(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string(name) + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw InvalidArgument(std::string(name) + " is not on the simplex (sum " + std::to_string(sum) + ")");
  }
}

void check_pair(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw InvalidArgument("dimension mismatch: " + std::to_string(p.size()) + " vs " +
                          std::to_string(q.size()));
  }
  check_simplex(p, "p");
  check_simplex(q, "q");
}

double kl_unchecked(std::span<const double> p, std::span<const double> q) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return sum;
}

}  // namespace

double kl(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  return std::max(0.0, kl_unchecked(p, q));
}

double js(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  // Each term is accumulated in a form that is exactly symmetric in (p, q).
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    double a = p[i] > 0.0 ? p[i] * std::log(p[i] / m) : 0.0;
    double b = q[i] > 0.0 ? q[i] * std::log(q[i] / m) : 0.0;
    if (b < a) std::swap(a, b);
    sum += a + b;
  }
  return std::clamp(0.5 * sum, 0.0, std::log(2.0));
}

double hellinger(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  double bc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) bc += std::sqrt(p[i] * q[i]);
  return std::sqrt(std::max(0.0, 1.0 - bc));
}

double divergence(Metric metric, std::span<const double> p, std::span<const double> q) {
  switch (metric) {
    case Metric::kl: return kl(p, q);
    case Metric::js: return js(p, q);
    case Metric::hellinger: return hellinger(p, q);
  }
  throw InvalidArgument("unknown metric");
}

}  // namespace mltm
