#include "basiccs/numeric.hpp"

#include <algorithm>
#include <limits>

namespace basiccs {

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double beta_logpdf(double x, double a, double b) {
  const double log_beta_fn = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta_fn;
}

double dirichlet_logpdf(std::span<const double> p, double concentration) {
  const auto k = static_cast<double>(p.size());
  double out = std::lgamma(k * concentration) - k * std::lgamma(concentration);
  if (concentration != 1.0) {
    for (double v : p) out += (concentration - 1.0) * std::log(v);
  }
  return out;
}

double sample_mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace basiccs
