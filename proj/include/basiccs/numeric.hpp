#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace basiccs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kLogTwoPi = 1.8378770664093454836;
inline constexpr double kHalfLogTwoPi = 0.9189385332046727418;

using Rng = std::mt19937_64;

/// Numerically stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> v);

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kHalfLogTwoPi - std::log(sd) - 0.5 * z * z;
}

/// Half-normal on [0, inf) with scale `sd`; includes the factor 2.
inline double half_normal_logpdf(double x, double sd) {
  return std::log(2.0) + normal_logpdf(x, 0.0, sd);
}

/// SplitMix64 finalizer over (seed, stream); independent child seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double beta_logpdf(double x, double a, double b);
double dirichlet_logpdf(std::span<const double> p, double concentration);

double sample_mean(std::span<const double> v);
/// Unbiased (n - 1) standard deviation.
double sample_sd(std::span<const double> v);

inline std::span<const double> as_span(const VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace basiccs
