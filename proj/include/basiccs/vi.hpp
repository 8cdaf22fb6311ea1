#pragma once

#include <cstdint>
#include <vector>

#include "basiccs/numeric.hpp"

namespace basiccs {

/// Target of variational inference: an unnormalized log density on R^P.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual Eigen::Index dim() const = 0;
  /// Writes the gradient into `grad` (resized) when non-null.
  virtual double log_density(const VectorXd& u, VectorXd* grad) const = 0;
};

/// Mean-field Gaussian q(u) = N(mean, diag(exp(log_sd))^2).
struct VariationalPosterior {
  VectorXd mean;
  VectorXd log_sd;
};

struct ElboGradient {
  VectorXd mean;
  VectorXd log_sd;
  double elbo = 0.0;
};

/// Monte-Carlo ELBO: average log density at reparameterized draws plus the
/// Gaussian entropy. Deterministic given the seed. Non-finite draws are
/// redrawn up to 5 times before NumericalError.
double elbo_estimate(const LogDensity& target, const VariationalPosterior& q, int num_samples,
                     std::uint64_t seed);

/// Reparameterization gradient of elbo_estimate under the same draws.
ElboGradient elbo_gradient(const LogDensity& target, const VariationalPosterior& q, int num_samples,
                           std::uint64_t seed);

struct OptimizerOptions {
  int max_iters = 5000;
  int mc_samples = 1;
  double base_step = 0.05;
  /// Step decay horizon: step_t = base / sqrt(1 + t / step_decay).
  double step_decay = 250.0;
  double rms_decay = 0.9;
  int smooth_window = 50;
  int convergence_window = 200;
  double convergence_tol = 1e-5;
};

struct OptimizeResult {
  VariationalPosterior q;
  std::vector<double> elbo_trace;  // smoothed
  double final_elbo = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Stochastic gradient ascent on the ELBO with RMSprop-style per-coordinate
/// steps. Draw seeds derive from `seed` and the iteration index.
OptimizeResult optimize_elbo(const LogDensity& target, VariationalPosterior q, const OptimizerOptions& options,
                             std::uint64_t seed);

}  // namespace basiccs
