#pragma once

#include <string_view>
#include <vector>

#include "basiccs/numeric.hpp"

namespace basiccs {

enum class KernelKind { se_ard, linear };

std::string_view to_string(KernelKind kind);
KernelKind kernel_kind_from_string(std::string_view s);

/// Control-surface covariance hyperparameters. For the linear kernel the
/// length scales are carried but unused.
struct GpHyper {
  KernelKind kernel = KernelKind::se_ard;
  double alpha = 1.0;
  VectorXd rho;
  double noise_sd = 0.1;
  double jitter = 1e-8;

  void validate(Eigen::Index dims) const;
};

/// Whitened latent surface: values = chol * whitened.
struct GpLatent {
  MatrixXd train_inputs;
  MatrixXd chol;
  VectorXd whitened;
  VectorXd values;
};

/// alpha^2 exp(-0.5 sum_d ((x_d - x2_d) / rho_d)^2), or alpha^2 (x'x2 + 1) for
/// the linear kernel. With add_diag_noise, X2 must be X and
/// noise_sd^2 + jitter is added to the diagonal.
MatrixXd kernel_matrix(const MatrixXd& X, const MatrixXd& X2, const GpHyper& hyper,
                       bool add_diag_noise);

struct CholeskyResult {
  MatrixXd lower;
  double jitter = 0.0;
};

/// Lower Cholesky factor of K + jitter I, escalating jitter by 10x from
/// 1e-8 alpha^2 up to 1e-4 alpha^2. Throws NumericalError past the ceiling.
CholeskyResult jittered_cholesky(const MatrixXd& K, double alpha, double start_jitter = 0.0);

/// Builds the latent surface for `whitened` over X (chol of K(X) + jitter I).
/// The jitter actually used is written back to `hyper`.
GpLatent make_latent(const MatrixXd& X, GpHyper& hyper, const VectorXd& whitened);

/// Gaussian log marginal likelihood of y under K(X) + (noise^2 + jitter) I.
/// When `grad` is non-null it receives the gradient w.r.t. the log
/// hyperparameters in the order of `pack_log_hyper`.
double gp_log_marginal(const MatrixXd& X, const VectorXd& y, const GpHyper& hyper,
                       VectorXd* grad = nullptr);

/// Free log-parameters: (log alpha, log rho_1..D, log noise) for SE-ARD and
/// (log alpha, log noise) for the linear kernel.
VectorXd pack_log_hyper(const GpHyper& hyper);
GpHyper unpack_log_hyper(const VectorXd& theta, const GpHyper& like);

struct GpFitTrace {
  std::vector<double> log_marginal;  // accepted iterates, starting with init
};

/// Maximum marginal likelihood fit by box-constrained L-BFGS ascent over the
/// log hyperparameters. y must be centered. Accepted steps never decrease the
/// objective, so the result is at least as good as `init`.
GpHyper gp_mle_fit(const MatrixXd& X, const VectorXd& y, const GpHyper& init, int budget,
                   GpFitTrace* trace = nullptr);

/// Default starting point for gp_mle_fit on standardized inputs.
GpHyper default_gp_init(KernelKind kernel, Eigen::Index dims, double y_sd);

/// K(X_new, X_train) (K(X_train) + jitter I)^{-1} values via the stored factor.
VectorXd gp_conditional_mean(const GpLatent& latent, const GpHyper& hyper, const MatrixXd& X_new);

/// Posterior mean of the whitened coordinates given noisy observations of a
/// subset of the latent values: argmin ||y - (L eta)_obs||^2 / noise^2 + ||eta||^2.
VectorXd whitened_ridge_fit(const MatrixXd& chol, const std::vector<std::size_t>& observed_rows,
                            const VectorXd& y_observed, double noise_sd);

}  // namespace basiccs
