#pragma once

#include <cstdint>
#include <vector>

#include "basiccs/numeric.hpp"

namespace basiccs {

struct GmmOptions {
  int max_iters = 500;
  double tol = 1e-6;
  /// Per-dimension variance floor; keeps near-constant binary columns from
  /// producing spiked components.
  double min_variance = 0.05;
};

/// Diagonal-covariance Gaussian mixture. For binary columns the mean is the
/// component prevalence.
struct GmmResult {
  MatrixXd means;  // K x D
  MatrixXd sds;    // K x D
  VectorXd weights;
  MatrixXd resp;  // N x K
  double loglik = 0.0;
  std::vector<double> loglik_trace;
  int iterations = 0;
  int reseeds = 0;
};

/// EM with k-means++ seeding. A component with fewer than 2 responsible
/// points is re-seeded at the worst-fit point, at most 3 times.
GmmResult gmm_em(const MatrixXd& X, int K, std::uint64_t seed, const GmmOptions& options = {});

/// Highest-likelihood result over n_init seeds derived from `seed`.
GmmResult gmm_best_of(const MatrixXd& X, int K, std::uint64_t seed, int n_init, const GmmOptions& options = {});

MatrixXd gmm_predict_proba(const GmmResult& model, const MatrixXd& X);
std::vector<int> gmm_predict(const GmmResult& model, const MatrixXd& X);

}  // namespace basiccs
