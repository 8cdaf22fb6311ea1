#include "basiccs/kernels.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace basiccs::kernels {

namespace {

struct ScaledInputs {
  MatrixXd a;  // rows of X / rho (SE) or X (linear)
  MatrixXd b;
};

ScaledInputs scale_inputs(const MatrixXd& X, const MatrixXd& X2, const GpHyper& hyper) {
  if (hyper.kernel == KernelKind::linear) return {X, X2};
  const Eigen::RowVectorXd inv = hyper.rho.cwiseInverse().transpose();
  return {X.array().rowwise() * inv.array(), X2.array().rowwise() * inv.array()};
}

inline double kernel_entry(const ScaledInputs& s, Eigen::Index i, Eigen::Index j,
                           const GpHyper& hyper) {
  const double a2 = hyper.alpha * hyper.alpha;
  const Eigen::Index D = s.a.cols();
  if (hyper.kernel == KernelKind::linear) {
    double dot = 0.0;
    for (Eigen::Index d = 0; d < D; ++d) dot += s.a(i, d) * s.b(j, d);
    return a2 * (dot + 1.0);
  }
  double r2 = 0.0;
  for (Eigen::Index d = 0; d < D; ++d) {
    const double diff = s.a(i, d) - s.b(j, d);
    r2 += diff * diff;
  }
  return a2 * std::exp(-0.5 * r2);
}

struct PointwiseContext {
  const Dataset& ds;
  const std::vector<ClusterParams>& clusters;
  const GlobalParams& globals;
  const PopulationReference& ref;
  const ModelStructure& m;
  bool include_outcome;
  VectorXd log_pi;
};

inline void pointwise_row(const PointwiseContext& c, Eigen::Index n, MatrixXd& out) {
  const auto K = static_cast<Eigen::Index>(c.clusters.size());
  const auto nu = static_cast<std::size_t>(n);
  for (Eigen::Index k = 0; k < K; ++k) {
    double v = c.log_pi[k] + covariate_loglik(c.ds.X.row(n), c.clusters[static_cast<std::size_t>(k)], c.ref, c.m);
    if (c.include_outcome) {
      const double mu0 = c.globals.mu0_offset + c.globals.gp_latent.values[n];
      v += outcome_loglik(c.ds.y[n], c.ds.a[nu], mu0, c.clusters[static_cast<std::size_t>(k)].beta,
                          c.globals.sigma0, c.globals.sigma1, c.m.outcome);
    }
    out(n, k) = v;
  }
}

PointwiseContext make_context(const Dataset& ds, const std::vector<ClusterParams>& clusters,
                              const GlobalParams& globals, const PopulationReference& ref,
                              const ModelStructure& m, bool include_outcome) {
  return {ds, clusters, globals, ref, m, include_outcome, globals.pi.array().log().matrix()};
}

}  // namespace

namespace serial {

MatrixXd kernel_matrix(const MatrixXd& X, const MatrixXd& X2, const GpHyper& hyper) {
  const auto s = scale_inputs(X, X2, hyper);
  MatrixXd K(X.rows(), X2.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X2.rows(); ++j) K(i, j) = kernel_entry(s, i, j, hyper);
  }
  return K;
}

MatrixXd pointwise_logliks(const Dataset& ds, const std::vector<ClusterParams>& clusters,
                           const GlobalParams& globals, const PopulationReference& ref,
                           const ModelStructure& m, bool include_outcome) {
  const auto ctx = make_context(ds, clusters, globals, ref, m, include_outcome);
  MatrixXd out(ds.rows(), static_cast<Eigen::Index>(clusters.size()));
  for (Eigen::Index n = 0; n < ds.rows(); ++n) pointwise_row(ctx, n, out);
  return out;
}

}  // namespace serial

namespace parallel {

MatrixXd kernel_matrix(const MatrixXd& X, const MatrixXd& X2, const GpHyper& hyper) {
  const auto s = scale_inputs(X, X2, hyper);
  MatrixXd K(X.rows(), X2.rows());
  const Eigen::Index rows = X.rows();
  const Eigen::Index cols = X2.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) K(i, j) = kernel_entry(s, i, j, hyper);
  }
  return K;
}

MatrixXd pointwise_logliks(const Dataset& ds, const std::vector<ClusterParams>& clusters,
                           const GlobalParams& globals, const PopulationReference& ref,
                           const ModelStructure& m, bool include_outcome) {
  const auto ctx = make_context(ds, clusters, globals, ref, m, include_outcome);
  MatrixXd out(ds.rows(), static_cast<Eigen::Index>(clusters.size()));
  const Eigen::Index rows = ds.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index n = 0; n < rows; ++n) pointwise_row(ctx, n, out);
  return out;
}

}  // namespace parallel

int configured_threads() {
  if (const char* env = std::getenv("BASICCS_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (...) {
    }
  }
  return omp_get_num_procs();
}

}  // namespace basiccs::kernels
