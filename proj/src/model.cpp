#include "basiccs/model.hpp"

#include <string>

#include "basiccs/error.hpp"
#include "basiccs/kernels.hpp"

namespace basiccs {

ClusterParams ClusterParams::neutral(Eigen::Index dims) {
  ClusterParams c;
  c.theta_mu = VectorXd::Zero(dims);
  c.theta_sd = VectorXd::Ones(dims);
  c.theta_p = VectorXd::Constant(dims, 0.5);
  c.gamma = VectorXd::Constant(dims, 0.5);
  return c;
}

PopulationReference PopulationReference::from_dataset(const Dataset& ds) {
  PopulationReference ref;
  const auto D = ds.dims();
  ref.theta0_mu = VectorXd::Zero(D);
  ref.theta0_p = VectorXd::Constant(D, 0.5);
  if (ds.rows() == 0) return ref;
  const VectorXd means = ds.X.colwise().mean().transpose();
  for (Eigen::Index d = 0; d < D; ++d) {
    if (ds.column_kinds[static_cast<std::size_t>(d)] == FeatureKind::binary) {
      ref.theta0_p[d] = means[d];
    } else {
      ref.theta0_mu[d] = means[d];
    }
  }
  return ref;
}

double PriorConfig::beta_mean(int k) const {
  if (beta_prior_mean.empty()) return 0.0;
  if (beta_prior_mean.size() == 1) return beta_prior_mean.front();
  return beta_prior_mean.at(static_cast<std::size_t>(k));
}

void PriorConfig::validate(int K) const {
  if (beta_prior_mean.size() > 1 && beta_prior_mean.size() != static_cast<std::size_t>(K)) {
    throw UsageError("beta_prior_mean must have 0, 1 or K entries");
  }
  for (double v : {beta_prior_sd, sigma_halfnormal_sd, gamma_beta_a, gamma_beta_b, pi_dirichlet_conc,
                   theta_mu_prior_sd, theta_sd_halfnormal_sd, theta_p_beta_a, theta_p_beta_b}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("prior hyperparameters must be positive and finite");
  }
}

double composite_blend(double theta_k, double theta_0, double gamma) {
  return gamma * theta_k + (1.0 - gamma) * theta_0;
}

VectorXd composite_location(const ClusterParams& c, const PopulationReference& ref, const ModelStructure& m) {
  const auto D = static_cast<Eigen::Index>(m.kinds.size());
  VectorXd out(D);
  for (Eigen::Index d = 0; d < D; ++d) {
    const bool binary = m.kinds[static_cast<std::size_t>(d)] == FeatureKind::binary;
    const double own = binary ? c.theta_p[d] : c.theta_mu[d];
    const double pop = binary ? ref.theta0_p[d] : ref.theta0_mu[d];
    out[d] = m.feature_selection ? composite_blend(own, pop, c.gamma[d]) : own;
  }
  return out;
}

double covariate_loglik(const RowRef& x, const ClusterParams& c, const PopulationReference& ref,
                        const ModelStructure& m) {
  const auto D = static_cast<Eigen::Index>(m.kinds.size());
  double total = 0.0;
  for (Eigen::Index d = 0; d < D; ++d) {
    const double g = c.gamma[d];
    if (m.kinds[static_cast<std::size_t>(d)] == FeatureKind::binary) {
      const double xd = x[d];
      if (xd != 0.0 && xd != 1.0) {
        throw DataError("binary covariate outside {0,1} in column " + std::to_string(d));
      }
      double p = c.theta_p[d];
      double q = 1.0 - p;
      if (m.feature_selection) {
        // 1 - blend computed as its own blend to avoid cancellation near 1.
        q = g * (1.0 - c.theta_p[d]) + (1.0 - g) * (1.0 - ref.theta0_p[d]);
        p = composite_blend(c.theta_p[d], ref.theta0_p[d], g);
      }
      total += xd == 1.0 ? std::log(p) : std::log(q);
    } else {
      const double mean = m.feature_selection ? composite_blend(c.theta_mu[d], ref.theta0_mu[d], g) : c.theta_mu[d];
      total += normal_logpdf(x[d], mean, c.theta_sd[d]);
    }
  }
  return total;
}

double outcome_loglik(double y, int a, double mu0, double tau, double sigma0, double sigma1,
                      const OutcomeType& outcome) {
  if (!std::isfinite(y) || !std::isfinite(mu0) || !std::isfinite(tau)) {
    throw NumericalError("outcome_loglik: non-finite input");
  }
  const double t = mu0 + (a == 1 ? tau : 0.0);
  if (outcome.is_binary()) {
    if (y != 0.0 && y != 1.0) throw DataError("binary outcome outside {0,1}");
    return y == 1.0 ? log_sigmoid(t) : log_sigmoid(-t);
  }
  return normal_logpdf(y, t, a == 1 ? sigma1 : sigma0);
}

MatrixXd pointwise_cluster_logliks(const Dataset& ds, const std::vector<ClusterParams>& clusters,
                                   const GlobalParams& globals, const PopulationReference& ref,
                                   const ModelStructure& m, bool include_outcome) {
  if (static_cast<std::size_t>(ds.dims()) != m.kinds.size()) {
    throw SchemaError("dataset has " + std::to_string(ds.dims()) + " encoded columns, model expects " +
                      std::to_string(m.kinds.size()));
  }
  if (clusters.size() != static_cast<std::size_t>(globals.pi.size())) {
    throw UsageError("cluster count does not match mixture weights");
  }
  // Domain checks up front: the row kernels must not throw inside parallel regions.
  for (Eigen::Index d = 0; d < ds.dims(); ++d) {
    if (m.kinds[static_cast<std::size_t>(d)] != FeatureKind::binary) continue;
    for (Eigen::Index n = 0; n < ds.rows(); ++n) {
      const double v = ds.X(n, d);
      if (v != 0.0 && v != 1.0) {
        throw DataError("binary covariate outside {0,1} at row " + std::to_string(n) + ", column " +
                        std::to_string(d));
      }
    }
  }
  if (include_outcome) {
    if (globals.gp_latent.values.size() != ds.rows()) {
      throw UsageError("latent control surface does not cover the dataset rows");
    }
    if (!ds.y.allFinite() || !globals.gp_latent.values.allFinite()) {
      throw NumericalError("non-finite outcome or latent control value");
    }
    if (m.outcome.is_binary()) {
      for (Eigen::Index n = 0; n < ds.rows(); ++n) {
        if (ds.y[n] != 0.0 && ds.y[n] != 1.0) throw DataError("binary outcome outside {0,1} at row " + std::to_string(n));
      }
    }
  }
  return ds.rows() >= kernels::kParallelThreshold
             ? kernels::parallel::pointwise_logliks(ds, clusters, globals, ref, m, include_outcome)
             : kernels::serial::pointwise_logliks(ds, clusters, globals, ref, m, include_outcome);
}

double log_likelihood(const Dataset& ds, const std::vector<ClusterParams>& clusters, const GlobalParams& globals,
                      const PopulationReference& ref, const ModelStructure& m) {
  const MatrixXd P = pointwise_cluster_logliks(ds, clusters, globals, ref, m, true);
  double total = 0.0;
  for (Eigen::Index n = 0; n < P.rows(); ++n) {
    const Eigen::RowVectorXd row = P.row(n);
    const double v = log_sum_exp({row.data(), static_cast<std::size_t>(row.size())});
    if (!std::isfinite(v)) throw NumericalError("non-finite log likelihood at row " + std::to_string(n));
    total += v;
  }
  return total;
}

double log_prior(const std::vector<ClusterParams>& clusters, const GlobalParams& globals,
                 const PopulationReference& ref, const PriorConfig& priors, const ModelStructure& m) {
  double lp = dirichlet_logpdf(as_span(globals.pi), priors.pi_dirichlet_conc);
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto& c = clusters[k];
    lp += normal_logpdf(c.beta, priors.beta_mean(static_cast<int>(k)), priors.beta_prior_sd);
    for (std::size_t d = 0; d < m.kinds.size(); ++d) {
      const auto di = static_cast<Eigen::Index>(d);
      if (m.kinds[d] == FeatureKind::binary) {
        lp += beta_logpdf(c.theta_p[di], priors.theta_p_beta_a, priors.theta_p_beta_b);
      } else {
        lp += normal_logpdf(c.theta_mu[di], ref.theta0_mu[di], priors.theta_mu_prior_sd);
        lp += half_normal_logpdf(c.theta_sd[di], priors.theta_sd_halfnormal_sd);
      }
      if (m.feature_selection) lp += beta_logpdf(c.gamma[di], priors.gamma_beta_a, priors.gamma_beta_b);
    }
  }
  if (!m.outcome.is_binary()) {
    lp += half_normal_logpdf(globals.sigma0, priors.sigma_halfnormal_sd);
    lp += half_normal_logpdf(globals.sigma1, priors.sigma_halfnormal_sd);
  }
  const auto& eta = globals.gp_latent.whitened;
  lp += -0.5 * eta.squaredNorm() - 0.5 * static_cast<double>(eta.size()) * kLogTwoPi;
  return lp;
}

double log_joint(const Dataset& ds, const std::vector<ClusterParams>& clusters, const GlobalParams& globals,
                 const PopulationReference& ref, const PriorConfig& priors, const ModelStructure& m) {
  return log_likelihood(ds, clusters, globals, ref, m) + log_prior(clusters, globals, ref, priors, m);
}

MatrixXd responsibilities(const MatrixXd& pointwise) {
  MatrixXd R(pointwise.rows(), pointwise.cols());
  for (Eigen::Index n = 0; n < pointwise.rows(); ++n) {
    const double mx = pointwise.row(n).maxCoeff();
    if (!std::isfinite(mx)) throw NumericalError("responsibilities: non-finite row " + std::to_string(n));
    R.row(n) = (pointwise.row(n).array() - mx).exp();
    R.row(n) /= R.row(n).sum();
  }
  return R;
}

}  // namespace basiccs
