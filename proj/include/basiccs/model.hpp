#pragma once

#include <vector>

#include "basiccs/data.hpp"
#include "basiccs/gp.hpp"
#include "basiccs/numeric.hpp"

namespace basiccs {

using RowRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

/// Parameters of one mixture component. Per dimension, continuous columns
/// read (theta_mu, theta_sd) and binary columns read theta_p; the other
/// entries are carried but ignored.
struct ClusterParams {
  VectorXd theta_mu;
  VectorXd theta_sd;
  VectorXd theta_p;
  VectorXd gamma;
  double beta = 0.0;

  static ClusterParams neutral(Eigen::Index dims);
};

/// Population means / prevalences the selection weights shrink toward.
struct PopulationReference {
  VectorXd theta0_mu;
  VectorXd theta0_p;

  static PopulationReference from_dataset(const Dataset& ds);
};

struct GlobalParams {
  VectorXd pi;
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  /// Fixed baseline added to the latent control surface (control-arm mean,
  /// or control-arm log odds for binary outcomes).
  double mu0_offset = 0.0;
  GpLatent gp_latent;
  GpHyper gp_hyper;
};

struct PriorConfig {
  /// Per-cluster prior means of beta; empty means all zero, a single entry
  /// is broadcast.
  std::vector<double> beta_prior_mean;
  double beta_prior_sd = 1.0;
  double sigma_halfnormal_sd = 0.01;
  double gamma_beta_a = 0.5;
  double gamma_beta_b = 0.5;
  double pi_dirichlet_conc = 1.0;
  /// Cluster means ~ Normal(theta0_mu, sd) on the standardized scale.
  double theta_mu_prior_sd = 1.0;
  double theta_sd_halfnormal_sd = 5.0;
  double theta_p_beta_a = 1.0;
  double theta_p_beta_b = 1.0;

  double beta_mean(int k) const;
  void validate(int K) const;
};

struct ModelStructure {
  int K = 1;
  std::vector<FeatureKind> kinds;
  OutcomeType outcome;
  bool feature_selection = true;
};

/// gamma * theta_k + (1 - gamma) * theta_0.
double composite_blend(double theta_k, double theta_0, double gamma);

/// Per-dimension location actually used by the likelihood: the blended mean
/// for continuous columns, the blended prevalence for binary ones.
VectorXd composite_location(const ClusterParams& c, const PopulationReference& ref,
                            const ModelStructure& m);

double covariate_loglik(const RowRef& x, const ClusterParams& c, const PopulationReference& ref,
                        const ModelStructure& m);

/// `mu0` is the full control linear predictor (offset included).
double outcome_loglik(double y, int a, double mu0, double tau, double sigma0, double sigma1,
                      const OutcomeType& outcome);

/// N x K matrix of log pi_k + covariate loglik [+ outcome loglik].
MatrixXd pointwise_cluster_logliks(const Dataset& ds, const std::vector<ClusterParams>& clusters,
                                   const GlobalParams& globals, const PopulationReference& ref,
                                   const ModelStructure& m, bool include_outcome);

double log_likelihood(const Dataset& ds, const std::vector<ClusterParams>& clusters,
                      const GlobalParams& globals, const PopulationReference& ref,
                      const ModelStructure& m);

double log_prior(const std::vector<ClusterParams>& clusters, const GlobalParams& globals,
                 const PopulationReference& ref, const PriorConfig& priors,
                 const ModelStructure& m);

/// Sum over rows of logsumexp over clusters plus the log prior.
double log_joint(const Dataset& ds, const std::vector<ClusterParams>& clusters,
                 const GlobalParams& globals, const PopulationReference& ref,
                 const PriorConfig& priors, const ModelStructure& m);

/// Row-wise softmax.
MatrixXd responsibilities(const MatrixXd& pointwise);

}  // namespace basiccs
