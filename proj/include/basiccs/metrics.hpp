#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "basiccs/fit.hpp"

namespace basiccs {

/// Covariate-only cluster membership. Labels are 0-based.
struct Assignment {
  MatrixXd probs;
  std::vector<int> hard;
  std::vector<bool> tie_broken;
};

/// Row-wise argmax with ties broken toward the lowest index and flagged.
Assignment assignment_from_probs(MatrixXd probs);
Assignment assign(const FitResult& model, const Dataset& ds);

enum class IteMode { soft, hard };

VectorXd predict_ite(const Assignment& assignment, const VectorXd& tau_hat, IteMode mode);
VectorXd predict_ite(const FitResult& model, const Dataset& ds, IteMode mode);

/// Full control linear predictor (offset included) at the rows of ds.
VectorXd predict_mu0(const FitResult& model, const Dataset& ds);

double ari(std::span<const int> labels_a, std::span<const int> labels_b);
double pehe(const VectorXd& tau_hat, const VectorXd& tau_true);

struct SateEstimate {
  int cluster = 0;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  bool defined = false;
  /// Difference in means (continuous) or log odds ratio (binary).
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  /// Binary outcome only: odds ratio scale, 2x2 counts and zero-cell flag.
  double odds_ratio = 0.0;
  double or_ci_low = 0.0;
  double or_ci_high = 0.0;
  std::size_t treated_events = 0;
  std::size_t treated_nonevents = 0;
  std::size_t control_events = 0;
  std::size_t control_nonevents = 0;
  bool haldane = false;
};

/// Per-cluster effect estimates with 95% Wald intervals from hard labels.
std::vector<SateEstimate> sate(const Dataset& ds, std::span<const int> labels, int K);

struct PolicyRisk {
  double value = 0.0;
  /// Concordant group empty; the overall arm mean stood in.
  bool treat_group_imputed = false;
  bool control_group_imputed = false;
};

/// Treat iff tau_hat > 0; ties go to control.
PolicyRisk policy_risk(const Dataset& ds, const VectorXd& tau_hat);

/// RMSE of the predicted control surface on control rows (continuous) or
/// accuracy of 1{logistic(mu0) > 0.5} (binary).
double control_fit_metric(const Dataset& ds, const VectorXd& mu0_hat);

struct MetricsReport {
  int K = 0;
  std::string outcome;
  std::size_t n = 0;
  std::optional<double> ari;
  std::optional<double> pehe;
  std::vector<SateEstimate> sate;
  std::optional<std::pair<double, double>> sate_range;
  PolicyRisk policy_risk;
  std::optional<double> control_rmse;
  std::optional<double> control_accuracy;
  std::size_t assignment_ties = 0;
};

MetricsReport evaluate(const FitResult& model, const Dataset& ds);

/// Per-covariate profile on the original scale: reference max/min (95% and
/// 5% quantiles for continuous, 1/0 for binary), population mean, empirical
/// cluster means under hard labels and the model's blended cluster locations.
std::string profile_csv(const FitResult& model, const Dataset& ds, std::span<const int> labels);

}  // namespace basiccs
