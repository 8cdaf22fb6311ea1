#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "basiccs/model.hpp"
#include "basiccs/vi.hpp"

namespace basiccs {

struct ModelConfig {
  int K = 3;
  OutcomeType outcome;
  KernelKind kernel = KernelKind::se_ard;
  bool feature_selection = true;
  PriorConfig priors;
  int restarts = 8;
  int max_iters = 5000;
  int mc_samples = 1;
  double base_step = 0.05;
  std::uint64_t seed = 0;

  /// Iteration budget of the control-arm hyperparameter fit.
  int gp_budget = 200;
  /// Control rows used by the hyperparameter fit; larger arms are subsampled.
  int gp_max_rows = 800;
  /// Per-restart jitter of initial cluster means, in units of the component sd.
  double init_jitter = 0.25;

  void validate() const;
};

struct RestartSummary {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double final_elbo = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string error;
};

struct FitResult {
  ModelStructure structure;
  PriorConfig priors;
  PopulationReference ref;
  VariationalPosterior posterior;
  /// Constrained parameters at the posterior mean.
  std::vector<ClusterParams> clusters;
  GlobalParams globals;
  std::vector<double> elbo_trace;
  double final_elbo = 0.0;
  MatrixXd responsibilities;
  std::uint64_t seed = 0;
  std::vector<RestartSummary> restarts;
  int best_restart = 0;

  VectorXd tau() const;
};

/// Hyperparameters of the control surface fitted on the control arm, with
/// the offset the surface is measured from.
struct ControlPrefit {
  GpHyper hyper;
  double offset = 0.0;
};

ControlPrefit prefit_control_surface(const Dataset& ds, const ModelConfig& config);

/// Runs the GP prefit (unless `prefit` is given) and the multi-restart VI,
/// returning the restart with the highest final smoothed ELBO.
FitResult fit(const Dataset& ds, const ModelConfig& config, const std::optional<ControlPrefit>& prefit = {});

/// Initial variational posterior of one restart; exposed for tests.
VariationalPosterior initial_posterior(const Dataset& ds, const ModelConfig& config, const ControlPrefit& prefit,
                                       const MatrixXd& chol, int restart);

}  // namespace basiccs
