#pragma once

#include "basiccs/layout.hpp"
#include "basiccs/vi.hpp"

namespace basiccs {

/// Everything the joint density needs besides the parameters themselves.
struct DensityContext {
  const Dataset* ds = nullptr;
  PopulationReference ref;
  PriorConfig priors;
  ModelStructure structure;
  /// Lower Cholesky factor of the control-surface prior over the rows of ds.
  MatrixXd chol;
  double mu0_offset = 0.0;
};

/// Log joint plus log Jacobian on the unconstrained layout, with the analytic
/// gradient.
class BasiccsDensity final : public LogDensity {
 public:
  explicit BasiccsDensity(DensityContext ctx);

  Eigen::Index dim() const override { return layout_.size(); }
  double log_density(const VectorXd& u, VectorXd* grad) const override;

  const ParamLayout& layout() const { return layout_; }
  const DensityContext& context() const { return ctx_; }

  /// N x K responsibilities with the outcome term included.
  MatrixXd responsibilities_at(const VectorXd& u) const;

 private:
  double evaluate(const VectorXd& u, VectorXd* grad, MatrixXd* resp) const;

  DensityContext ctx_;
  ParamLayout layout_;
};

}  // namespace basiccs
