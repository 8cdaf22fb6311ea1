#pragma once

#include <string>
#include <vector>

#include "basiccs/model.hpp"

namespace basiccs {

/// A named contiguous block of the unconstrained vector.
struct ParamSlice {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
};

/// Index map of the flat unconstrained vector:
///   K-1 softmax logits (last logit pinned at 0),
///   per cluster: per dim (mu, log sd) or logit p, then D logit gammas when
///   feature selection is on, then beta,
///   log sigma0, log sigma1 (continuous outcome only),
///   N whitened GP coordinates.
class ParamLayout {
 public:
  ParamLayout() = default;
  ParamLayout(const ModelStructure& m, Eigen::Index n_rows);

  Eigen::Index size() const { return size_; }
  int K() const { return m_.K; }
  Eigen::Index dims() const { return static_cast<Eigen::Index>(m_.kinds.size()); }
  Eigen::Index n_rows() const { return n_rows_; }
  const ModelStructure& structure() const { return m_; }

  Eigen::Index pi_offset() const { return 0; }
  Eigen::Index cluster_offset(int k) const { return cluster_base_ + k * cluster_stride_; }
  /// Offset of dimension d inside a cluster block.
  Eigen::Index dim_offset(Eigen::Index d) const { return dim_offsets_[static_cast<std::size_t>(d)]; }
  Eigen::Index gamma_offset() const { return gamma_rel_; }
  Eigen::Index beta_offset() const { return beta_rel_; }
  Eigen::Index cluster_stride() const { return cluster_stride_; }
  /// -1 for binary outcomes.
  Eigen::Index sigma_offset() const { return sigma_offset_; }
  Eigen::Index eta_offset() const { return eta_offset_; }

  std::vector<ParamSlice> slices() const;

 private:
  ModelStructure m_;
  Eigen::Index n_rows_ = 0;
  std::vector<Eigen::Index> dim_offsets_;
  Eigen::Index gamma_rel_ = -1;
  Eigen::Index beta_rel_ = 0;
  Eigen::Index cluster_stride_ = 0;
  Eigen::Index cluster_base_ = 0;
  Eigen::Index sigma_offset_ = -1;
  Eigen::Index eta_offset_ = 0;
  Eigen::Index size_ = 0;
};

/// Parameters on their natural scale. Entries a dimension does not consult
/// hold neutral values (mu 0, sd 1, p 0.5); gamma is 1 without feature selection.
struct ConstrainedParams {
  std::vector<ClusterParams> clusters;
  VectorXd pi;
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  VectorXd eta;
};

/// Maps an unconstrained vector to parameters; adds the log absolute
/// Jacobian determinant to `log_jacobian` when non-null.
ConstrainedParams constrain(const ParamLayout& layout, const VectorXd& u, double* log_jacobian = nullptr);
VectorXd unconstrain(const ParamLayout& layout, const ConstrainedParams& p);

}  // namespace basiccs
