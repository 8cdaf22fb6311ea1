#pragma once

// Data-parallel hot loops. Every kernel has a serial reference version and
// an OpenMP version computing each output entry with the same arithmetic,
// so the two agree bit for bit.

#include <vector>

#include "basiccs/gp.hpp"
#include "basiccs/model.hpp"

namespace basiccs::kernels {

/// Row count above which the dispatching wrappers use the OpenMP path.
inline constexpr Eigen::Index kParallelThreshold = 256;

namespace serial {
MatrixXd kernel_matrix(const MatrixXd& X, const MatrixXd& X2, const GpHyper& hyper);
MatrixXd pointwise_logliks(const Dataset& ds, const std::vector<ClusterParams>& clusters,
                           const GlobalParams& globals, const PopulationReference& ref,
                           const ModelStructure& m, bool include_outcome);
}  // namespace serial

namespace parallel {
MatrixXd kernel_matrix(const MatrixXd& X, const MatrixXd& X2, const GpHyper& hyper);
MatrixXd pointwise_logliks(const Dataset& ds, const std::vector<ClusterParams>& clusters,
                           const GlobalParams& globals, const PopulationReference& ref,
                           const ModelStructure& m, bool include_outcome);
}  // namespace parallel

/// Number of worker threads honoring BASICCS_THREADS, defaulting to the
/// number of logical processors.
int configured_threads();

}  // namespace basiccs::kernels
