#include <cstdlib>

#include <omp.h>

#include "doctest.h"

#include "basiccs/kernels.hpp"
#include "fixtures.hpp"

using namespace basiccs;

namespace {

struct ThreadGuard {
  int saved = omp_get_max_threads();
  explicit ThreadGuard(int n) { omp_set_num_threads(n); }
  ~ThreadGuard() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("parallel kernel_matrix is bit-identical to the serial reference") {
  ThreadGuard threads(4);
  const auto ds = fixtures::random_dataset(700, {FeatureKind::continuous, FeatureKind::continuous, FeatureKind::binary},
                                           false, 1);
  const MatrixXd X2 = ds.X.topRows(300);
  for (auto kind : {KernelKind::se_ard, KernelKind::linear}) {
    GpHyper h = fixtures::small_hyper(3);
    h.kernel = kind;
    CHECK(kernels::serial::kernel_matrix(ds.X, X2, h) == kernels::parallel::kernel_matrix(ds.X, X2, h));
    CHECK(kernels::serial::kernel_matrix(ds.X, ds.X, h) == kernels::parallel::kernel_matrix(ds.X, ds.X, h));
    // The dispatching wrapper takes the parallel path here and must not differ either.
    CHECK(kernel_matrix(ds.X, X2, h, false) == kernels::serial::kernel_matrix(ds.X, X2, h));
  }
}

TEST_CASE("parallel pointwise log-likelihoods are bit-identical to the serial reference") {
  ThreadGuard threads(4);
  for (bool binary : {false, true}) {
    for (bool fs : {false, true}) {
      const auto in = fixtures::make_instance(600, 3, fs, binary, 2);
      const ParamLayout layout(in.structure, 600);
      const ConstrainedParams p = constrain(layout, fixtures::random_point(layout, 3));
      const GlobalParams g = fixtures::globals_of(in, p);
      for (bool include_outcome : {false, true}) {
        const MatrixXd s = kernels::serial::pointwise_logliks(in.ds, p.clusters, g, in.ref, in.structure, include_outcome);
        const MatrixXd q = kernels::parallel::pointwise_logliks(in.ds, p.clusters, g, in.ref, in.structure, include_outcome);
        CHECK(s == q);
        CHECK(pointwise_cluster_logliks(in.ds, p.clusters, g, in.ref, in.structure, include_outcome) == s);
      }
    }
  }
}

TEST_CASE("results do not depend on the thread count") {
  const auto in = fixtures::make_instance(500, 2, true, false, 4);
  const ParamLayout layout(in.structure, 500);
  const ConstrainedParams p = constrain(layout, fixtures::random_point(layout, 5));
  const GlobalParams g = fixtures::globals_of(in, p);
  MatrixXd ref;
  {
    ThreadGuard one(1);
    ref = kernels::parallel::pointwise_logliks(in.ds, p.clusters, g, in.ref, in.structure, true);
  }
  for (int t : {2, 3, 8}) {
    ThreadGuard many(t);
    CHECK(kernels::parallel::pointwise_logliks(in.ds, p.clusters, g, in.ref, in.structure, true) == ref);
  }
}

TEST_CASE("configured_threads honors BASICCS_THREADS") {
  const char* old = std::getenv("BASICCS_THREADS");
  const std::string saved = old ? old : "";
  setenv("BASICCS_THREADS", "3", 1);
  CHECK(kernels::configured_threads() == 3);
  setenv("BASICCS_THREADS", "0", 1);
  CHECK(kernels::configured_threads() >= 1);
  unsetenv("BASICCS_THREADS");
  CHECK(kernels::configured_threads() >= 1);
  if (old) setenv("BASICCS_THREADS", saved.c_str(), 1);
}
