// Serial reference vs OpenMP kernels. Thread count follows BASICCS_THREADS /
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "basiccs/kernels.hpp"
#include "basiccs/simgen.hpp"

using namespace basiccs;

namespace {

struct Setup {
  Dataset ds;
  std::vector<ClusterParams> clusters;
  GlobalParams globals;
  PopulationReference ref;
  ModelStructure structure;
};

Setup make_setup(int n) {
  ScenarioSpec spec;
  spec.scenario = Scenario::simhte;
  spec.n = n;
  spec.seed = 1;
  Setup s;
  s.ds = standardize(simulate(spec).data);
  const int K = 5;
  s.structure.K = K;
  s.structure.kinds = s.ds.column_kinds;
  s.structure.outcome = s.ds.outcome;
  s.ref = PopulationReference::from_dataset(s.ds);
  for (int k = 0; k < K; ++k) {
    ClusterParams c = ClusterParams::neutral(s.ds.dims());
    c.theta_mu.setConstant(0.3 * (k - 2));
    c.gamma.setConstant(0.5);
    c.beta = k - 2.0;
    s.clusters.push_back(c);
  }
  s.globals.pi = VectorXd::Constant(K, 1.0 / K);
  s.globals.gp_hyper.alpha = 1.0;
  s.globals.gp_hyper.rho = VectorXd::Constant(s.ds.dims(), 2.0);
  s.globals.gp_latent.values = VectorXd::Zero(s.ds.rows());
  s.globals.gp_latent.train_inputs = s.ds.X;
  return s;
}

GpHyper se_hyper(Eigen::Index dims) {
  GpHyper h;
  h.alpha = 1.0;
  h.rho = VectorXd::Constant(dims, 1.5);
  return h;
}

void BM_kernel_matrix_serial(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)));
  const GpHyper h = se_hyper(s.ds.dims());
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::kernel_matrix(s.ds.X, s.ds.X, h));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_kernel_matrix_parallel(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)));
  const GpHyper h = se_hyper(s.ds.dims());
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::kernel_matrix(s.ds.X, s.ds.X, h));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_pointwise_serial(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::serial::pointwise_logliks(s.ds, s.clusters, s.globals, s.ref, s.structure, true));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_pointwise_parallel(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::parallel::pointwise_logliks(s.ds, s.clusters, s.globals, s.ref, s.structure, true));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_kernel_matrix_serial)->Arg(256)->Arg(1024)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kernel_matrix_parallel)->Arg(256)->Arg(1024)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_pointwise_serial)->Arg(1200)->Arg(4800)->Arg(19200)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_pointwise_parallel)->Arg(1200)->Arg(4800)->Arg(19200)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
