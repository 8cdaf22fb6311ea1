#pragma once

#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "basiccs/density.hpp"
#include "basiccs/model.hpp"

namespace fixtures {

using namespace basiccs;

/// Random mixed-type dataset with the given column kinds and both arms present.
inline Dataset random_dataset(Eigen::Index n, const std::vector<FeatureKind>& kinds, bool binary_outcome,
                              std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  std::bernoulli_distribution coin(0.5);
  Dataset ds;
  const auto D = static_cast<Eigen::Index>(kinds.size());
  ds.X.resize(n, D);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double shift = i % 2 == 0 ? -1.0 : 1.0;
    for (Eigen::Index d = 0; d < D; ++d) {
      ds.X(i, d) = kinds[static_cast<std::size_t>(d)] == FeatureKind::binary ? (coin(rng) ? 1.0 : 0.0)
                                                                             : shift + n01(rng);
    }
  }
  ds.column_kinds = kinds;
  for (Eigen::Index d = 0; d < D; ++d) ds.column_names.push_back("x" + std::to_string(d + 1));
  ds.a.resize(static_cast<std::size_t>(n));
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.a[static_cast<std::size_t>(i)] = static_cast<int>(i % 3 == 0);
    ds.y[i] = binary_outcome ? (coin(rng) ? 1.0 : 0.0) : ds.X(i, 0) + 0.5 * n01(rng);
  }
  ds.outcome.tag = binary_outcome ? OutcomeType::Tag::binary : OutcomeType::Tag::continuous;
  ds.row_ids.resize(static_cast<std::size_t>(n));
  std::iota(ds.row_ids.begin(), ds.row_ids.end(), std::size_t{0});
  return ds;
}

inline GpHyper small_hyper(Eigen::Index dims) {
  GpHyper h;
  h.alpha = 0.8;
  h.rho = VectorXd::Constant(dims, 1.5);
  h.noise_sd = 0.3;
  return h;
}

/// Random parameter point on the unconstrained layout of `m`.
inline VectorXd random_point(const ParamLayout& layout, std::uint64_t seed, double scale = 0.7) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  VectorXd u(layout.size());
  for (auto& v : u) v = scale * n01(rng);
  return u;
}

struct Instance {
  Dataset ds;
  ModelStructure structure;
  PopulationReference ref;
  PriorConfig priors;
  GpHyper hyper;
  MatrixXd chol;
};

inline Instance make_instance(Eigen::Index n, int K, bool feature_selection, bool binary_outcome, std::uint64_t seed) {
  Instance in;
  in.ds = random_dataset(n, {FeatureKind::continuous, FeatureKind::binary, FeatureKind::continuous}, binary_outcome,
                         seed);
  in.structure.K = K;
  in.structure.kinds = in.ds.column_kinds;
  in.structure.outcome = in.ds.outcome;
  in.structure.feature_selection = feature_selection;
  in.ref = PopulationReference::from_dataset(in.ds);
  in.priors.sigma_halfnormal_sd = 1.0;
  in.hyper = small_hyper(in.ds.dims());
  const GpLatent lat = make_latent(in.ds.X, in.hyper, VectorXd::Zero(n));
  in.chol = lat.chol;
  return in;
}

inline DensityContext context_of(const Instance& in, double offset = 0.1) {
  DensityContext ctx;
  ctx.ds = &in.ds;
  ctx.ref = in.ref;
  ctx.priors = in.priors;
  ctx.structure = in.structure;
  ctx.chol = in.chol;
  ctx.mu0_offset = offset;
  return ctx;
}

/// Globals for the model-level functions from constrained parameters.
inline GlobalParams globals_of(const Instance& in, const ConstrainedParams& p, double offset = 0.1) {
  GlobalParams g;
  g.pi = p.pi;
  g.sigma0 = p.sigma0;
  g.sigma1 = p.sigma1;
  g.mu0_offset = offset;
  g.gp_hyper = in.hyper;
  g.gp_latent.train_inputs = in.ds.X;
  g.gp_latent.chol = in.chol;
  g.gp_latent.whitened = p.eta;
  g.gp_latent.values = in.chol * p.eta;
  return g;
}

}  // namespace fixtures
