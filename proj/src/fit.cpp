#include "basiccs/fit.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "basiccs/density.hpp"
#include "basiccs/error.hpp"
#include "basiccs/gmm.hpp"
#include "basiccs/kernels.hpp"

namespace basiccs {

namespace {

constexpr double kInitLogSd = -2.3;
constexpr double kBetaInitSd = 0.1;
constexpr double kMinInitWeight = 1e-3;

struct RidgeState {
  VectorXd eta;
  /// y minus the initial control surface, on the linear-predictor scale.
  VectorXd residual;
  double noise_var = 1.0;
};

/// Outcome on the linear-predictor scale relative to the offset. Binary
/// outcomes are linearized around the control prevalence.
VectorXd linearized_outcome(const Dataset& ds, const ControlPrefit& prefit) {
  if (!ds.outcome.is_binary()) return ds.y.array() - prefit.offset;
  const double p = sigmoid(prefit.offset);
  return (ds.y.array() - p) / (p * (1.0 - p));
}

RidgeState ridge_state(const Dataset& ds, const ControlPrefit& prefit, const MatrixXd& chol) {
  const auto ctrl = ds.arm_rows(0);
  const VectorXd z = linearized_outcome(ds, prefit);
  VectorXd zc(static_cast<Eigen::Index>(ctrl.size()));
  for (std::size_t i = 0; i < ctrl.size(); ++i) zc[static_cast<Eigen::Index>(i)] = z[static_cast<Eigen::Index>(ctrl[i])];
  RidgeState s;
  s.eta = whitened_ridge_fit(chol, ctrl, zc, prefit.hyper.noise_sd);
  s.residual = z - chol.triangularView<Eigen::Lower>() * s.eta;
  s.noise_var = prefit.hyper.noise_sd * prefit.hyper.noise_sd;
  return s;
}

/// Sufficient statistics of one initial component.
struct Component {
  double n = 0.0;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;
  double treated = 0.0;
  double resid_sum = 0.0;
};

double covariate_merge_cost(const Component& a, const Component& b, Component& merged, double floor) {
  merged.n = a.n + b.n;
  merged.mean = (a.n * a.mean + b.n * b.mean) / merged.n;
  const Eigen::RowVectorXd second = (a.n * (a.var.array() + a.mean.array().square()) +
                                     b.n * (b.var.array() + b.mean.array().square())) /
                                    merged.n;
  merged.var = (second.array() - merged.mean.array().square()).max(floor).matrix();
  merged.treated = a.treated + b.treated;
  merged.resid_sum = a.resid_sum + b.resid_sum;
  return 0.5 * (merged.n * merged.var.array().log().sum() - a.n * a.var.array().log().sum() -
                b.n * b.var.array().log().sum());
}

double outcome_merge_cost(const Component& a, const Component& b, double noise_var) {
  if (a.treated <= 0.0 || b.treated <= 0.0) return 0.0;
  const double diff = a.resid_sum / a.treated - b.resid_sum / b.treated;
  return a.treated * b.treated / (a.treated + b.treated) * diff * diff / (2.0 * noise_var);
}

/// Greedy pairwise merging down to K components, cheapest combined
/// covariate and treated-residual likelihood loss first.
std::vector<Component> merge_down(std::vector<Component> comps, int K, double noise_var, double floor) {
  while (static_cast<int>(comps.size()) > K) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 1;
    Component best_merged;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      for (std::size_t j = i + 1; j < comps.size(); ++j) {
        Component m;
        const double cost =
            covariate_merge_cost(comps[i], comps[j], m, floor) + outcome_merge_cost(comps[i], comps[j], noise_var);
        if (cost < best) {
          best = cost;
          bi = i;
          bj = j;
          best_merged = std::move(m);
        }
      }
    }
    comps[bi] = std::move(best_merged);
    comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return comps;
}

VariationalPosterior initial_posterior_impl(const Dataset& ds, const ModelConfig& config, const ControlPrefit& prefit,
                                            const RidgeState& ridge, const ParamLayout& layout, int restart) {
  const int K = config.K;
  const auto N = ds.rows();
  const auto D = ds.dims();
  const auto r = static_cast<std::uint64_t>(restart);
  Rng rng(derive_seed(config.seed, 1000 + r));
  const GmmOptions gopts;

  int Kr = K > 1 ? K + restart % 3 : 1;
  if (Kr > N / 4) Kr = K;
  GmmResult g;
  try {
    g = gmm_em(ds.X, Kr, derive_seed(config.seed, 2000 + r), gopts);
  } catch (const NumericalError&) {
    if (Kr == K) throw;
    Kr = K;
    g = gmm_em(ds.X, Kr, derive_seed(config.seed, 2000 + r), gopts);
  }

  const Eigen::ArrayXd treated = Eigen::Map<const Eigen::ArrayXi>(ds.a.data(), N).cast<double>();
  std::vector<Component> comps(static_cast<std::size_t>(Kr));
  for (int k = 0; k < Kr; ++k) {
    auto& c = comps[static_cast<std::size_t>(k)];
    const Eigen::ArrayXd w = g.resp.col(k).array();
    c.n = std::max(w.sum(), 1e-9);
    c.mean = g.means.row(k);
    c.var = g.sds.row(k).array().square().matrix();
    c.treated = (w * treated).sum();
    c.resid_sum = (w * treated * ridge.residual.array()).sum();
  }
  comps = merge_down(std::move(comps), K, ridge.noise_var, gopts.min_variance);

  ConstrainedParams p;
  p.pi.resize(K);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& m = layout.structure();
  for (int k = 0; k < K; ++k) {
    const auto& c = comps[static_cast<std::size_t>(k)];
    p.pi[k] = std::max(c.n / static_cast<double>(N), kMinInitWeight);
    ClusterParams cp = ClusterParams::neutral(D);
    cp.gamma.setConstant(m.feature_selection ? 0.5 : 1.0);
    for (Eigen::Index d = 0; d < D; ++d) {
      const double sd = std::sqrt(c.var[d]);
      if (m.kinds[static_cast<std::size_t>(d)] == FeatureKind::binary) {
        const double prev = std::clamp(c.mean[d], 0.02, 0.98);
        cp.theta_p[d] = prev;
      } else {
        double mean = c.mean[d];
        if (restart > 0) mean += config.init_jitter * sd * normal(rng);
        cp.theta_mu[d] = mean;
        cp.theta_sd[d] = sd;
      }
    }
    cp.beta = kBetaInitSd * normal(rng);
    p.clusters.push_back(std::move(cp));
  }
  p.pi /= p.pi.sum();
  p.sigma0 = prefit.hyper.noise_sd;
  p.sigma1 = prefit.hyper.noise_sd;
  p.eta = ridge.eta;

  VariationalPosterior q;
  q.mean = unconstrain(layout, p);
  q.log_sd = VectorXd::Constant(q.mean.size(), kInitLogSd);
  return q;
}

MatrixXd full_cholesky(const Dataset& ds, GpHyper& hyper) {
  const MatrixXd K = kernel_matrix(ds.X, ds.X, hyper, false);
  auto chol = jittered_cholesky(K, hyper.alpha, hyper.jitter);
  hyper.jitter = chol.jitter;
  return std::move(chol.lower);
}

ModelStructure structure_of(const Dataset& ds, const ModelConfig& config) {
  ModelStructure m;
  m.K = config.K;
  m.kinds = ds.column_kinds;
  m.outcome = config.outcome;
  m.feature_selection = config.feature_selection;
  return m;
}

void check_compatible(const Dataset& ds, const ModelConfig& config) {
  config.validate();
  ds.validate();
  if (ds.outcome.tag != config.outcome.tag) throw UsageError("dataset and config disagree on the outcome type");
  if (ds.rows() < config.K) throw DataError("fewer rows than clusters");
}

}  // namespace

void ModelConfig::validate() const {
  if (K < 1) throw UsageError("K must be at least 1");
  if (restarts < 1 || max_iters < 1 || mc_samples < 1 || gp_budget < 0 || gp_max_rows < 2) {
    throw UsageError("iteration counts must be positive");
  }
  if (!(base_step > 0.0) || !(init_jitter >= 0.0)) throw UsageError("base_step and init_jitter must be positive");
  outcome.validate();
  priors.validate(K);
}

VectorXd FitResult::tau() const {
  VectorXd t(static_cast<Eigen::Index>(clusters.size()));
  for (std::size_t k = 0; k < clusters.size(); ++k) t[static_cast<Eigen::Index>(k)] = clusters[k].beta;
  return t;
}

ControlPrefit prefit_control_surface(const Dataset& ds, const ModelConfig& config) {
  auto ctrl = ds.arm_rows(0);
  if (ctrl.empty()) throw DataError("no control rows for the control-surface fit");
  VectorXd yc(static_cast<Eigen::Index>(ctrl.size()));
  for (std::size_t i = 0; i < ctrl.size(); ++i) yc[static_cast<Eigen::Index>(i)] = ds.y[static_cast<Eigen::Index>(ctrl[i])];

  ControlPrefit out;
  double center = 0.0;
  double scale = 1.0;
  const double mean = yc.mean();
  if (ds.outcome.is_binary()) {
    const double p = std::clamp(mean, 0.01, 0.99);
    out.offset = logit(p);
    center = p;
    scale = 1.0 / (p * (1.0 - p));
  } else {
    out.offset = mean;
    center = mean;
  }

  if (static_cast<int>(ctrl.size()) > config.gp_max_rows) {
    Rng rng(derive_seed(config.seed, 0xC0));
    std::shuffle(ctrl.begin(), ctrl.end(), rng);
    ctrl.resize(static_cast<std::size_t>(config.gp_max_rows));
    std::sort(ctrl.begin(), ctrl.end());
  }
  MatrixXd Xc(static_cast<Eigen::Index>(ctrl.size()), ds.dims());
  VectorXd target(Xc.rows());
  for (std::size_t i = 0; i < ctrl.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(ctrl[i]);
    Xc.row(static_cast<Eigen::Index>(i)) = ds.X.row(row);
    target[static_cast<Eigen::Index>(i)] = ds.y[row] - center;
  }
  const double sd = target.size() > 1 ? std::sqrt(target.squaredNorm() / static_cast<double>(target.size() - 1)) : 1.0;
  const GpHyper init = default_gp_init(config.kernel, ds.dims(), sd > 0.0 ? sd : 1.0);
  out.hyper = gp_mle_fit(Xc, target, init, config.gp_budget);
  if (ds.outcome.is_binary()) {
    // Delta method: probability-scale fluctuations map to the logit scale by 1 / (p (1 - p)).
    out.hyper.alpha *= scale;
    out.hyper.noise_sd *= scale;
  }
  out.hyper.jitter = 1e-8 * out.hyper.alpha * out.hyper.alpha;
  return out;
}

VariationalPosterior initial_posterior(const Dataset& ds, const ModelConfig& config, const ControlPrefit& prefit,
                                       const MatrixXd& chol, int restart) {
  check_compatible(ds, config);
  const ParamLayout layout(structure_of(ds, config), ds.rows());
  return initial_posterior_impl(ds, config, prefit, ridge_state(ds, prefit, chol), layout, restart);
}

FitResult fit(const Dataset& ds, const ModelConfig& config, const std::optional<ControlPrefit>& prefit_in) {
  check_compatible(ds, config);
  ControlPrefit prefit = prefit_in ? *prefit_in : prefit_control_surface(ds, config);
  const MatrixXd chol = full_cholesky(ds, prefit.hyper);

  DensityContext ctx;
  ctx.ds = &ds;
  ctx.ref = PopulationReference::from_dataset(ds);
  ctx.priors = config.priors;
  ctx.structure = structure_of(ds, config);
  ctx.chol = chol;
  ctx.mu0_offset = prefit.offset;
  const BasiccsDensity density(std::move(ctx));
  const RidgeState ridge = ridge_state(ds, prefit, chol);

  OptimizerOptions opts;
  opts.max_iters = config.max_iters;
  opts.mc_samples = config.mc_samples;
  opts.base_step = config.base_step;

  const int R = config.restarts;
  std::vector<RestartSummary> summaries(static_cast<std::size_t>(R));
  std::vector<OptimizeResult> results(static_cast<std::size_t>(R));
  const int threads = std::max(1, std::min(kernels::configured_threads(), R));

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int r = 0; r < R; ++r) {
    auto& s = summaries[static_cast<std::size_t>(r)];
    s.index = r;
    s.seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    try {
      VariationalPosterior q0 = initial_posterior_impl(ds, config, prefit, ridge, density.layout(), r);
      auto res = optimize_elbo(density, std::move(q0), opts, s.seed);
      s.ok = std::isfinite(res.final_elbo);
      s.final_elbo = res.final_elbo;
      s.iterations = res.iterations;
      s.converged = res.converged;
      if (!s.ok) s.error = "non-finite final ELBO";
      results[static_cast<std::size_t>(r)] = std::move(res);
    } catch (const std::exception& e) {
      s.ok = false;
      s.error = e.what();
    }
  }

  int best = -1;
  for (int r = 0; r < R; ++r) {
    const auto& s = summaries[static_cast<std::size_t>(r)];
    if (s.ok && (best < 0 || s.final_elbo > summaries[static_cast<std::size_t>(best)].final_elbo)) best = r;
  }
  if (best < 0) {
    std::string msg = "all restarts failed:";
    for (const auto& s : summaries) msg += "\n  restart " + std::to_string(s.index + 1) + ": " + s.error;
    throw NumericalError(msg);
  }

  auto& chosen = results[static_cast<std::size_t>(best)];
  FitResult out;
  out.structure = density.context().structure;
  out.priors = config.priors;
  out.ref = density.context().ref;
  out.posterior = chosen.q;
  out.elbo_trace = std::move(chosen.elbo_trace);
  out.final_elbo = chosen.final_elbo;
  out.seed = config.seed;
  out.restarts = summaries;
  out.best_restart = best;

  ConstrainedParams p = constrain(density.layout(), out.posterior.mean);
  out.clusters = std::move(p.clusters);
  out.globals.pi = p.pi;
  out.globals.sigma0 = p.sigma0;
  out.globals.sigma1 = p.sigma1;
  out.globals.mu0_offset = prefit.offset;
  out.globals.gp_hyper = prefit.hyper;
  out.globals.gp_latent.train_inputs = ds.X;
  out.globals.gp_latent.chol = chol;
  out.globals.gp_latent.whitened = p.eta;
  out.globals.gp_latent.values = chol.triangularView<Eigen::Lower>() * p.eta;
  out.responsibilities = density.responsibilities_at(out.posterior.mean);
  return out;
}

}  // namespace basiccs
