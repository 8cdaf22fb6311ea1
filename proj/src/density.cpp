#include "basiccs/density.hpp"

#include <string>

#include "basiccs/error.hpp"

namespace basiccs {

BasiccsDensity::BasiccsDensity(DensityContext ctx) : ctx_(std::move(ctx)) {
  if (ctx_.ds == nullptr) throw UsageError("density needs a dataset");
  const auto N = ctx_.ds->rows();
  if (ctx_.chol.rows() != N || ctx_.chol.cols() != N) {
    throw UsageError("control-surface factor does not match the dataset rows");
  }
  if (static_cast<std::size_t>(ctx_.ds->dims()) != ctx_.structure.kinds.size()) {
    throw SchemaError("dataset columns do not match the model structure");
  }
  ctx_.priors.validate(ctx_.structure.K);
  layout_ = ParamLayout(ctx_.structure, N);
}

double BasiccsDensity::log_density(const VectorXd& u, VectorXd* grad) const { return evaluate(u, grad, nullptr); }

MatrixXd BasiccsDensity::responsibilities_at(const VectorXd& u) const {
  MatrixXd R;
  evaluate(u, nullptr, &R);
  return R;
}

double BasiccsDensity::evaluate(const VectorXd& u, VectorXd* grad, MatrixXd* resp) const {
  const Dataset& ds = *ctx_.ds;
  const auto& m = ctx_.structure;
  const auto& pr = ctx_.priors;
  const auto& ref = ctx_.ref;
  const Eigen::Index N = ds.rows();
  const Eigen::Index D = ds.dims();
  const int K = m.K;
  const bool fs = m.feature_selection;
  const bool binary_y = m.outcome.is_binary();

  double log_jac = 0.0;
  const ConstrainedParams p = constrain(layout_, u, &log_jac);

  const VectorXd mu0 =
      (ctx_.chol.triangularView<Eigen::Lower>() * p.eta).array() + ctx_.mu0_offset;
  const Eigen::ArrayXd treated = Eigen::Map<const Eigen::ArrayXi>(ds.a.data(), N).cast<double>();
  Eigen::ArrayXd sig2(N);
  if (!binary_y) sig2 = treated * (p.sigma1 * p.sigma1) + (1.0 - treated) * (p.sigma0 * p.sigma0);

  MatrixXd P(N, K);
  // Outcome residual (continuous) or y - sigmoid(t) (binary), per cluster.
  MatrixXd score(N, K);
  MatrixXd sqres;
  if (!binary_y) sqres.resize(N, K);
  for (int k = 0; k < K; ++k) {
    const auto& c = p.clusters[static_cast<std::size_t>(k)];
    Eigen::ArrayXd col = Eigen::ArrayXd::Constant(N, std::log(p.pi[k]));
    for (Eigen::Index d = 0; d < D; ++d) {
      const auto x = ds.X.col(d).array();
      if (m.kinds[static_cast<std::size_t>(d)] == FeatureKind::binary) {
        const double g = fs ? c.gamma[d] : 1.0;
        const double pb = composite_blend(c.theta_p[d], fs ? ref.theta0_p[d] : 0.0, g);
        const double qb = g * (1.0 - c.theta_p[d]) + (1.0 - g) * (1.0 - (fs ? ref.theta0_p[d] : 0.0));
        col += x * std::log(pb) + (1.0 - x) * std::log(qb);
      } else {
        const double mean = fs ? composite_blend(c.theta_mu[d], ref.theta0_mu[d], c.gamma[d]) : c.theta_mu[d];
        const double s = c.theta_sd[d];
        col += -kHalfLogTwoPi - std::log(s) - 0.5 * (x - mean).square() / (s * s);
      }
    }
    const Eigen::ArrayXd t = mu0.array() + treated * c.beta;
    if (binary_y) {
      const auto y = ds.y.array();
      Eigen::ArrayXd ll(N);
      for (Eigen::Index n = 0; n < N; ++n) {
        ll[n] = y[n] == 1.0 ? log_sigmoid(t[n]) : log_sigmoid(-t[n]);
        score(n, k) = y[n] - sigmoid(t[n]);
      }
      col += ll;
    } else {
      const Eigen::ArrayXd res = ds.y.array() - t;
      col += -kHalfLogTwoPi - 0.5 * sig2.log() - 0.5 * res.square() / sig2;
      score.col(k) = (res / sig2).matrix();
      sqres.col(k) = (res.square() / sig2).matrix();
    }
    P.col(k) = col.matrix();
  }

  double loglik = 0.0;
  MatrixXd R(N, K);
  for (Eigen::Index n = 0; n < N; ++n) {
    const double mx = P.row(n).maxCoeff();
    R.row(n) = (P.row(n).array() - mx).exp();
    const double s = R.row(n).sum();
    R.row(n) /= s;
    loglik += mx + std::log(s);
  }
  if (!std::isfinite(loglik)) {
    for (Eigen::Index n = 0; n < N; ++n) {
      if (!P.row(n).allFinite()) throw NumericalError("non-finite log joint at row " + std::to_string(n));
    }
    throw NumericalError("non-finite log joint");
  }

  GlobalParams globals;
  globals.pi = p.pi;
  globals.sigma0 = p.sigma0;
  globals.sigma1 = p.sigma1;
  globals.gp_latent.whitened = p.eta;
  const double value = loglik + log_prior(p.clusters, globals, ref, pr, m) + log_jac;

  if (resp != nullptr) *resp = R;
  if (grad == nullptr) return value;

  VectorXd& g = *grad;
  g.setZero(layout_.size());
  const VectorXd Rsum = R.colwise().sum().transpose();
  const double conc = pr.pi_dirichlet_conc;
  for (int j = 0; j + 1 < K; ++j) {
    const double base = 1.0 - K * p.pi[j];
    g[j] = Rsum[j] - static_cast<double>(N) * p.pi[j] + (conc - 1.0) * base + base;
  }

  VectorXd g_mu0 = VectorXd::Zero(N);
  for (int k = 0; k < K; ++k) {
    const auto& c = p.clusters[static_cast<std::size_t>(k)];
    const auto base = layout_.cluster_offset(k);
    const auto r = R.col(k).array();
    for (Eigen::Index d = 0; d < D; ++d) {
      const auto off = base + layout_.dim_offset(d);
      const auto x = ds.X.col(d).array();
      const double gam = fs ? c.gamma[d] : 1.0;
      const double gam_slope = gam * (1.0 - gam);
      if (m.kinds[static_cast<std::size_t>(d)] == FeatureKind::binary) {
        const double th = c.theta_p[d];
        const double p0 = ref.theta0_p[d];
        const double pb = fs ? composite_blend(th, p0, gam) : th;
        const double qb = fs ? gam * (1.0 - th) + (1.0 - gam) * (1.0 - p0) : 1.0 - th;
        const double s1 = (r * x).sum();
        const double s0 = (r * (1.0 - x)).sum();
        const double g_pb = s1 / pb - s0 / qb;
        g[off] = g_pb * gam * th * (1.0 - th) + pr.theta_p_beta_a * (1.0 - th) - pr.theta_p_beta_b * th;
        if (fs) g[base + layout_.gamma_offset() + d] += g_pb * (th - p0) * gam_slope;
      } else {
        const double mu = c.theta_mu[d];
        const double mu_ref = ref.theta0_mu[d];
        const double mean = fs ? composite_blend(mu, mu_ref, gam) : mu;
        const double s = c.theta_sd[d];
        const double s2 = s * s;
        const Eigen::ArrayXd e = x - mean;
        const double g_mean = (r * e).sum() / s2;
        g[off] = g_mean * gam - (mu - mu_ref) / (pr.theta_mu_prior_sd * pr.theta_mu_prior_sd);
        const double st = pr.theta_sd_halfnormal_sd;
        g[off + 1] = (r * (e.square() / s2 - 1.0)).sum() - s2 / (st * st) + 1.0;
        if (fs) g[base + layout_.gamma_offset() + d] += g_mean * (mu - mu_ref) * gam_slope;
      }
      if (fs) g[base + layout_.gamma_offset() + d] += pr.gamma_beta_a * (1.0 - gam) - pr.gamma_beta_b * gam;
    }
    const Eigen::ArrayXd rs = r * score.col(k).array();
    const double bs = pr.beta_prior_sd;
    g[base + layout_.beta_offset()] = (rs * treated).sum() - (c.beta - pr.beta_mean(k)) / (bs * bs);
    g_mu0.array() += rs;
  }

  if (!binary_y) {
    const Eigen::ArrayXd w = (R.array() * (sqres.array() - 1.0)).rowwise().sum();
    const double ss = pr.sigma_halfnormal_sd * pr.sigma_halfnormal_sd;
    const auto so = layout_.sigma_offset();
    g[so] = (w * (1.0 - treated)).sum() - p.sigma0 * p.sigma0 / ss + 1.0;
    g[so + 1] = (w * treated).sum() - p.sigma1 * p.sigma1 / ss + 1.0;
  }

  g.segment(layout_.eta_offset(), N) =
      ctx_.chol.transpose().triangularView<Eigen::Upper>() * g_mu0 - p.eta;
  return value;
}

}  // namespace basiccs
