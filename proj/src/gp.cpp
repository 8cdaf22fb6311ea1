#include "basiccs/gp.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <string>

#include "basiccs/error.hpp"
#include "basiccs/kernels.hpp"

namespace basiccs {

namespace {

constexpr double kLogAlphaMin = -9.210340371976182;  // log 1e-4
constexpr double kLogAlphaMax = 9.210340371976182;
constexpr double kLogRhoMin = -4.605170185988091;  // log 1e-2
constexpr double kLogRhoMax = 6.907755278982137;   // log 1e3
constexpr double kLogNoiseMin = -9.210340371976182;
constexpr double kLogNoiseMax = 9.210340371976182;

void box_bounds(const GpHyper& like, VectorXd& lo, VectorXd& hi) {
  const auto n = pack_log_hyper(like).size();
  lo.resize(n);
  hi.resize(n);
  lo[0] = kLogAlphaMin;
  hi[0] = kLogAlphaMax;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    lo[i] = kLogRhoMin;
    hi[i] = kLogRhoMax;
  }
  lo[n - 1] = kLogNoiseMin;
  hi[n - 1] = kLogNoiseMax;
}

}  // namespace

std::string_view to_string(KernelKind kind) { return kind == KernelKind::linear ? "linear" : "se_ard"; }

KernelKind kernel_kind_from_string(std::string_view s) {
  if (s == "se_ard") return KernelKind::se_ard;
  if (s == "linear") return KernelKind::linear;
  throw UsageError("unknown kernel '" + std::string(s) + "' (expected se_ard or linear)");
}

void GpHyper::validate(Eigen::Index dims) const {
  if (!(alpha > 0.0) || !(noise_sd > 0.0) || !(jitter > 0.0)) {
    throw UsageError("GP hyperparameters must be strictly positive");
  }
  if (rho.size() != dims) throw UsageError("GP length-scale count does not match the input dimension");
  if (kernel == KernelKind::se_ard && !(rho.array() > 0.0).all()) {
    throw UsageError("GP length scales must be strictly positive");
  }
}

MatrixXd kernel_matrix(const MatrixXd& X, const MatrixXd& X2, const GpHyper& hyper,
                       bool add_diag_noise) {
  if (X.cols() != X2.cols()) throw UsageError("kernel_matrix: column counts differ");
  hyper.validate(X.cols());
  MatrixXd K = X.rows() >= kernels::kParallelThreshold ? kernels::parallel::kernel_matrix(X, X2, hyper)
                                                        : kernels::serial::kernel_matrix(X, X2, hyper);
  if (add_diag_noise) {
    if (X.rows() != X2.rows()) throw UsageError("kernel_matrix: diagonal noise needs X2 == X");
    K.diagonal().array() += hyper.noise_sd * hyper.noise_sd + hyper.jitter;
  }
  return K;
}

CholeskyResult jittered_cholesky(const MatrixXd& K, double alpha, double start_jitter) {
  const double a2 = alpha * alpha;
  const double ceiling = 1e-4 * a2 * (1.0 + 1e-12);
  double jitter = start_jitter > 0.0 ? start_jitter : 1e-8 * a2;
  while (jitter <= ceiling) {
    MatrixXd A = K;
    A.diagonal().array() += jitter;
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      MatrixXd L = llt.matrixL();
      if ((L.diagonal().array() > 0.0).all()) return {std::move(L), jitter};
    }
    jitter *= 10.0;
  }
  throw NumericalError("kernel matrix is ill-conditioned: Cholesky failed with jitter up to 1e-4 alpha^2");
}

GpLatent make_latent(const MatrixXd& X, GpHyper& hyper, const VectorXd& whitened) {
  if (whitened.size() != X.rows()) throw UsageError("whitened vector length does not match the inputs");
  const MatrixXd K = kernel_matrix(X, X, hyper, false);
  auto chol = jittered_cholesky(K, hyper.alpha, hyper.jitter);
  hyper.jitter = chol.jitter;
  GpLatent latent;
  latent.train_inputs = X;
  latent.chol = std::move(chol.lower);
  latent.whitened = whitened;
  latent.values = latent.chol.triangularView<Eigen::Lower>() * whitened;
  return latent;
}

VectorXd pack_log_hyper(const GpHyper& hyper) {
  if (hyper.kernel == KernelKind::linear) {
    VectorXd t(2);
    t << std::log(hyper.alpha), std::log(hyper.noise_sd);
    return t;
  }
  VectorXd t(hyper.rho.size() + 2);
  t[0] = std::log(hyper.alpha);
  t.segment(1, hyper.rho.size()) = hyper.rho.array().log().matrix();
  t[t.size() - 1] = std::log(hyper.noise_sd);
  return t;
}

GpHyper unpack_log_hyper(const VectorXd& theta, const GpHyper& like) {
  GpHyper h = like;
  h.alpha = std::exp(theta[0]);
  if (like.kernel == KernelKind::se_ard) h.rho = theta.segment(1, like.rho.size()).array().exp().matrix();
  h.noise_sd = std::exp(theta[theta.size() - 1]);
  return h;
}

double gp_log_marginal(const MatrixXd& X, const VectorXd& y, const GpHyper& hyper, VectorXd* grad) {
  const auto M = X.rows();
  if (y.size() != M) throw UsageError("gp_log_marginal: length mismatch");
  const MatrixXd Kf = kernel_matrix(X, X, hyper, false);
  MatrixXd K = Kf;
  K.diagonal().array() += hyper.noise_sd * hyper.noise_sd + hyper.jitter;
  Eigen::LLT<MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    auto c = jittered_cholesky(K, hyper.alpha);
    K.diagonal().array() += c.jitter;
    llt.compute(K);
    if (llt.info() != Eigen::Success) throw NumericalError("gp_log_marginal: Cholesky failed");
  }
  const VectorXd alpha_vec = llt.solve(y);
  const MatrixXd L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  const double value = -0.5 * y.dot(alpha_vec) - 0.5 * logdet - 0.5 * static_cast<double>(M) * kLogTwoPi;
  if (grad != nullptr) {
    const MatrixXd Kinv = llt.solve(MatrixXd::Identity(M, M));
    const MatrixXd W = alpha_vec * alpha_vec.transpose() - Kinv;
    const auto n = pack_log_hyper(hyper).size();
    grad->resize(n);
    // dK/dlog(alpha) = 2 Kf
    (*grad)[0] = (W.array() * Kf.array()).sum();
    if (hyper.kernel == KernelKind::se_ard) {
      const auto D = X.cols();
      for (Eigen::Index d = 0; d < D; ++d) {
        const double inv_r2 = 1.0 / (hyper.rho[d] * hyper.rho[d]);
        double acc = 0.0;
        for (Eigen::Index j = 0; j < M; ++j) {
          for (Eigen::Index i = 0; i < M; ++i) {
            const double diff = X(i, d) - X(j, d);
            acc += W(i, j) * Kf(i, j) * diff * diff;
          }
        }
        (*grad)[1 + d] = 0.5 * acc * inv_r2;
      }
    }
    (*grad)[n - 1] = hyper.noise_sd * hyper.noise_sd * W.trace();
  }
  return value;
}

GpHyper default_gp_init(KernelKind kernel, Eigen::Index dims, double y_sd) {
  GpHyper h;
  h.kernel = kernel;
  const double scale = y_sd > 0.0 ? y_sd : 1.0;
  h.rho = VectorXd::Constant(dims, kernel == KernelKind::linear ? 1.0 : std::sqrt(static_cast<double>(dims)));
  if (kernel == KernelKind::linear) {
    h.alpha = scale / std::sqrt(static_cast<double>(dims) + 1.0);
  } else {
    h.alpha = scale;
  }
  h.noise_sd = 0.5 * scale;
  h.jitter = 1e-8 * h.alpha * h.alpha;
  return h;
}

GpHyper gp_mle_fit(const MatrixXd& X, const VectorXd& y, const GpHyper& init, int budget,
                   GpFitTrace* trace) {
  const Eigen::Index min_rows = X.cols() + 2;
  if (X.rows() < min_rows) {
    throw DataError("GP prefit needs at least D + 2 = " + std::to_string(min_rows) + " control rows, got " +
                    std::to_string(X.rows()));
  }
  init.validate(X.cols());

  VectorXd lo, hi;
  box_bounds(init, lo, hi);
  auto clamp = [&](VectorXd t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = std::clamp(t[i], lo[i], hi[i]);
    return t;
  };
  // Jitter tracks alpha so that it stays within the admissible band.
  auto hyper_at = [&](const VectorXd& t) {
    GpHyper h = unpack_log_hyper(t, init);
    h.jitter = 1e-8 * h.alpha * h.alpha;
    return h;
  };
  // Minimise the negative log marginal likelihood.
  auto eval = [&](const VectorXd& t, VectorXd& g) {
    VectorXd grad;
    const double v = gp_log_marginal(X, y, hyper_at(t), &grad);
    g = -grad;
    return -v;
  };

  const VectorXd t0 = pack_log_hyper(init);
  VectorXd x = clamp(t0);
  VectorXd g;
  double f = 0.0;
  {
    const double f_init = -gp_log_marginal(X, y, init);
    f = eval(x, g);
    if (trace) trace->log_marginal.push_back(-f_init);
    // Clamping or the jitter reset may lose ground; init is then returned.
    if (!(f <= f_init)) return init;
    if (trace && f < f_init) trace->log_marginal.push_back(-f);
  }

  constexpr int kMemory = 8;
  std::deque<VectorXd> S, Y;
  auto projected_grad_norm = [&](const VectorXd& pt, const VectorXd& gr) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < pt.size(); ++i) {
      double gi = gr[i];
      if (pt[i] <= lo[i] && gi > 0.0) gi = 0.0;
      if (pt[i] >= hi[i] && gi < 0.0) gi = 0.0;
      m = std::max(m, std::abs(gi));
    }
    return m;
  };

  for (int it = 0; it < budget; ++it) {
    if (projected_grad_norm(x, g) < 1e-6) break;
    // Two-loop recursion.
    VectorXd q = g;
    std::vector<double> alphas(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      const double rho_i = 1.0 / Y[static_cast<std::size_t>(i)].dot(S[static_cast<std::size_t>(i)]);
      alphas[static_cast<std::size_t>(i)] = rho_i * S[static_cast<std::size_t>(i)].dot(q);
      q -= alphas[static_cast<std::size_t>(i)] * Y[static_cast<std::size_t>(i)];
    }
    if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double rho_i = 1.0 / Y[i].dot(S[i]);
      const double beta = rho_i * Y[i].dot(q);
      q += S[i] * (alphas[i] - beta);
    }
    VectorXd p = -q;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if ((x[i] <= lo[i] && p[i] < 0.0) || (x[i] >= hi[i] && p[i] > 0.0)) p[i] = 0.0;
    }
    if (p.dot(g) >= 0.0 || !p.allFinite()) {
      S.clear();
      Y.clear();
      p = -g;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        if ((x[i] <= lo[i] && p[i] < 0.0) || (x[i] >= hi[i] && p[i] > 0.0)) p[i] = 0.0;
      }
    }
    double step = S.empty() ? std::min(1.0, 1.0 / std::max(1e-12, p.cwiseAbs().maxCoeff())) : 1.0;
    bool accepted = false;
    VectorXd x_new, g_new;
    double f_new = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = clamp(x + step * p);
      try {
        f_new = eval(x_new, g_new);
      } catch (const NumericalError&) {
        step *= 0.5;
        continue;
      }
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || !(f_new <= f)) break;
    const VectorXd s = x_new - x;
    const VectorXd yv = g_new - g;
    const double improvement = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (trace) trace->log_marginal.push_back(-f);
    if (s.dot(yv) > 1e-10) {
      S.push_back(s);
      Y.push_back(yv);
      if (static_cast<int>(S.size()) > kMemory) {
        S.pop_front();
        Y.pop_front();
      }
    }
    if (improvement < 1e-9 * (1.0 + std::abs(f))) break;
  }
  return hyper_at(x);
}

VectorXd gp_conditional_mean(const GpLatent& latent, const GpHyper& hyper, const MatrixXd& X_new) {
  if (X_new.cols() != latent.train_inputs.cols()) throw UsageError("gp_conditional_mean: dimension mismatch");
  const MatrixXd Ks = kernel_matrix(X_new, latent.train_inputs, hyper, false);
  // (L L')^{-1} L eta = L^{-T} eta
  const VectorXd v = latent.chol.transpose().triangularView<Eigen::Upper>().solve(latent.whitened);
  return Ks * v;
}

VectorXd whitened_ridge_fit(const MatrixXd& chol, const std::vector<std::size_t>& observed_rows,
                            const VectorXd& y_observed, double noise_sd) {
  const auto M = static_cast<Eigen::Index>(observed_rows.size());
  if (y_observed.size() != M) throw UsageError("whitened_ridge_fit: length mismatch");
  const Eigen::Index N = chol.rows();
  MatrixXd Lo(M, N);
  for (Eigen::Index i = 0; i < M; ++i) Lo.row(i) = chol.row(static_cast<Eigen::Index>(observed_rows[static_cast<std::size_t>(i)]));
  // Woodbury form: eta = Lo' (Lo Lo' + noise^2 I)^{-1} y
  MatrixXd G = Lo * Lo.transpose();
  G.diagonal().array() += noise_sd * noise_sd;
  Eigen::LLT<MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw NumericalError("whitened_ridge_fit: Cholesky failed");
  return Lo.transpose() * llt.solve(y_observed);
}

}  // namespace basiccs
