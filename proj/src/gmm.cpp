#include "basiccs/gmm.hpp"

#include <limits>
#include <string>

#include "basiccs/error.hpp"

namespace basiccs {

namespace {

constexpr int kMaxReseeds = 3;

/// N x K log(weight_k) + log N(x_n | component k).
MatrixXd joint_logdens(const MatrixXd& X, const MatrixXd& means, const MatrixXd& sds, const VectorXd& weights) {
  const auto N = X.rows();
  const auto K = means.rows();
  MatrixXd L(N, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Eigen::RowVectorXd inv = sds.row(k).cwiseInverse();
    const double norm = std::log(weights[k]) - static_cast<double>(X.cols()) * kHalfLogTwoPi -
                        sds.row(k).array().log().sum();
    const MatrixXd z = (X.rowwise() - means.row(k)).array().rowwise() * inv.array();
    L.col(k) = (-0.5 * z.rowwise().squaredNorm()).array() + norm;
  }
  return L;
}

double e_step(const MatrixXd& L, MatrixXd& resp) {
  resp.resize(L.rows(), L.cols());
  double total = 0.0;
  for (Eigen::Index n = 0; n < L.rows(); ++n) {
    const double mx = L.row(n).maxCoeff();
    resp.row(n) = (L.row(n).array() - mx).exp();
    const double s = resp.row(n).sum();
    resp.row(n) /= s;
    total += mx + std::log(s);
  }
  return total;
}

MatrixXd kmeanspp(const MatrixXd& X, int K, Rng& rng) {
  const auto N = X.rows();
  MatrixXd centers(K, X.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
  centers.row(0) = X.row(pick(rng));
  VectorXd d2 = (X.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int k = 1; k < K; ++k) {
    const double total = d2.sum();
    Eigen::Index chosen = pick(rng);
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (Eigen::Index n = 0; n < N; ++n) {
        target -= d2[n];
        if (target <= 0.0) {
          chosen = n;
          break;
        }
      }
    }
    centers.row(k) = X.row(chosen);
    d2 = d2.cwiseMin((X.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace

GmmResult gmm_em(const MatrixXd& X, int K, std::uint64_t seed, const GmmOptions& options) {
  const auto N = X.rows();
  if (K < 1) throw UsageError("gmm: K must be at least 1");
  if (N < K) throw DataError("gmm: need at least K rows");
  if (!X.allFinite()) throw DataError("gmm: non-finite input");
  const double floor = options.min_variance;

  const Eigen::RowVectorXd global_mean = X.colwise().mean();
  const Eigen::RowVectorXd global_var =
      ((X.rowwise() - global_mean).array().square().colwise().sum() / static_cast<double>(N)).max(floor);

  Rng rng(seed);
  GmmResult r;
  r.means = kmeanspp(X, K, rng);
  r.sds = global_var.cwiseSqrt().replicate(K, 1);
  r.weights = VectorXd::Constant(K, 1.0 / K);

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iters; ++it) {
    const MatrixXd L = joint_logdens(X, r.means, r.sds, r.weights);
    const double ll = e_step(L, r.resp);
    r.loglik = ll;
    r.loglik_trace.push_back(ll);
    r.iterations = it + 1;
    if (it > 0 && std::abs(ll - prev) < options.tol * (1.0 + std::abs(ll))) break;
    prev = ll;

    const VectorXd nk = r.resp.colwise().sum().transpose();
    bool reseeded = false;
    for (int k = 0; k < K; ++k) {
      if (nk[k] >= 2.0) continue;
      if (r.reseeds >= kMaxReseeds) {
        throw NumericalError("gmm: component " + std::to_string(k + 1) + " stayed degenerate after " +
                             std::to_string(kMaxReseeds) + " re-seeds");
      }
      // Worst-explained point under the current mixture.
      Eigen::Index worst = 0;
      double worst_ll = std::numeric_limits<double>::infinity();
      for (Eigen::Index n = 0; n < N; ++n) {
        const double v = L.row(n).maxCoeff();
        if (v < worst_ll) {
          worst_ll = v;
          worst = n;
        }
      }
      r.means.row(k) = X.row(worst);
      r.sds.row(k) = global_var.cwiseSqrt();
      r.weights.setConstant(1.0 / K);
      ++r.reseeds;
      reseeded = true;
    }
    if (reseeded) {
      prev = -std::numeric_limits<double>::infinity();
      continue;
    }

    r.weights = nk / static_cast<double>(N);
    for (int k = 0; k < K; ++k) {
      const auto w = r.resp.col(k);
      const Eigen::RowVectorXd mean = (w.transpose() * X) / nk[k];
      const Eigen::RowVectorXd var =
          (w.transpose() * (X.rowwise() - mean).array().square().matrix()) / nk[k];
      r.means.row(k) = mean;
      r.sds.row(k) = var.array().max(floor).sqrt().matrix();
    }
  }
  return r;
}

GmmResult gmm_best_of(const MatrixXd& X, int K, std::uint64_t seed, int n_init, const GmmOptions& options) {
  if (n_init < 1) throw UsageError("gmm: n_init must be at least 1");
  GmmResult best;
  bool have = false;
  std::string last_error;
  for (int i = 0; i < n_init; ++i) {
    try {
      GmmResult r = gmm_em(X, K, seed + static_cast<std::uint64_t>(i) * 7919, options);
      if (!have || r.loglik > best.loglik) {
        best = std::move(r);
        have = true;
      }
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
  }
  if (!have) throw NumericalError("gmm: every initialization failed: " + last_error);
  return best;
}

MatrixXd gmm_predict_proba(const GmmResult& model, const MatrixXd& X) {
  if (X.cols() != model.means.cols()) throw SchemaError("gmm: dimension mismatch");
  MatrixXd resp;
  e_step(joint_logdens(X, model.means, model.sds, model.weights), resp);
  return resp;
}

std::vector<int> gmm_predict(const GmmResult& model, const MatrixXd& X) {
  const MatrixXd p = gmm_predict_proba(model, X);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index n = 0; n < p.rows(); ++n) {
    Eigen::Index k = 0;
    p.row(n).maxCoeff(&k);
    out[static_cast<std::size_t>(n)] = static_cast<int>(k);
  }
  return out;
}

}  // namespace basiccs
