#include "basiccs/layout.hpp"

#include "basiccs/error.hpp"

namespace basiccs {

ParamLayout::ParamLayout(const ModelStructure& m, Eigen::Index n_rows) : m_(m), n_rows_(n_rows) {
  if (m.K < 1) throw UsageError("K must be at least 1");
  Eigen::Index rel = 0;
  dim_offsets_.reserve(m.kinds.size());
  for (auto kind : m.kinds) {
    dim_offsets_.push_back(rel);
    rel += kind == FeatureKind::binary ? 1 : 2;
  }
  if (m.feature_selection) {
    gamma_rel_ = rel;
    rel += static_cast<Eigen::Index>(m.kinds.size());
  }
  beta_rel_ = rel;
  cluster_stride_ = rel + 1;
  cluster_base_ = m.K - 1;
  Eigen::Index off = cluster_base_ + m.K * cluster_stride_;
  if (!m.outcome.is_binary()) {
    sigma_offset_ = off;
    off += 2;
  }
  eta_offset_ = off;
  size_ = off + n_rows;
}

std::vector<ParamSlice> ParamLayout::slices() const {
  std::vector<ParamSlice> out;
  out.push_back({"pi_logits", 0, m_.K - 1});
  for (int k = 0; k < m_.K; ++k) {
    const auto base = cluster_offset(k);
    const std::string prefix = "cluster" + std::to_string(k + 1) + ".";
    for (std::size_t d = 0; d < m_.kinds.size(); ++d) {
      const auto off = base + dim_offsets_[d];
      if (m_.kinds[d] == FeatureKind::binary) {
        out.push_back({prefix + "logit_p" + std::to_string(d), off, 1});
      } else {
        out.push_back({prefix + "mu" + std::to_string(d), off, 1});
        out.push_back({prefix + "log_sd" + std::to_string(d), off + 1, 1});
      }
    }
    if (m_.feature_selection) out.push_back({prefix + "logit_gamma", base + gamma_rel_, dims()});
    out.push_back({prefix + "beta", base + beta_rel_, 1});
  }
  if (sigma_offset_ >= 0) {
    out.push_back({"log_sigma0", sigma_offset_, 1});
    out.push_back({"log_sigma1", sigma_offset_ + 1, 1});
  }
  out.push_back({"eta", eta_offset_, n_rows_});
  return out;
}

ConstrainedParams constrain(const ParamLayout& layout, const VectorXd& u, double* log_jacobian) {
  if (u.size() != layout.size()) throw UsageError("unconstrained vector has the wrong length");
  const int K = layout.K();
  const auto D = layout.dims();
  const auto& m = layout.structure();
  double lj = 0.0;

  ConstrainedParams p;
  VectorXd logits(K);
  logits.head(K - 1) = u.head(K - 1);
  logits[K - 1] = 0.0;
  const double lse = log_sum_exp(as_span(logits));
  p.pi = (logits.array() - lse).exp().matrix();
  lj += (logits.array() - lse).sum();

  p.clusters.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto base = layout.cluster_offset(k);
    ClusterParams c = ClusterParams::neutral(D);
    c.gamma.setOnes();
    for (Eigen::Index d = 0; d < D; ++d) {
      const auto off = base + layout.dim_offset(d);
      if (m.kinds[static_cast<std::size_t>(d)] == FeatureKind::binary) {
        const double z = u[off];
        c.theta_p[d] = sigmoid(z);
        lj += log_sigmoid(z) + log_sigmoid(-z);
      } else {
        c.theta_mu[d] = u[off];
        c.theta_sd[d] = std::exp(u[off + 1]);
        lj += u[off + 1];
      }
    }
    if (m.feature_selection) {
      for (Eigen::Index d = 0; d < D; ++d) {
        const double z = u[base + layout.gamma_offset() + d];
        c.gamma[d] = sigmoid(z);
        lj += log_sigmoid(z) + log_sigmoid(-z);
      }
    }
    c.beta = u[base + layout.beta_offset()];
    p.clusters.push_back(std::move(c));
  }
  if (layout.sigma_offset() >= 0) {
    p.sigma0 = std::exp(u[layout.sigma_offset()]);
    p.sigma1 = std::exp(u[layout.sigma_offset() + 1]);
    lj += u[layout.sigma_offset()] + u[layout.sigma_offset() + 1];
  }
  p.eta = u.segment(layout.eta_offset(), layout.n_rows());
  if (log_jacobian != nullptr) *log_jacobian += lj;
  return p;
}

VectorXd unconstrain(const ParamLayout& layout, const ConstrainedParams& p) {
  const int K = layout.K();
  const auto D = layout.dims();
  const auto& m = layout.structure();
  if (p.pi.size() != K || static_cast<int>(p.clusters.size()) != K || p.eta.size() != layout.n_rows()) {
    throw UsageError("parameter shapes do not match the layout");
  }
  VectorXd u(layout.size());
  for (int k = 0; k + 1 < K; ++k) u[k] = std::log(p.pi[k]) - std::log(p.pi[K - 1]);
  for (int k = 0; k < K; ++k) {
    const auto base = layout.cluster_offset(k);
    const auto& c = p.clusters[static_cast<std::size_t>(k)];
    for (Eigen::Index d = 0; d < D; ++d) {
      const auto off = base + layout.dim_offset(d);
      if (m.kinds[static_cast<std::size_t>(d)] == FeatureKind::binary) {
        u[off] = logit(c.theta_p[d]);
      } else {
        u[off] = c.theta_mu[d];
        u[off + 1] = std::log(c.theta_sd[d]);
      }
    }
    if (m.feature_selection) {
      for (Eigen::Index d = 0; d < D; ++d) u[base + layout.gamma_offset() + d] = logit(c.gamma[d]);
    }
    u[base + layout.beta_offset()] = c.beta;
  }
  if (layout.sigma_offset() >= 0) {
    u[layout.sigma_offset()] = std::log(p.sigma0);
    u[layout.sigma_offset() + 1] = std::log(p.sigma1);
  }
  u.segment(layout.eta_offset(), layout.n_rows()) = p.eta;
  return u;
}

}  // namespace basiccs
