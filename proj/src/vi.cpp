#include "basiccs/vi.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "basiccs/error.hpp"

namespace basiccs {

namespace {

constexpr int kMaxRedraws = 5;

void check_shapes(const LogDensity& target, const VariationalPosterior& q) {
  if (q.mean.size() != target.dim() || q.log_sd.size() != target.dim()) {
    throw UsageError("variational posterior does not match the target dimension");
  }
  if (!q.log_sd.allFinite() && !(q.log_sd.array() == -std::numeric_limits<double>::infinity()).any()) {
    throw UsageError("variational log_sd must be finite");
  }
}

double entropy(const VariationalPosterior& q) {
  double h = 0.5 * static_cast<double>(q.mean.size()) * (1.0 + kLogTwoPi);
  for (Eigen::Index i = 0; i < q.log_sd.size(); ++i) {
    if (std::isfinite(q.log_sd[i])) h += q.log_sd[i];
  }
  return h;
}

struct Draw {
  VectorXd eps;
  double value = 0.0;
  VectorXd grad;
};

Draw finite_draw(const LogDensity& target, const VariationalPosterior& q, Rng& rng, bool with_grad) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const VectorXd sd = q.log_sd.array().exp().matrix();
  std::string last_error = "non-finite log density";
  for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
    Draw d;
    d.eps.resize(q.mean.size());
    for (Eigen::Index i = 0; i < d.eps.size(); ++i) d.eps[i] = normal(rng);
    const VectorXd z = q.mean + sd.cwiseProduct(d.eps);
    try {
      d.value = target.log_density(z, with_grad ? &d.grad : nullptr);
    } catch (const NumericalError& e) {
      last_error = e.what();
      continue;
    }
    if (std::isfinite(d.value) && (!with_grad || d.grad.allFinite())) return d;
  }
  throw NumericalError("ELBO draw stayed non-finite after " + std::to_string(kMaxRedraws) +
                       " redraws: " + last_error);
}

}  // namespace

double elbo_estimate(const LogDensity& target, const VariationalPosterior& q, int num_samples, std::uint64_t seed) {
  if (num_samples < 1) throw UsageError("num_samples must be at least 1");
  check_shapes(target, q);
  Rng rng(seed);
  double acc = 0.0;
  for (int s = 0; s < num_samples; ++s) acc += finite_draw(target, q, rng, false).value;
  return acc / num_samples + entropy(q);
}

ElboGradient elbo_gradient(const LogDensity& target, const VariationalPosterior& q, int num_samples,
                           std::uint64_t seed) {
  if (num_samples < 1) throw UsageError("num_samples must be at least 1");
  check_shapes(target, q);
  Rng rng(seed);
  const auto P = q.mean.size();
  const VectorXd sd = q.log_sd.array().exp().matrix();
  ElboGradient out;
  out.mean = VectorXd::Zero(P);
  out.log_sd = VectorXd::Zero(P);
  double acc = 0.0;
  for (int s = 0; s < num_samples; ++s) {
    const Draw d = finite_draw(target, q, rng, true);
    acc += d.value;
    out.mean += d.grad;
    out.log_sd.array() += d.grad.array() * d.eps.array() * sd.array();
  }
  out.mean /= num_samples;
  out.log_sd /= num_samples;
  out.log_sd.array() += 1.0;
  out.elbo = acc / num_samples + entropy(q);
  return out;
}

OptimizeResult optimize_elbo(const LogDensity& target, VariationalPosterior q, const OptimizerOptions& options,
                             std::uint64_t seed) {
  if (options.max_iters < 1 || options.mc_samples < 1 || !(options.base_step > 0.0) ||
      options.smooth_window < 1) {
    throw UsageError("invalid optimizer options");
  }
  check_shapes(target, q);
  const auto P = q.mean.size();
  VectorXd v_mean = VectorXd::Zero(P);
  VectorXd v_log_sd = VectorXd::Zero(P);
  constexpr double kEps = 1e-8;

  OptimizeResult res;
  res.elbo_trace.reserve(static_cast<std::size_t>(options.max_iters));
  std::deque<double> window;
  double window_sum = 0.0;

  for (int t = 0; t < options.max_iters; ++t) {
    const ElboGradient g =
        elbo_gradient(target, q, options.mc_samples, derive_seed(seed, static_cast<std::uint64_t>(t)));
    window.push_back(g.elbo);
    window_sum += g.elbo;
    if (static_cast<int>(window.size()) > options.smooth_window) {
      window_sum -= window.front();
      window.pop_front();
    }
    res.elbo_trace.push_back(window_sum / static_cast<double>(window.size()));

    if (t == 0) {
      v_mean = g.mean.cwiseAbs2();
      v_log_sd = g.log_sd.cwiseAbs2();
    } else {
      v_mean = options.rms_decay * v_mean + (1.0 - options.rms_decay) * g.mean.cwiseAbs2();
      v_log_sd = options.rms_decay * v_log_sd + (1.0 - options.rms_decay) * g.log_sd.cwiseAbs2();
    }
    const double lr = options.base_step / std::sqrt(1.0 + t / options.step_decay);
    q.mean.array() += lr * g.mean.array() / (v_mean.array().sqrt() + kEps);
    q.log_sd.array() += lr * g.log_sd.array() / (v_log_sd.array().sqrt() + kEps);
    res.iterations = t + 1;

    const auto cw = static_cast<std::size_t>(options.convergence_window);
    if (res.elbo_trace.size() > cw + static_cast<std::size_t>(options.smooth_window)) {
      const double now = res.elbo_trace.back();
      const double then = res.elbo_trace[res.elbo_trace.size() - 1 - cw];
      if (std::abs(now - then) < options.convergence_tol * std::abs(now)) {
        res.converged = true;
        break;
      }
    }
  }
  res.final_elbo = res.elbo_trace.back();
  res.q = std::move(q);
  return res;
}

}  // namespace basiccs
