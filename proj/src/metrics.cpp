#include "basiccs/metrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "basiccs/error.hpp"

namespace basiccs {

namespace {

constexpr double kZ975 = 1.959963984540054;

double choose2(double n) { return n * (n - 1.0) / 2.0; }

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

Assignment assignment_from_probs(MatrixXd probs) {
  Assignment out;
  const auto N = probs.rows();
  out.hard.resize(static_cast<std::size_t>(N));
  out.tie_broken.resize(static_cast<std::size_t>(N));
  for (Eigen::Index n = 0; n < N; ++n) {
    Eigen::Index best = 0;
    bool tie = false;
    for (Eigen::Index k = 1; k < probs.cols(); ++k) {
      if (probs(n, k) > probs(n, best)) {
        best = k;
        tie = false;
      } else if (probs(n, k) == probs(n, best)) {
        tie = true;
      }
    }
    out.hard[static_cast<std::size_t>(n)] = static_cast<int>(best);
    out.tie_broken[static_cast<std::size_t>(n)] = tie;
  }
  out.probs = std::move(probs);
  return out;
}

Assignment assign(const FitResult& model, const Dataset& ds) {
  if (ds.column_kinds != model.structure.kinds) throw SchemaError("dataset columns do not match the model");
  GlobalParams g;
  g.pi = model.globals.pi;
  const MatrixXd P = pointwise_cluster_logliks(ds, model.clusters, g, model.ref, model.structure, false);
  return assignment_from_probs(responsibilities(P));
}

VectorXd predict_ite(const Assignment& assignment, const VectorXd& tau_hat, IteMode mode) {
  if (assignment.probs.cols() != tau_hat.size()) throw UsageError("predict_ite: cluster count mismatch");
  if (mode == IteMode::soft) return assignment.probs * tau_hat;
  VectorXd out(static_cast<Eigen::Index>(assignment.hard.size()));
  for (std::size_t n = 0; n < assignment.hard.size(); ++n) out[static_cast<Eigen::Index>(n)] = tau_hat[assignment.hard[n]];
  return out;
}

VectorXd predict_ite(const FitResult& model, const Dataset& ds, IteMode mode) {
  return predict_ite(assign(model, ds), model.tau(), mode);
}

VectorXd predict_mu0(const FitResult& model, const Dataset& ds) {
  return gp_conditional_mean(model.globals.gp_latent, model.globals.gp_hyper, ds.X).array() +
         model.globals.mu0_offset;
}

double ari(std::span<const int> labels_a, std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size()) throw UsageError("ari: length mismatch");
  if (labels_a.size() < 2) throw UsageError("ari: need at least two labels");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra;
  std::map<int, double> rb;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    joint[{labels_a[i], labels_b[i]}] += 1.0;
    ra[labels_a[i]] += 1.0;
    rb[labels_b[i]] += 1.0;
  }
  double sum_ij = 0.0;
  for (const auto& [key, c] : joint) sum_ij += choose2(c);
  double sum_a = 0.0;
  for (const auto& [key, c] : ra) sum_a += choose2(c);
  double sum_b = 0.0;
  for (const auto& [key, c] : rb) sum_b += choose2(c);
  const double total = choose2(static_cast<double>(labels_a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  // Both partitions trivial (all singletons or one block each).
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

double pehe(const VectorXd& tau_hat, const VectorXd& tau_true) {
  if (tau_hat.size() != tau_true.size()) throw UsageError("pehe: length mismatch");
  if (tau_hat.size() == 0) throw UsageError("pehe: empty input");
  return std::sqrt((tau_hat - tau_true).squaredNorm() / static_cast<double>(tau_hat.size()));
}

std::vector<SateEstimate> sate(const Dataset& ds, std::span<const int> labels, int K) {
  if (labels.size() != static_cast<std::size_t>(ds.rows())) throw UsageError("sate: label count mismatch");
  std::vector<SateEstimate> out(static_cast<std::size_t>(K));
  std::vector<std::vector<double>> treated(static_cast<std::size_t>(K));
  std::vector<std::vector<double>> control(static_cast<std::size_t>(K));
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const int k = labels[n];
    if (k < 0 || k >= K) throw UsageError("sate: label out of range");
    const double y = ds.y[static_cast<Eigen::Index>(n)];
    (ds.a[n] == 1 ? treated : control)[static_cast<std::size_t>(k)].push_back(y);
  }
  for (int k = 0; k < K; ++k) {
    auto& s = out[static_cast<std::size_t>(k)];
    const auto& t = treated[static_cast<std::size_t>(k)];
    const auto& c = control[static_cast<std::size_t>(k)];
    s.cluster = k;
    s.n_treated = t.size();
    s.n_control = c.size();
    s.defined = !t.empty() && !c.empty();
    if (!s.defined) continue;
    if (ds.outcome.is_binary()) {
      s.treated_events = static_cast<std::size_t>(std::count(t.begin(), t.end(), 1.0));
      s.treated_nonevents = t.size() - s.treated_events;
      s.control_events = static_cast<std::size_t>(std::count(c.begin(), c.end(), 1.0));
      s.control_nonevents = c.size() - s.control_events;
      double a = static_cast<double>(s.treated_events);
      double b = static_cast<double>(s.treated_nonevents);
      double cc = static_cast<double>(s.control_events);
      double d = static_cast<double>(s.control_nonevents);
      s.haldane = a == 0.0 || b == 0.0 || cc == 0.0 || d == 0.0;
      if (s.haldane) {
        a += 0.5;
        b += 0.5;
        cc += 0.5;
        d += 0.5;
      }
      s.estimate = std::log((a / b) / (cc / d));
      const double se = std::sqrt(1.0 / a + 1.0 / b + 1.0 / cc + 1.0 / d);
      s.ci_low = s.estimate - kZ975 * se;
      s.ci_high = s.estimate + kZ975 * se;
      s.odds_ratio = std::exp(s.estimate);
      s.or_ci_low = std::exp(s.ci_low);
      s.or_ci_high = std::exp(s.ci_high);
    } else {
      const auto n1 = static_cast<double>(t.size());
      const auto n0 = static_cast<double>(c.size());
      double m1 = 0.0;
      for (double v : t) m1 += v;
      m1 /= n1;
      double m0 = 0.0;
      for (double v : c) m0 += v;
      m0 /= n0;
      double ss = 0.0;
      for (double v : t) ss += (v - m1) * (v - m1);
      for (double v : c) ss += (v - m0) * (v - m0);
      s.estimate = m1 - m0;
      const double dof = n1 + n0 - 2.0;
      const double se = dof > 0.0 ? std::sqrt(ss / dof * (1.0 / n1 + 1.0 / n0))
                                  : std::numeric_limits<double>::quiet_NaN();
      s.ci_low = s.estimate - kZ975 * se;
      s.ci_high = s.estimate + kZ975 * se;
    }
  }
  return out;
}

PolicyRisk policy_risk(const Dataset& ds, const VectorXd& tau_hat) {
  if (tau_hat.size() != ds.rows()) throw UsageError("policy_risk: length mismatch");
  const auto N = static_cast<double>(ds.rows());
  double n_pol1 = 0.0;
  double sum_t = 0.0, cnt_t = 0.0;  // Pol = 1, a = 1
  double sum_c = 0.0, cnt_c = 0.0;  // Pol = 0, a = 0
  double arm_sum[2] = {0.0, 0.0};
  double arm_cnt[2] = {0.0, 0.0};
  for (Eigen::Index n = 0; n < ds.rows(); ++n) {
    const bool pol = tau_hat[n] > 0.0;
    const int a = ds.a[static_cast<std::size_t>(n)];
    const double y = ds.y[n];
    if (pol) n_pol1 += 1.0;
    arm_sum[a] += y;
    arm_cnt[a] += 1.0;
    if (pol && a == 1) {
      sum_t += y;
      cnt_t += 1.0;
    } else if (!pol && a == 0) {
      sum_c += y;
      cnt_c += 1.0;
    }
  }
  if (cnt_t == 0.0 && cnt_c == 0.0) throw DataError("policy_risk: no concordant units in either arm");
  const double p1 = n_pol1 / N;
  const double p0 = 1.0 - p1;
  PolicyRisk out;
  double e1 = 0.0;
  if (cnt_t > 0.0) {
    e1 = sum_t / cnt_t;
  } else if (p1 > 0.0) {
    if (arm_cnt[1] == 0.0) throw DataError("policy_risk: no treated units");
    e1 = arm_sum[1] / arm_cnt[1];
    out.treat_group_imputed = true;
  }
  double e0 = 0.0;
  if (cnt_c > 0.0) {
    e0 = sum_c / cnt_c;
  } else if (p0 > 0.0) {
    if (arm_cnt[0] == 0.0) throw DataError("policy_risk: no control units");
    e0 = arm_sum[0] / arm_cnt[0];
    out.control_group_imputed = true;
  }
  out.value = 1.0 - (e1 * p1 + e0 * p0);
  return out;
}

double control_fit_metric(const Dataset& ds, const VectorXd& mu0_hat) {
  if (mu0_hat.size() != ds.rows()) throw UsageError("control_fit_metric: length mismatch");
  const auto ctrl = ds.arm_rows(0);
  if (ctrl.empty()) throw DataError("control_fit_metric: no control rows");
  double acc = 0.0;
  for (auto i : ctrl) {
    const auto n = static_cast<Eigen::Index>(i);
    if (ds.outcome.is_binary()) {
      const double pred = sigmoid(mu0_hat[n]) > 0.5 ? 1.0 : 0.0;
      acc += pred == ds.y[n] ? 1.0 : 0.0;
    } else {
      const double e = mu0_hat[n] - ds.y[n];
      acc += e * e;
    }
  }
  acc /= static_cast<double>(ctrl.size());
  return ds.outcome.is_binary() ? acc : std::sqrt(acc);
}

MetricsReport evaluate(const FitResult& model, const Dataset& ds) {
  ds.validate();
  MetricsReport r;
  r.K = model.structure.K;
  r.outcome = ds.outcome.is_binary() ? "binary" : "continuous";
  r.n = static_cast<std::size_t>(ds.rows());
  const Assignment as = assign(model, ds);
  r.assignment_ties = static_cast<std::size_t>(std::count(as.tie_broken.begin(), as.tie_broken.end(), true));
  const VectorXd tau_soft = predict_ite(as, model.tau(), IteMode::soft);
  if (ds.true_cluster) r.ari = ari(as.hard, *ds.true_cluster);
  if (ds.true_tau) r.pehe = pehe(tau_soft, *ds.true_tau);
  r.sate = sate(ds, as.hard, r.K);
  for (const auto& s : r.sate) {
    if (!s.defined) continue;
    if (!r.sate_range) {
      r.sate_range = std::make_pair(s.estimate, s.estimate);
    } else {
      r.sate_range->first = std::min(r.sate_range->first, s.estimate);
      r.sate_range->second = std::max(r.sate_range->second, s.estimate);
    }
  }
  r.policy_risk = policy_risk(ds, tau_soft);
  const double cf = control_fit_metric(ds, predict_mu0(model, ds));
  if (ds.outcome.is_binary()) {
    r.control_accuracy = cf;
  } else {
    r.control_rmse = cf;
  }
  return r;
}

std::string profile_csv(const FitResult& model, const Dataset& ds, std::span<const int> labels) {
  if (labels.size() != static_cast<std::size_t>(ds.rows())) throw UsageError("profile: label count mismatch");
  const int K = model.structure.K;
  const Dataset raw = unstandardize(ds);
  std::ostringstream out;
  out << "covariate,kind,max,min,population";
  for (int k = 0; k < K; ++k) out << ",cluster" << (k + 1) << "_mean";
  for (int k = 0; k < K; ++k) out << ",cluster" << (k + 1) << "_model";
  out << '\n';
  std::vector<double> counts(static_cast<std::size_t>(K), 0.0);
  for (int l : labels) counts[static_cast<std::size_t>(l)] += 1.0;
  std::vector<VectorXd> locations;
  for (const auto& c : model.clusters) locations.push_back(composite_location(c, model.ref, model.structure));

  for (Eigen::Index d = 0; d < raw.dims(); ++d) {
    const auto& name = raw.column_names[static_cast<std::size_t>(d)];
    const bool binary = raw.column_kinds[static_cast<std::size_t>(d)] == FeatureKind::binary;
    std::vector<double> col(raw.X.col(d).data(), raw.X.col(d).data() + raw.rows());
    double sd = 1.0, mean = 0.0;
    if (!binary && ds.standardized) {
      const ColumnStats* s = ds.stats.find(name);
      if (s == nullptr) throw SchemaError("no standardization statistics for column '" + name + "'");
      sd = s->sd;
      mean = s->mean;
    }
    out << name << ',' << (binary ? "binary" : "continuous") << ',';
    out << format_double(binary ? 1.0 : quantile(col, 0.95)) << ',';
    out << format_double(binary ? 0.0 : quantile(col, 0.05)) << ',';
    out << format_double(raw.X.col(d).mean());
    std::vector<double> sums(static_cast<std::size_t>(K), 0.0);
    for (std::size_t n = 0; n < labels.size(); ++n) sums[static_cast<std::size_t>(labels[n])] += col[n];
    for (int k = 0; k < K; ++k) {
      out << ',';
      if (counts[static_cast<std::size_t>(k)] > 0.0) {
        out << format_double(sums[static_cast<std::size_t>(k)] / counts[static_cast<std::size_t>(k)]);
      }
    }
    for (int k = 0; k < K; ++k) {
      const double loc = locations[static_cast<std::size_t>(k)][d];
      out << ',' << format_double(binary ? loc : loc * sd + mean);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace basiccs
