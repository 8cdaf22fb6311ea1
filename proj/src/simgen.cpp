#include "basiccs/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "basiccs/error.hpp"

namespace basiccs {

namespace {

// sanity suite control surface and effect slopes
constexpr double kSanityW[9] = {1.0, -0.5, 0.8, 0.3, -0.6, 0.4, 0.5, -0.7, 0.2};
constexpr double kSanityB = 1.0;
constexpr double kSanitySlope = 0.2;

double simnull_mu0(std::span<const double> x) { return 0.5 * x[0] + 0.3 * std::sin(x[1]) + 0.2 * x[3]; }
double simfs_mu0(std::span<const double> x) { return 0.5 * x[0] + 0.5 * std::sin(x[1]); }
double sanity_mu0(std::span<const double> x) {
  double v = kSanityB;
  for (std::size_t d = 0; d < 9; ++d) v += kSanityW[d] * x[d];
  return v;
}
double binary_logit_mu0(std::span<const double> x) { return -0.5 + 0.5 * x[0]; }

double mu0_of(Scenario s, std::span<const double> x) {
  switch (s) {
    case Scenario::simhte:
      return simhte_mu0(x);
    case Scenario::simnull:
      return simnull_mu0(x);
    case Scenario::simfs:
      return simfs_mu0(x);
    case Scenario::sanity_lc:
    case Scenario::sanity_ll:
      return sanity_mu0(x);
    case Scenario::binary_logit:
      return binary_logit_mu0(x);
  }
  return 0.0;
}

/// Largest-remainder integer split of n by weights.
std::vector<int> exact_counts(int n, const std::vector<double>& pi) {
  std::vector<int> counts(pi.size());
  std::vector<std::pair<double, std::size_t>> rema;
  int used = 0;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    const double target = n * pi[k];
    counts[k] = static_cast<int>(std::floor(target));
    used += counts[k];
    rema.emplace_back(target - counts[k], k);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < n - used; ++i) ++counts[rema[static_cast<std::size_t>(i) % rema.size()].second];
  return counts;
}

}  // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::simhte:
      return "simhte";
    case Scenario::simnull:
      return "simnull";
    case Scenario::simfs:
      return "simfs";
    case Scenario::sanity_lc:
      return "sanity_lc";
    case Scenario::sanity_ll:
      return "sanity_ll";
    case Scenario::binary_logit:
      return "binary_logit";
  }
  return "";
}

Scenario scenario_from_string(std::string_view s) {
  for (auto sc : {Scenario::simhte, Scenario::simnull, Scenario::simfs, Scenario::sanity_lc, Scenario::sanity_ll,
                  Scenario::binary_logit}) {
    if (to_string(sc) == s) return sc;
  }
  throw UsageError("unknown scenario '" + std::string(s) + "'");
}

void ScenarioSpec::validate() const {
  if (n < 20) throw UsageError("n must be at least 20");
  if (!(treat_prop > 0.0 && treat_prop < 1.0)) throw UsageError("treat_prop must lie in (0, 1)");
  if (!(noise_sd > 0.0) || !std::isfinite(noise_sd)) throw UsageError("noise_sd must be positive");
}

ScenarioTruth scenario_truth(Scenario s) {
  ScenarioTruth t;
  switch (s) {
    case Scenario::simhte:
      t.K = 5;
      t.n_continuous = 6;
      t.n_binary = 6;
      t.pi = {0.19, 0.21, 0.17, 0.21, 0.22};
      // Clusters 2 and 3 nearly overlap; 4 and 5 sit far from the rest.
      t.means = {{-1.5, 1.0, -1.0, 0.5, -1.0, 0.5},
                 {0.4, 0.3, 0.4, -0.4, 0.0, 0.2},
                 {1.2, -0.3, 1.1, -0.6, -0.4, 0.2},
                 {1.5, -1.5, -1.2, 1.5, 1.2, -1.2},
                 {-1.2, -1.6, 1.6, -1.5, 1.2, 1.5}};
      t.sds.assign(5, std::vector<double>(6, 0.5));
      t.probs = {{0.8, 0.2, 0.7, 0.3, 0.5, 0.5},
                 {0.3, 0.7, 0.5, 0.6, 0.3, 0.7},
                 {0.6, 0.4, 0.8, 0.3, 0.6, 0.4},
                 {0.2, 0.8, 0.2, 0.8, 0.8, 0.2},
                 {0.7, 0.3, 0.3, 0.2, 0.2, 0.8}};
      t.tau = {0.5, 5.0, -5.0, 0.0, 0.0};
      break;
    case Scenario::simnull:
      t.K = 1;
      t.n_continuous = 3;
      t.n_binary = 3;
      t.pi = {1.0};
      t.means = {{0.0, 0.0, 0.0}};
      t.sds = {{1.0, 1.0, 1.0}};
      t.probs = {{0.5, 0.5, 0.5}};
      t.tau = {0.0};
      break;
    case Scenario::simfs:
      t.K = 4;
      t.n_continuous = 2;
      t.pi = {0.25, 0.25, 0.25, 0.25};
      t.means = {{-3.0, 0.0}, {-2.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
      t.sds.assign(4, {0.25, 1.0});
      t.probs.assign(4, {});
      t.tau = {2.0, -2.0, 2.0, -2.0};
      break;
    case Scenario::sanity_lc:
    case Scenario::sanity_ll:
      t.K = 5;
      t.n_continuous = 6;
      t.n_binary = 3;
      t.pi = {0.15, 0.2, 0.25, 0.2, 0.2};
      t.means = {{-2, -2, 0, 0, 1, -1}, {2, -2, 1, -1, 0, 0}, {0, 2, -1, 1, -1, 1}, {-2, 2, 2, 2, 0, -2}, {2, 2, -2, -2, 2, 2}};
      t.sds.assign(5, std::vector<double>(6, 0.5));
      t.probs = {{0.9, 0.1, 0.5}, {0.1, 0.9, 0.5}, {0.5, 0.5, 0.9}, {0.9, 0.9, 0.1}, {0.1, 0.1, 0.1}};
      t.tau = {-3.0, -1.0, 1.0, 3.0, 5.0};
      break;
    case Scenario::binary_logit:
      t.K = 2;
      t.n_continuous = 2;
      t.n_binary = 2;
      t.pi = {0.5, 0.5};
      t.means = {{-1.5, 1.0}, {1.5, -1.0}};
      t.sds.assign(2, {0.6, 0.6});
      t.probs = {{0.8, 0.3}, {0.2, 0.7}};
      t.tau = {1.0, -1.0};
      t.binary_outcome = true;
      break;
  }
  return t;
}

double simhte_mu0(std::span<const double> x) {
  if (x.size() != 12) throw UsageError("simhte control surface needs 12 covariates");
  return std::sin(std::numbers::pi * x[0] * x[1]) + 0.2 * (x[2] - 0.5) * (x[2] - 0.5) +
         std::exp(x[3]) / (1.0 + std::exp(x[4])) + x[5] * x[5] + 0.3 * x[6] + std::log(1.0 + x[7] * x[8]) +
         2.0 * (x[9] - 0.5) * (x[9] - 0.5) + x[10] * x[11];
}

Simulation simulate(const ScenarioSpec& spec) {
  spec.validate();
  const ScenarioTruth t = scenario_truth(spec.scenario);
  const int n = spec.n;
  const int Dc = t.n_continuous;
  const int D = Dc + t.n_binary;
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<int> cluster;
  const auto counts = exact_counts(n, t.pi);
  for (int k = 0; k < t.K; ++k) cluster.insert(cluster.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(k)]), k);
  std::shuffle(cluster.begin(), cluster.end(), rng);

  Simulation sim;
  Dataset& ds = sim.data;
  ds.X.resize(n, D);
  for (int d = 0; d < D; ++d) {
    const std::string name = "x" + std::to_string(d + 1);
    ds.column_names.push_back(name);
    const bool binary = d >= Dc;
    ds.column_kinds.push_back(binary ? FeatureKind::binary : FeatureKind::continuous);
    sim.schema.columns.push_back({name, binary ? ColumnKind::binary : ColumnKind::continuous, {}});
  }
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(cluster[static_cast<std::size_t>(i)]);
    for (int d = 0; d < Dc; ++d) {
      const auto du = static_cast<std::size_t>(d);
      ds.X(i, d) = t.means[k][du] + t.sds[k][du] * normal(rng);
    }
    for (int d = 0; d < t.n_binary; ++d) ds.X(i, Dc + d) = unif(rng) < t.probs[k][static_cast<std::size_t>(d)] ? 1.0 : 0.0;
  }

  ds.a.assign(static_cast<std::size_t>(n), 0);
  for (;;) {
    int treated = 0;
    for (auto& a : ds.a) {
      a = unif(rng) < spec.treat_prop ? 1 : 0;
      treated += a;
    }
    if (treated > 0 && treated < n) break;
  }

  ds.outcome.tag = t.binary_outcome ? OutcomeType::Tag::binary : OutcomeType::Tag::continuous;
  VectorXd tau(n), mu0(n), y0(n), y1(n);
  std::vector<double> row(static_cast<std::size_t>(D));
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(cluster[static_cast<std::size_t>(i)]);
    for (int d = 0; d < D; ++d) row[static_cast<std::size_t>(d)] = ds.X(i, d);
    mu0[i] = mu0_of(spec.scenario, row);
    tau[i] = t.tau[k];
    if (spec.scenario == Scenario::sanity_ll) {
      // Effect varies linearly along the cluster's own continuous axis.
      const auto axis = k % static_cast<std::size_t>(Dc);
      tau[i] += kSanitySlope * (row[axis] - t.means[k][axis]);
    }
    if (t.binary_outcome) {
      y0[i] = unif(rng) < sigmoid(mu0[i]) ? 1.0 : 0.0;
      y1[i] = unif(rng) < sigmoid(mu0[i] + tau[i]) ? 1.0 : 0.0;
    } else {
      y0[i] = mu0[i] + spec.noise_sd * normal(rng);
      y1[i] = mu0[i] + tau[i] + spec.noise_sd * normal(rng);
    }
  }
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) ds.y[i] = ds.a[static_cast<std::size_t>(i)] == 1 ? y1[i] : y0[i];

  ds.true_tau = tau;
  std::vector<int> labels(cluster.size());
  std::transform(cluster.begin(), cluster.end(), labels.begin(), [](int k) { return k + 1; });
  ds.true_cluster = std::move(labels);
  ds.true_mu0 = mu0;
  ds.true_y0 = y0;
  ds.true_y1 = y1;
  ds.row_ids.resize(static_cast<std::size_t>(n));
  std::iota(ds.row_ids.begin(), ds.row_ids.end(), std::size_t{0});
  ds.validate();
  return sim;
}

std::string potential_outcome_table(const Dataset& ds, double noise_sd, std::size_t* flagged) {
  if (!ds.true_y0 || !ds.true_y1 || !ds.true_cluster || !ds.true_tau) {
    throw DataError("potential outcome table needs true_y0, true_y1, true_tau and true_cluster");
  }
  if (ds.outcome.is_binary()) throw UsageError("potential outcome table is defined for continuous outcomes");
  std::ostringstream out;
  out << "row_id,y0,y1,cluster,tau,flag\n";
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const double y0 = (*ds.true_y0)[i];
    const double y1 = (*ds.true_y1)[i];
    const double tau = (*ds.true_tau)[i];
    const bool flag = std::abs(y1 - y0 - tau) > 6.0 * noise_sd;
    count += flag ? 1 : 0;
    out << (ds.row_ids.empty() ? iu : ds.row_ids[iu]) << ',' << format_double(y0) << ',' << format_double(y1) << ','
        << (*ds.true_cluster)[iu] << ',' << format_double(tau) << ',' << (flag ? 1 : 0) << '\n';
  }
  if (flagged != nullptr) *flagged = count;
  return out.str();
}

std::string scenario_constants_json() {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (auto sc : {Scenario::simhte, Scenario::simnull, Scenario::simfs, Scenario::sanity_lc, Scenario::sanity_ll,
                  Scenario::binary_logit}) {
    const auto t = scenario_truth(sc);
    nlohmann::ordered_json j;
    j["K"] = t.K;
    j["continuous_columns"] = t.n_continuous;
    j["binary_columns"] = t.n_binary;
    j["pi"] = t.pi;
    j["means"] = t.means;
    j["sds"] = t.sds;
    j["probs"] = t.probs;
    j["tau"] = t.tau;
    j["outcome"] = t.binary_outcome ? "binary" : "continuous";
    switch (sc) {
      case Scenario::simhte:
        j["mu0"] =
            "sin(pi*x1*x2) + 0.2*(x3-0.5)^2 + exp(x4)/(1+exp(x5)) + x6^2 + 0.3*x7 + log(1+x8*x9) + "
            "2*(x10-0.5)^2 + x11*x12";
        break;
      case Scenario::simnull:
        j["mu0"] = "0.5*x1 + 0.3*sin(x2) + 0.2*x4";
        break;
      case Scenario::simfs:
        j["mu0"] = "0.5*x1 + 0.5*sin(x2)";
        break;
      case Scenario::sanity_lc:
      case Scenario::sanity_ll:
        j["mu0"] = "w'x + b";
        j["w"] = std::vector<double>(std::begin(kSanityW), std::end(kSanityW));
        j["b"] = kSanityB;
        if (sc == Scenario::sanity_ll) {
          j["tau_slope"] = kSanitySlope;
          j["tau_rule"] = "tau_k + slope * (x_j - mean_kj), j = (k - 1) mod 6 + 1";
        }
        break;
      case Scenario::binary_logit:
        j["mu0"] = "-0.5 + 0.5*x1 (log odds)";
        break;
    }
    doc[std::string(to_string(sc))] = std::move(j);
  }
  return doc.dump(2) + "\n";
}

}  // namespace basiccs
