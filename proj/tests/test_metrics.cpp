#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"

#include "basiccs/error.hpp"
#include "basiccs/metrics.hpp"
#include "basiccs/simgen.hpp"
#include "fixtures.hpp"

using namespace basiccs;

namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

// ARI from explicit enumeration of all pairs.
double brute_ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
    }
  }
  const double pairs = choose2(static_cast<double>(n));
  const double expected = in_a * in_b / pairs;
  const double max_index = 0.5 * (in_a + in_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

Dataset toy(const std::vector<int>& a, const std::vector<double>& y, bool binary = false) {
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(a.size());
  ds.X = MatrixXd::Zero(n, 1);
  ds.column_names = {"x"};
  ds.column_kinds = {FeatureKind::continuous};
  ds.a = a;
  ds.y = Eigen::Map<const VectorXd>(y.data(), n);
  ds.outcome.tag = binary ? OutcomeType::Tag::binary : OutcomeType::Tag::continuous;
  ds.row_ids.resize(a.size());
  std::iota(ds.row_ids.begin(), ds.row_ids.end(), std::size_t{0});
  return ds;
}

// Two-cluster model on one continuous column, with a flat control surface.
FitResult hand_model(const Dataset& train, double mu_a, double mu_b, double sd, VectorXd tau) {
  FitResult f;
  f.structure.K = 2;
  f.structure.kinds = train.column_kinds;
  f.structure.outcome = train.outcome;
  f.structure.feature_selection = false;
  f.ref = PopulationReference::from_dataset(train);
  f.clusters.assign(2, ClusterParams::neutral(train.dims()));
  f.clusters[0].theta_mu[0] = mu_a;
  f.clusters[1].theta_mu[0] = mu_b;
  for (auto& c : f.clusters) {
    c.theta_sd[0] = sd;
    c.gamma.setOnes();
  }
  f.clusters[0].beta = tau[0];
  f.clusters[1].beta = tau[1];
  f.globals.pi = VectorXd::Constant(2, 0.5);
  f.globals.gp_hyper = fixtures::small_hyper(train.dims());
  f.globals.gp_latent = make_latent(train.X, f.globals.gp_hyper, VectorXd::Zero(train.rows()));
  f.globals.gp_latent.train_inputs = train.X;
  f.globals.mu0_offset = 0.25;
  return f;
}

}  // namespace

TEST_CASE("ari examples") {
  const std::vector<int> a = {0, 0, 1, 1};
  CHECK(ari(a, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(ari(a, std::vector<int>{0, 1, 0, 1}) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(ari(a, a) == 1.0);
  CHECK_THROWS(ari(a, std::vector<int>{0, 1, 0}));
}

TEST_CASE("ari matches pair counting and is permutation invariant on 100 random instances") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t % 29;
    std::uniform_int_distribution<int> la(0, 1 + t % 4), lb(0, 1 + t % 3);
    std::vector<int> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    for (auto& v : a) v = la(rng);
    for (auto& v : b) v = lb(rng);
    CHECK(std::abs(ari(a, b) - brute_ari(a, b)) < 1e-12);
    std::vector<int> relabeled = a;
    for (auto& v : relabeled) v = 10 - 3 * v;
    CHECK(std::abs(ari(relabeled, b) - ari(a, b)) < 1e-12);
    CHECK(std::abs(ari(a, b) - ari(b, a)) < 1e-12);
  }
}

TEST_CASE("pehe examples and properties") {
  VectorXd tau(3), hat(3);
  tau << 1, 2, 3;
  hat << 0, 2, 4;
  CHECK(pehe(tau, tau) == 0.0);
  CHECK(pehe(tau.array() + 1.0, tau) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pehe(hat, tau) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
  CHECK_THROWS(pehe(VectorXd::Zero(2), tau));

  Rng rng(2);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 17;
    VectorXd x(n), y(n), z(n);
    for (int i = 0; i < n; ++i) {
      x[i] = n01(rng);
      y[i] = n01(rng);
      z[i] = n01(rng);
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    CHECK(std::abs(pehe(x, y) - std::sqrt(s / n)) < 1e-12);
    CHECK(pehe(x, y) == pehe(y, x));
    CHECK(pehe(x, z) <= pehe(x, y) + pehe(y, z) + 1e-12);
  }
}

TEST_CASE("sate matches a brute-force group-by on 100 random instances") {
  Rng rng(3);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 100; ++t) {
    const int n = 12 + t % 20, K = 1 + t % 4;
    std::uniform_int_distribution<int> lab(0, K - 1);
    std::vector<int> a(static_cast<std::size_t>(n)), labels(static_cast<std::size_t>(n));
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = i % 2;
      labels[static_cast<std::size_t>(i)] = lab(rng);
      y[static_cast<std::size_t>(i)] = n01(rng) + a[static_cast<std::size_t>(i)];
    }
    const auto est = sate(toy(a, y), labels, K);
    REQUIRE(est.size() == static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      std::map<int, std::vector<double>> arms;
      for (int i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] == k) arms[a[static_cast<std::size_t>(i)]].push_back(y[static_cast<std::size_t>(i)]);
      }
      const auto& e = est[static_cast<std::size_t>(k)];
      if (arms[0].empty() || arms[1].empty()) {
        CHECK_FALSE(e.defined);
        continue;
      }
      auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      CHECK(e.defined);
      CHECK(std::abs(e.estimate - (mean(arms[1]) - mean(arms[0]))) < 1e-12);
      if (arms[0].size() + arms[1].size() > 2) {
        CHECK(e.ci_low <= e.estimate);
        CHECK(e.ci_high >= e.estimate);
      } else {
        CHECK(std::isnan(e.ci_low));
      }
    }
  }
}

TEST_CASE("sate continuous examples") {
  const auto e = sate(toy({1, 1, 0, 0}, {5, 5, 2, 2}), std::vector<int>{0, 0, 0, 0}, 1);
  CHECK(e[0].estimate == 3.0);
  const auto z = sate(toy({1, 1, 0, 0}, {4, 6, 3, 7}), std::vector<int>{0, 0, 0, 0}, 1);
  CHECK(z[0].estimate == 0.0);
  // Pooled variance 2.0 (dof 2), se sqrt(2 (1/2 + 1/2)).
  const auto w = sate(toy({1, 1, 0, 0}, {4, 6, 2, 2}), std::vector<int>{0, 0, 0, 0}, 1);
  CHECK(w[0].ci_high - w[0].estimate == doctest::Approx(1.959963984540054 * std::sqrt(1.0)).epsilon(1e-12));
  // All in one arm: undefined.
  const auto u = sate(toy({1, 1, 0, 0}, {1, 2, 3, 4}), std::vector<int>{0, 0, 1, 1}, 2);
  CHECK_FALSE(u[0].defined);
  CHECK_FALSE(u[1].defined);
}

TEST_CASE("sate binary: odds ratio from a 2x2 table") {
  std::vector<int> a;
  std::vector<double> y;
  auto add = [&](int arm, int event, int count) {
    for (int i = 0; i < count; ++i) {
      a.push_back(arm);
      y.push_back(event);
    }
  };
  add(1, 1, 53);
  add(1, 0, 265);
  add(0, 1, 43);
  add(0, 0, 280);
  const std::vector<int> labels(a.size(), 0);
  const auto e = sate(toy(a, y, true), labels, 1)[0];
  CHECK(e.odds_ratio == doctest::Approx(1.3023).epsilon(1e-4));
  CHECK(e.estimate == doctest::Approx(0.2641).epsilon(1e-3));
  CHECK(e.ci_low == doctest::Approx(-0.172).epsilon(2e-3));
  CHECK(e.ci_high == doctest::Approx(0.700).epsilon(1e-3));
  CHECK(e.or_ci_low == doctest::Approx(std::exp(e.ci_low)).epsilon(1e-12));
  CHECK(e.treated_events == 53);
  CHECK(e.control_nonevents == 280);
  CHECK_FALSE(e.haldane);

  const auto h = sate(toy({1, 1, 0, 0}, {1, 1, 0, 1}, true), std::vector<int>{0, 0, 0, 0}, 1)[0];
  CHECK(h.haldane);
  CHECK(h.estimate == doctest::Approx(std::log((2.5 / 0.5) / (1.5 / 1.5))).epsilon(1e-12));
}

TEST_CASE("policy_risk examples") {
  SUBCASE("all treated by policy") {
    const Dataset ds = toy({1, 1, 1, 1, 0}, {1, 1, 0, 1, 0}, true);
    CHECK(policy_risk(ds, VectorXd::Constant(5, 1.0)).value == doctest::Approx(0.25));
  }
  SUBCASE("perfect outcomes") {
    const Dataset ds = toy({1, 0, 1, 0}, {1, 1, 1, 1}, true);
    VectorXd tau(4);
    tau << 1, -1, -1, 1;
    CHECK(policy_risk(ds, tau).value == 0.0);
  }
  SUBCASE("constant positive effect reduces to the treated arm") {
    const Dataset ds = toy({1, 0, 1, 0, 1}, {0.5, 2.0, 1.5, 3.0, 1.0});
    CHECK(policy_risk(ds, VectorXd::Constant(5, 0.3)).value == doctest::Approx(1.0 - 1.0).epsilon(1e-15));
  }
  SUBCASE("ties go to control") {
    const Dataset ds = toy({0, 0, 1}, {1, 0, 1}, true);
    CHECK(policy_risk(ds, VectorXd::Zero(3)).value == doctest::Approx(0.5));
  }
  SUBCASE("empty concordant group is imputed and flagged") {
    const Dataset ds = toy({0, 0, 1, 0}, {1, 0, 0, 1}, true);
    VectorXd tau(4);
    tau << 1, 1, -1, -1;
    const auto r = policy_risk(ds, tau);
    CHECK(r.treat_group_imputed);
    CHECK(r.control_group_imputed == false);
    // Treated arm mean 0 stands in for the empty Pol = 1, a = 1 group.
    CHECK(r.value == doctest::Approx(1.0 - (0.5 * 0.0 + 0.5 * 1.0)));
  }
  SUBCASE("no concordant units") {
    const Dataset ds = toy({0, 1}, {1, 0}, true);
    VectorXd tau(2);
    tau << 1, -1;
    CHECK_THROWS_AS(policy_risk(ds, tau), DataError);
  }
}

TEST_CASE("policy risk improves with the true effects on heterogeneous data") {
  double noisy = 0.0, oracle = 0.0;
  Rng rng(4);
  std::normal_distribution<double> n3(0.0, 3.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ScenarioSpec spec;
    spec.scenario = Scenario::simhte;
    spec.seed = seed;
    const Dataset ds = simulate(spec).data;
    VectorXd guess = *ds.true_tau;
    for (auto& v : guess) v += n3(rng);
    noisy += policy_risk(ds, guess).value;
    oracle += policy_risk(ds, *ds.true_tau).value;
  }
  CHECK(oracle <= noisy);
}

TEST_CASE("control_fit_metric examples") {
  const Dataset ds = toy({0, 0, 0, 1}, {1.0, 2.0, 4.0, 9.0});
  VectorXd perfect(4);
  perfect << 1.0, 2.0, 4.0, 0.0;
  CHECK(control_fit_metric(ds, perfect) == 0.0);
  const double m = 7.0 / 3.0;
  const double pop_sd = std::sqrt(((1 - m) * (1 - m) + (2 - m) * (2 - m) + (4 - m) * (4 - m)) / 3.0);
  CHECK(control_fit_metric(ds, VectorXd::Constant(4, m)) == doctest::Approx(pop_sd).epsilon(1e-12));

  std::vector<int> a(10, 0);
  a[9] = 1;
  std::vector<double> y = {1, 0, 1, 1, 0, 0, 1, 0, 1, 1};
  const Dataset bin = toy(a, y, true);
  VectorXd logits(10);
  for (int i = 0; i < 10; ++i) logits[i] = y[static_cast<std::size_t>(i)] == 1.0 ? 2.0 : -2.0;
  CHECK(control_fit_metric(bin, logits) == 1.0);
}

TEST_CASE("assignment ties and tie flags") {
  MatrixXd p(3, 2);
  p << 0.5, 0.5, 0.2, 0.8, 0.9, 0.1;
  const Assignment as = assignment_from_probs(p);
  CHECK(as.hard == std::vector<int>{0, 1, 0});
  CHECK(as.tie_broken == std::vector<bool>{true, false, false});
}

TEST_CASE("assign on a hand-built two-cluster model") {
  MatrixXd X(3, 1);
  X << -1.0, 0.0, 0.4;
  Dataset ds = toy({0, 1, 0}, {0.0, 0.0, 0.0});
  ds.X = X;
  VectorXd tau(2);
  tau << 2.0, -1.0;
  const FitResult f = hand_model(ds, -1.0, 1.0, 0.8, tau);
  const Assignment as = assign(f, ds);
  // Equidistant point: exact tie.
  CHECK(as.probs(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(as.tie_broken[1]);
  CHECK(as.hard[1] == 0);
  // Hand densities at x = 0.4.
  auto dens = [](double x, double m) { return std::exp(-0.5 * (x - m) * (x - m) / 0.64) / (0.8 * std::sqrt(2 * M_PI)); };
  const double pa = dens(0.4, -1.0), pb = dens(0.4, 1.0);
  CHECK(std::abs(as.probs(2, 0) - pa / (pa + pb)) < 1e-9);
  CHECK(as.hard[2] == 1);

  const VectorXd soft = predict_ite(as, tau, IteMode::soft);
  CHECK(soft[2] == doctest::Approx(2.0 * as.probs(2, 0) - as.probs(2, 1)).epsilon(1e-12));
  const VectorXd hard = predict_ite(as, tau, IteMode::hard);
  CHECK(hard[2] == -1.0);
}

TEST_CASE("predict_ite examples") {
  Assignment as = assignment_from_probs(MatrixXd{{1.0, 0.0}, {0.3, 0.7}});
  VectorXd t1(2), t2(2);
  t1 << 2.0, -1.0;
  t2 << 1.0, -1.0;
  CHECK(predict_ite(as, t1, IteMode::soft)[0] == 2.0);
  CHECK(predict_ite(as, t2, IteMode::soft)[1] == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK(predict_ite(as, t1, IteMode::hard)[0] == predict_ite(as, t1, IteMode::soft)[0]);
  CHECK_THROWS(predict_ite(as, VectorXd::Zero(3), IteMode::soft));
}

TEST_CASE("K = 1 assignment is certain") {
  Dataset ds = toy({0, 1, 0}, {0.0, 1.0, 2.0});
  ds.X << -2.0, 0.0, 3.0;
  FitResult f = hand_model(ds, 0.0, 0.0, 1.0, VectorXd::Zero(2));
  f.structure.K = 1;
  f.clusters.resize(1);
  f.globals.pi = VectorXd::Ones(1);
  const Assignment as = assign(f, ds);
  CHECK((as.probs.array() == 1.0).all());
  CHECK(as.hard == std::vector<int>{0, 0, 0});
}

TEST_CASE("evaluate reports optional metrics only when truth is present") {
  Dataset ds = toy({0, 1, 0, 1, 0, 1}, {0.1, 2.2, -0.3, 1.9, 0.4, -1.0});
  ds.X << -1.2, -0.9, -1.1, 1.0, 1.3, 0.8;
  VectorXd tau(2);
  tau << 2.0, -1.0;
  const FitResult f = hand_model(ds, -1.0, 1.0, 0.5, tau);
  const MetricsReport r = evaluate(f, ds);
  CHECK_FALSE(r.pehe.has_value());
  CHECK_FALSE(r.ari.has_value());
  CHECK(r.control_rmse.has_value());
  CHECK(r.sate.size() == 2);
  REQUIRE(r.sate_range.has_value());
  CHECK(r.sate_range->first == std::min(r.sate[0].estimate, r.sate[1].estimate));
  CHECK(r.sate_range->second == std::max(r.sate[0].estimate, r.sate[1].estimate));

  Dataset truth = ds;
  truth.true_tau = VectorXd::Constant(6, 0.5);
  truth.true_cluster = std::vector<int>{1, 1, 1, 2, 2, 2};
  const MetricsReport rt = evaluate(f, truth);
  CHECK(rt.pehe.has_value());
  CHECK(*rt.ari == 1.0);
}

TEST_CASE("oracle substitution on simHTE gives zero PEHE and the true effect range") {
  ScenarioSpec spec;
  spec.scenario = Scenario::simhte;
  spec.seed = 7;
  const Dataset ds = simulate(spec).data;
  std::vector<int> labels = *ds.true_cluster;
  for (auto& l : labels) l -= 1;
  CHECK(pehe(*ds.true_tau, *ds.true_tau) == 0.0);
  const auto est = sate(ds, labels, 5);
  double lo = 1e9, hi = -1e9;
  for (const auto& e : est) {
    lo = std::min(lo, e.estimate);
    hi = std::max(hi, e.estimate);
  }
  CHECK(lo == doctest::Approx(-5.0).epsilon(0.1));
  CHECK(hi == doctest::Approx(5.0).epsilon(0.1));
}

TEST_CASE("profile export has one row per encoded covariate") {
  Dataset ds = toy({0, 1, 0, 1}, {0, 1, 2, 3});
  ds.X << -1.0, -0.5, 0.5, 1.0;
  const FitResult f = hand_model(ds, -1.0, 1.0, 0.5, VectorXd::Zero(2));
  const std::string csv = profile_csv(f, ds, std::vector<int>{0, 0, 1, 1});
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "covariate,kind,max,min,population,cluster1_mean,cluster2_mean,cluster1_model,cluster2_model");
  std::getline(in, row);
  CHECK(row.rfind("x,continuous,", 0) == 0);
  CHECK(row.find(",-0.75,0.75,-1,1") != std::string::npos);
}
