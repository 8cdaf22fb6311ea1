#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "json.hpp"

#include "basiccs/error.hpp"
#include "basiccs/simgen.hpp"

using namespace basiccs;

namespace {

Simulation draw(Scenario s, int n, std::uint64_t seed, double treat_prop = 0.5, double noise = 1.0) {
  ScenarioSpec spec;
  spec.scenario = s;
  spec.n = n;
  spec.seed = seed;
  spec.treat_prop = treat_prop;
  spec.noise_sd = noise;
  return simulate(spec);
}

double corr(const VectorXd& a, const VectorXd& b) {
  const VectorXd x = a.array() - a.mean();
  const VectorXd y = b.array() - b.mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

}  // namespace

TEST_CASE("simhte cluster proportions and effects") {
  const Dataset ds = draw(Scenario::simhte, 1200, 7).data;
  CHECK(ds.dims() == 12);
  const std::vector<double> pi = {0.19, 0.21, 0.17, 0.21, 0.22};
  std::vector<double> counts(5, 0.0);
  for (int c : *ds.true_cluster) counts[static_cast<std::size_t>(c - 1)] += 1.0;
  for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(counts[k] / 1200.0 - pi[k]) <= 0.04);
  std::set<double> taus(ds.true_tau->begin(), ds.true_tau->end());
  CHECK(taus == std::set<double>{-5.0, 0.0, 0.5, 5.0});
  for (std::size_t d = 0; d < 12; ++d) CHECK(ds.column_kinds[d] == (d < 6 ? FeatureKind::continuous : FeatureKind::binary));
}

TEST_CASE("simhte control surface at the origin") {
  const std::vector<double> zero(12, 0.0);
  CHECK(simhte_mu0(zero) == doctest::Approx(1.05).epsilon(1e-12));
}

TEST_CASE("simnull has one cluster and no effect") {
  const Dataset ds = draw(Scenario::simnull, 600, 3, 0.5, 0.5).data;
  CHECK((ds.true_tau->array() == 0.0).all());
  CHECK(std::all_of(ds.true_cluster->begin(), ds.true_cluster->end(), [](int c) { return c == 1; }));
  const VectorXd diff = *ds.true_y1 - *ds.true_y0;
  CHECK(std::abs(diff.mean()) < 0.1);
  const double sd = std::sqrt((diff.array() - diff.mean()).square().sum() / (diff.size() - 1));
  CHECK(sd == doctest::Approx(std::sqrt(2.0) * 0.5).epsilon(0.1));
}

TEST_CASE("simhte effect of the tau = 5 cluster shows in the potential outcomes") {
  const Dataset ds = draw(Scenario::simhte, 1200, 11).data;
  double s = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    if ((*ds.true_tau)[i] == 5.0) {
      s += (*ds.true_y1)[i] - (*ds.true_y0)[i];
      ++n;
    }
  }
  CHECK(std::abs(s / n - 5.0) <= 0.2);
}

TEST_CASE("potential outcome flags over 20 seeds") {
  std::size_t total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::size_t flagged = 0;
    const Dataset ds = draw(Scenario::simhte, 1200, seed).data;
    const std::string table = potential_outcome_table(ds, 1.0, &flagged);
    CHECK(std::count(table.begin(), table.end(), '\n') == 1201);
    total += flagged;
  }
  CHECK(total == 0);
}

TEST_CASE("observed outcomes compose the potential outcomes") {
  for (auto s : {Scenario::simhte, Scenario::simfs, Scenario::sanity_ll, Scenario::binary_logit}) {
    const Dataset ds = draw(s, 300, 5).data;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      const int a = ds.a[static_cast<std::size_t>(i)];
      CHECK(ds.y[i] == (a == 1 ? (*ds.true_y1)[i] : (*ds.true_y0)[i]));
    }
  }
}

TEST_CASE("treatment is independent of the covariates") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset ds = draw(Scenario::simhte, 1200, seed).data;
    VectorXd a(ds.rows());
    for (Eigen::Index i = 0; i < ds.rows(); ++i) a[i] = ds.a[static_cast<std::size_t>(i)];
    for (Eigen::Index d = 0; d < ds.dims(); ++d) CHECK(std::abs(corr(a, ds.X.col(d))) < 0.1);
  }
}

TEST_CASE("treat_prop controls the treated share") {
  const Dataset ds = draw(Scenario::simhte, 1200, 2, 0.2).data;
  const double share = static_cast<double>(std::count(ds.a.begin(), ds.a.end(), 1)) / 1200.0;
  CHECK(std::abs(share - 0.2) < 0.04);
}

TEST_CASE("generation is deterministic per seed") {
  for (auto s : {Scenario::simhte, Scenario::simnull, Scenario::simfs, Scenario::sanity_lc, Scenario::sanity_ll,
                 Scenario::binary_logit}) {
    CHECK(to_csv(draw(s, 200, 9).data) == to_csv(draw(s, 200, 9).data));
    CHECK(to_csv(draw(s, 200, 9).data) != to_csv(draw(s, 200, 10).data));
  }
}

TEST_CASE("simfs: dimension 2 carries no cluster signal") {
  const ScenarioTruth t = scenario_truth(Scenario::simfs);
  REQUIRE(t.K == 4);
  for (const auto& m : t.means) CHECK(m[1] == t.means[0][1]);
  // Empirical check at a size where the cluster-mean standard error is about 0.014.
  const Dataset ds = draw(Scenario::simfs, 20000, 4).data;
  const double pop = ds.X.col(1).mean();
  for (int k = 1; k <= 4; ++k) {
    double s = 0.0;
    int n = 0;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      if ((*ds.true_cluster)[static_cast<std::size_t>(i)] == k) {
        s += ds.X(i, 1);
        ++n;
      }
    }
    CHECK(std::abs(s / n - pop) <= 0.05);
  }
  std::set<double> taus(ds.true_tau->begin(), ds.true_tau->end());
  CHECK(taus == std::set<double>{-2.0, 2.0});
}

TEST_CASE("sanity scenarios: five clusters, nine covariates with three binary") {
  for (auto s : {Scenario::sanity_lc, Scenario::sanity_ll}) {
    const Simulation sim = draw(s, 720, 1);
    CHECK(sim.data.dims() == 9);
    CHECK(std::count(sim.data.column_kinds.begin(), sim.data.column_kinds.end(), FeatureKind::binary) == 3);
    CHECK(std::set<int>(sim.data.true_cluster->begin(), sim.data.true_cluster->end()).size() == 5);
    CHECK(sim.schema.columns.size() == 9);
  }
  // Constant effects per cluster for lc, varying within clusters for ll.
  const Dataset lc = draw(Scenario::sanity_lc, 720, 1).data;
  const Dataset ll = draw(Scenario::sanity_ll, 720, 1).data;
  std::set<double> lc_taus(lc.true_tau->begin(), lc.true_tau->end());
  std::set<double> ll_taus(ll.true_tau->begin(), ll.true_tau->end());
  CHECK(lc_taus.size() == 5);
  CHECK(ll_taus.size() > 5);
}

TEST_CASE("binary_logit draws 0/1 outcomes with two clusters") {
  const Dataset ds = draw(Scenario::binary_logit, 2000, 3).data;
  CHECK(ds.outcome.is_binary());
  CHECK(((ds.y.array() == 0.0) || (ds.y.array() == 1.0)).all());
  std::set<double> taus(ds.true_tau->begin(), ds.true_tau->end());
  CHECK(taus == std::set<double>{-1.0, 1.0});
  CHECK_THROWS(potential_outcome_table(ds, 1.0));
}

TEST_CASE("schema matches the emitted columns") {
  const Simulation sim = draw(Scenario::simhte, 100, 1);
  CHECK(sim.schema.encoded_names() == sim.data.column_names);
  CHECK_NOTHROW(sim.schema.validate());
}

TEST_CASE("spec validation") {
  ScenarioSpec s;
  s.n = 19;
  CHECK_THROWS(s.validate());
  s.n = 100;
  s.treat_prop = 1.5;
  CHECK_THROWS(s.validate());
  s.treat_prop = 0.0;
  CHECK_THROWS(s.validate());
  s.treat_prop = 0.5;
  s.noise_sd = 0.0;
  CHECK_THROWS(s.validate());
  CHECK_THROWS(scenario_from_string("simxyz"));
  CHECK(scenario_from_string("sanity_ll") == Scenario::sanity_ll);
  CHECK(to_string(Scenario::simfs) == "simfs");
}

TEST_CASE("scenario constants document is valid JSON covering every scenario") {
  const auto j = nlohmann::json::parse(scenario_constants_json());
  for (const char* name : {"simhte", "simnull", "simfs", "sanity_lc", "sanity_ll", "binary_logit"}) {
    CHECK(j.contains(name));
  }
}
