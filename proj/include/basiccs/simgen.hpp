#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "basiccs/data.hpp"

namespace basiccs {

enum class Scenario { simhte, simnull, simfs, sanity_lc, sanity_ll, binary_logit };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view s);

struct ScenarioSpec {
  Scenario scenario = Scenario::simhte;
  int n = 1200;
  double treat_prop = 0.5;
  std::uint64_t seed = 0;
  double noise_sd = 1.0;

  void validate() const;
};

/// Fixed generating constants of a scenario. Continuous columns come first,
/// then binary ones.
struct ScenarioTruth {
  int K = 1;
  int n_continuous = 0;
  int n_binary = 0;
  std::vector<double> pi;
  std::vector<std::vector<double>> means;  // K x n_continuous
  std::vector<std::vector<double>> sds;    // K x n_continuous
  std::vector<std::vector<double>> probs;  // K x n_binary
  /// Per-cluster effect (cluster mean effect for sanity_ll; log OR for binary_logit).
  std::vector<double> tau;
  bool binary_outcome = false;
};

ScenarioTruth scenario_truth(Scenario s);

struct Simulation {
  Dataset data;  // raw scale, unstandardized, with ground truth columns
  CovariateSchema schema;
};

/// Draws a dataset. Cluster sizes are exact largest-remainder counts of
/// n * pi in shuffled order; treatment is Bernoulli(treat_prop), redrawn if
/// one arm ends up empty.
Simulation simulate(const ScenarioSpec& spec);

/// The nonlinear control surface of simhte on raw covariates x1..x12.
double simhte_mu0(std::span<const double> x);

/// CSV of (row_id, y0, y1, cluster, tau, flag); flag marks
/// |y1 - y0 - tau| > 6 noise_sd. Continuous outcomes only.
std::string potential_outcome_table(const Dataset& ds, double noise_sd, std::size_t* flagged = nullptr);

/// Every scenario's constants as a JSON document.
std::string scenario_constants_json();

}  // namespace basiccs
