#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "basiccs/error.hpp"
#include "basiccs/serialize.hpp"

namespace basiccs {

namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw UsageError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw UsageError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_if(const Json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_from(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Json optional_number(const std::optional<double>& v) { return v ? number_or_null(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

template <typename F>
auto translate_json_errors(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed JSON document: ") + e.what());
  }
}

}  // namespace

ModelConfig config_from_json(const Json& j) {
  return translate_json_errors([&] {
    check_keys(j,
               {"K", "outcome_type", "favorable_label", "kernel", "feature_selection", "priors", "restarts",
                "max_iters", "mc_samples", "base_step", "seed", "gp_budget", "gp_max_rows", "init_jitter"},
               "config");
    ModelConfig c;
    read_if(j, "K", c.K);
    if (j.contains("outcome_type")) {
      const auto t = j.at("outcome_type").get<std::string>();
      if (t == "continuous") {
        c.outcome.tag = OutcomeType::Tag::continuous;
      } else if (t == "binary") {
        c.outcome.tag = OutcomeType::Tag::binary;
      } else {
        throw UsageError("outcome_type must be 'continuous' or 'binary'");
      }
    }
    read_if(j, "favorable_label", c.outcome.favorable_label);
    if (j.contains("kernel")) c.kernel = kernel_kind_from_string(j.at("kernel").get<std::string>());
    read_if(j, "feature_selection", c.feature_selection);
    if (j.contains("priors")) {
      const auto& p = j.at("priors");
      check_keys(p,
                 {"beta_prior_mean", "beta_prior_sd", "sigma_halfnormal_sd", "gamma_beta_a", "gamma_beta_b",
                  "pi_dirichlet_conc", "theta_mu_prior_sd", "theta_sd_halfnormal_sd", "theta_p_beta_a",
                  "theta_p_beta_b"},
                 "priors");
      auto& pr = c.priors;
      if (p.contains("beta_prior_mean")) {
        const auto& m = p.at("beta_prior_mean");
        pr.beta_prior_mean = m.is_array() ? m.get<std::vector<double>>() : std::vector<double>{m.get<double>()};
      }
      read_if(p, "beta_prior_sd", pr.beta_prior_sd);
      read_if(p, "sigma_halfnormal_sd", pr.sigma_halfnormal_sd);
      read_if(p, "gamma_beta_a", pr.gamma_beta_a);
      read_if(p, "gamma_beta_b", pr.gamma_beta_b);
      read_if(p, "pi_dirichlet_conc", pr.pi_dirichlet_conc);
      read_if(p, "theta_mu_prior_sd", pr.theta_mu_prior_sd);
      read_if(p, "theta_sd_halfnormal_sd", pr.theta_sd_halfnormal_sd);
      read_if(p, "theta_p_beta_a", pr.theta_p_beta_a);
      read_if(p, "theta_p_beta_b", pr.theta_p_beta_b);
    }
    read_if(j, "restarts", c.restarts);
    read_if(j, "max_iters", c.max_iters);
    read_if(j, "mc_samples", c.mc_samples);
    read_if(j, "base_step", c.base_step);
    read_if(j, "seed", c.seed);
    read_if(j, "gp_budget", c.gp_budget);
    read_if(j, "gp_max_rows", c.gp_max_rows);
    read_if(j, "init_jitter", c.init_jitter);
    c.validate();
    return c;
  });
}

Json to_json(const PriorConfig& p) {
  Json j;
  j["beta_prior_mean"] = p.beta_prior_mean;
  j["beta_prior_sd"] = p.beta_prior_sd;
  j["sigma_halfnormal_sd"] = p.sigma_halfnormal_sd;
  j["gamma_beta_a"] = p.gamma_beta_a;
  j["gamma_beta_b"] = p.gamma_beta_b;
  j["pi_dirichlet_conc"] = p.pi_dirichlet_conc;
  j["theta_mu_prior_sd"] = p.theta_mu_prior_sd;
  j["theta_sd_halfnormal_sd"] = p.theta_sd_halfnormal_sd;
  j["theta_p_beta_a"] = p.theta_p_beta_a;
  j["theta_p_beta_b"] = p.theta_p_beta_b;
  return j;
}

Json to_json(const ModelConfig& c) {
  Json j;
  j["K"] = c.K;
  j["outcome_type"] = c.outcome.is_binary() ? "binary" : "continuous";
  j["favorable_label"] = c.outcome.favorable_label;
  j["kernel"] = std::string(to_string(c.kernel));
  j["feature_selection"] = c.feature_selection;
  j["priors"] = to_json(c.priors);
  j["restarts"] = c.restarts;
  j["max_iters"] = c.max_iters;
  j["mc_samples"] = c.mc_samples;
  j["base_step"] = c.base_step;
  j["seed"] = c.seed;
  j["gp_budget"] = c.gp_budget;
  j["gp_max_rows"] = c.gp_max_rows;
  j["init_jitter"] = c.init_jitter;
  return j;
}

CovariateSchema schema_from_json(const Json& j) {
  CovariateSchema s;
  try {
    if (!j.is_object()) throw SchemaError("schema must be a JSON object");
    for (const auto& [name, entry] : j.items()) {
      if (!entry.is_object()) throw SchemaError("schema entry for '" + name + "' must be an object");
      for (const auto& [key, value] : entry.items()) {
        if (key != "kind" && key != "levels") throw SchemaError("unknown key '" + key + "' for column '" + name + "'");
      }
      CovariateColumn c;
      c.name = name;
      c.kind = column_kind_from_string(entry.at("kind").get<std::string>());
      if (entry.contains("levels")) c.levels = entry.at("levels").get<std::vector<std::string>>();
      if (c.kind != ColumnKind::categorical && !c.levels.empty()) {
        throw SchemaError("levels given for non-categorical column '" + name + "'");
      }
      s.columns.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  s.validate();
  return s;
}

Json to_json(const CovariateSchema& s) {
  Json j = Json::object();
  for (const auto& c : s.columns) {
    Json e;
    e["kind"] = std::string(to_string(c.kind));
    if (c.kind == ColumnKind::categorical) e["levels"] = c.levels;
    j[c.name] = std::move(e);
  }
  return j;
}

Json to_json(const GpHyper& h) {
  Json j;
  j["alpha"] = h.alpha;
  j["rho"] = std::vector<double>(h.rho.data(), h.rho.data() + h.rho.size());
  j["noise_sd"] = h.noise_sd;
  j["jitter"] = h.jitter;
  j["kernel"] = std::string(to_string(h.kernel));
  return j;
}

GpHyper gp_hyper_from_json(const Json& j) {
  return translate_json_errors([&] {
    check_keys(j, {"alpha", "rho", "noise_sd", "jitter", "kernel"}, "gp hyperparameters");
    GpHyper h;
    h.alpha = j.at("alpha").get<double>();
    const auto rho = j.at("rho").get<std::vector<double>>();
    h.rho = Eigen::Map<const VectorXd>(rho.data(), static_cast<Eigen::Index>(rho.size()));
    h.noise_sd = j.at("noise_sd").get<double>();
    h.jitter = j.at("jitter").get<double>();
    h.kernel = kernel_kind_from_string(j.at("kernel").get<std::string>());
    return h;
  });
}

Json to_json(const MetricsReport& r) {
  Json j;
  j["K"] = r.K;
  j["outcome"] = r.outcome;
  j["n"] = r.n;
  j["ari"] = optional_number(r.ari);
  j["pehe"] = optional_number(r.pehe);
  if (r.sate_range) {
    j["sate_range"] = Json::array({number_or_null(r.sate_range->first), number_or_null(r.sate_range->second)});
  } else {
    j["sate_range"] = nullptr;
  }
  Json clusters = Json::array();
  for (const auto& s : r.sate) {
    Json c;
    c["cluster"] = s.cluster + 1;
    c["n_treated"] = s.n_treated;
    c["n_control"] = s.n_control;
    c["defined"] = s.defined;
    c["estimate"] = s.defined ? number_or_null(s.estimate) : Json(nullptr);
    c["ci_low"] = s.defined ? number_or_null(s.ci_low) : Json(nullptr);
    c["ci_high"] = s.defined ? number_or_null(s.ci_high) : Json(nullptr);
    if (r.outcome == "binary") {
      c["odds_ratio"] = s.defined ? number_or_null(s.odds_ratio) : Json(nullptr);
      c["or_ci_low"] = s.defined ? number_or_null(s.or_ci_low) : Json(nullptr);
      c["or_ci_high"] = s.defined ? number_or_null(s.or_ci_high) : Json(nullptr);
      c["contingency"] = {{"treated_events", s.treated_events},
                          {"treated_nonevents", s.treated_nonevents},
                          {"control_events", s.control_events},
                          {"control_nonevents", s.control_nonevents}};
      c["haldane"] = s.haldane;
    }
    clusters.push_back(std::move(c));
  }
  j["sate"] = std::move(clusters);
  j["policy_risk"] = number_or_null(r.policy_risk.value);
  j["policy_treat_group_imputed"] = r.policy_risk.treat_group_imputed;
  j["policy_control_group_imputed"] = r.policy_risk.control_group_imputed;
  if (r.outcome == "binary") {
    j["control_accuracy"] = optional_number(r.control_accuracy);
  } else {
    j["control_rmse"] = optional_number(r.control_rmse);
  }
  j["assignment_ties"] = r.assignment_ties;
  return j;
}

MetricsReport metrics_report_from_json(const Json& j) {
  return translate_json_errors([&] {
    MetricsReport r;
    r.K = j.at("K").get<int>();
    r.outcome = j.at("outcome").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.ari = optional_from(j, "ari");
    r.pehe = optional_from(j, "pehe");
    if (!j.at("sate_range").is_null()) {
      r.sate_range = std::make_pair(number_from(j.at("sate_range").at(0)), number_from(j.at("sate_range").at(1)));
    }
    for (const auto& c : j.at("sate")) {
      SateEstimate s;
      s.cluster = c.at("cluster").get<int>() - 1;
      s.n_treated = c.at("n_treated").get<std::size_t>();
      s.n_control = c.at("n_control").get<std::size_t>();
      s.defined = c.at("defined").get<bool>();
      if (s.defined) {
        s.estimate = number_from(c.at("estimate"));
        s.ci_low = number_from(c.at("ci_low"));
        s.ci_high = number_from(c.at("ci_high"));
      }
      if (c.contains("contingency")) {
        if (s.defined) {
          s.odds_ratio = number_from(c.at("odds_ratio"));
          s.or_ci_low = number_from(c.at("or_ci_low"));
          s.or_ci_high = number_from(c.at("or_ci_high"));
        }
        const auto& t = c.at("contingency");
        s.treated_events = t.at("treated_events").get<std::size_t>();
        s.treated_nonevents = t.at("treated_nonevents").get<std::size_t>();
        s.control_events = t.at("control_events").get<std::size_t>();
        s.control_nonevents = t.at("control_nonevents").get<std::size_t>();
        s.haldane = c.at("haldane").get<bool>();
      }
      r.sate.push_back(s);
    }
    r.policy_risk.value = number_from(j.at("policy_risk"));
    r.policy_risk.treat_group_imputed = j.at("policy_treat_group_imputed").get<bool>();
    r.policy_risk.control_group_imputed = j.at("policy_control_group_imputed").get<bool>();
    r.control_accuracy = optional_from(j, "control_accuracy");
    r.control_rmse = optional_from(j, "control_rmse");
    r.assignment_ties = j.at("assignment_ties").get<std::size_t>();
    return r;
  });
}

Json to_json(const std::vector<SweepRow>& rows) {
  Json table = Json::array();
  for (const auto& row : rows) {
    const auto& v = row.validation;
    Json j;
    j["K"] = row.K;
    j["final_elbo"] = number_or_null(row.final_elbo);
    j["pehe"] = optional_number(v.pehe);
    j["ari"] = optional_number(v.ari);
    if (v.outcome == "binary") {
      j["control_accuracy"] = optional_number(v.control_accuracy);
    } else {
      j["control_rmse"] = optional_number(v.control_rmse);
    }
    j["policy_risk"] = number_or_null(v.policy_risk.value);
    if (v.sate_range) {
      j["sate_range"] = Json::array({number_or_null(v.sate_range->first), number_or_null(v.sate_range->second)});
    } else {
      j["sate_range"] = nullptr;
    }
    table.push_back(std::move(j));
  }
  return table;
}

}  // namespace basiccs
