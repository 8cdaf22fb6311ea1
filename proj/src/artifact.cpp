#include <fstream>
#include <string>

#include "basiccs/error.hpp"
#include "basiccs/serialize.hpp"

namespace basiccs {

namespace {

constexpr const char* kFormat = "basiccs-model";
constexpr int kVersion = 1;

Json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vec_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json mat_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Eigen::RowVectorXd r = m.row(i);
    rows.push_back(std::vector<double>(r.data(), r.data() + r.size()));
  }
  return rows;
}

MatrixXd mat_from(const Json& j, Eigen::Index cols) {
  MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto r = j.at(i).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(r.size()) != cols) throw SchemaError("artifact matrix row has the wrong width");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = r[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

Json to_json(const ModelArtifact& a) {
  const FitResult& f = a.model;
  Json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["config"] = to_json(a.config);
  j["schema"] = to_json(a.schema);
  Json stats = Json::array();
  for (const auto& s : a.stats.columns) stats.push_back({{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}});
  j["standardization"] = std::move(stats);
  Json cols = Json::array();
  for (std::size_t d = 0; d < a.column_names.size(); ++d) {
    cols.push_back({{"name", a.column_names[d]},
                    {"kind", f.structure.kinds[d] == FeatureKind::binary ? "binary" : "continuous"}});
  }
  j["columns"] = std::move(cols);
  j["feature_selection"] = f.structure.feature_selection;
  j["population_reference"] = {{"theta0_mu", vec_json(f.ref.theta0_mu)}, {"theta0_p", vec_json(f.ref.theta0_p)}};
  j["gp"] = {{"hyper", to_json(f.globals.gp_hyper)}, {"mu0_offset", f.globals.mu0_offset}};

  Json clusters = Json::array();
  for (const auto& c : f.clusters) {
    clusters.push_back({{"theta_mu", vec_json(c.theta_mu)},
                        {"theta_sd", vec_json(c.theta_sd)},
                        {"theta_p", vec_json(c.theta_p)},
                        {"gamma", vec_json(c.gamma)},
                        {"beta", c.beta}});
  }
  j["clusters"] = std::move(clusters);
  j["pi"] = vec_json(f.globals.pi);
  j["sigma0"] = f.globals.sigma0;
  j["sigma1"] = f.globals.sigma1;
  j["posterior"] = {{"mean", vec_json(f.posterior.mean)}, {"log_sd", vec_json(f.posterior.log_sd)}};
  j["train_inputs"] = mat_json(f.globals.gp_latent.train_inputs);
  j["latent_whitened"] = vec_json(f.globals.gp_latent.whitened);
  j["latent_values"] = vec_json(f.globals.gp_latent.values);
  j["responsibilities"] = mat_json(f.responsibilities);

  Json restarts = Json::array();
  for (const auto& r : f.restarts) {
    restarts.push_back({{"index", r.index + 1},
                        {"seed", r.seed},
                        {"ok", r.ok},
                        {"final_elbo", r.ok ? Json(r.final_elbo) : Json(nullptr)},
                        {"iterations", r.iterations},
                        {"converged", r.converged},
                        {"error", r.error}});
  }
  j["diagnostics"] = {{"final_elbo", f.final_elbo},
                      {"best_restart", f.best_restart + 1},
                      {"seed", f.seed},
                      {"restarts", std::move(restarts)},
                      {"elbo_trace", f.elbo_trace}};
  return j;
}

ModelArtifact artifact_from_json(const Json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != kFormat) throw SchemaError("not a model artifact");
    if (j.at("version").get<int>() != kVersion) throw SchemaError("unsupported artifact version");
    ModelArtifact a;
    a.config = config_from_json(j.at("config"));
    a.schema = schema_from_json(j.at("schema"));
    for (const auto& s : j.at("standardization")) {
      a.stats.columns.push_back({s.at("name").get<std::string>(), s.at("mean").get<double>(), s.at("sd").get<double>()});
    }
    FitResult& f = a.model;
    f.structure.K = a.config.K;
    f.structure.outcome = a.config.outcome;
    f.structure.feature_selection = j.at("feature_selection").get<bool>();
    for (const auto& c : j.at("columns")) {
      a.column_names.push_back(c.at("name").get<std::string>());
      const auto kind = c.at("kind").get<std::string>();
      if (kind != "binary" && kind != "continuous") throw SchemaError("unknown encoded column kind '" + kind + "'");
      f.structure.kinds.push_back(kind == "binary" ? FeatureKind::binary : FeatureKind::continuous);
    }
    const auto D = static_cast<Eigen::Index>(f.structure.kinds.size());
    f.priors = a.config.priors;
    f.ref.theta0_mu = vec_from(j.at("population_reference").at("theta0_mu"));
    f.ref.theta0_p = vec_from(j.at("population_reference").at("theta0_p"));
    f.globals.gp_hyper = gp_hyper_from_json(j.at("gp").at("hyper"));
    f.globals.mu0_offset = j.at("gp").at("mu0_offset").get<double>();
    for (const auto& c : j.at("clusters")) {
      ClusterParams p;
      p.theta_mu = vec_from(c.at("theta_mu"));
      p.theta_sd = vec_from(c.at("theta_sd"));
      p.theta_p = vec_from(c.at("theta_p"));
      p.gamma = vec_from(c.at("gamma"));
      p.beta = c.at("beta").get<double>();
      if (p.theta_mu.size() != D || p.theta_sd.size() != D || p.theta_p.size() != D || p.gamma.size() != D) {
        throw SchemaError("artifact cluster parameters have the wrong length");
      }
      f.clusters.push_back(std::move(p));
    }
    if (static_cast<int>(f.clusters.size()) != f.structure.K) throw SchemaError("artifact cluster count != K");
    f.globals.pi = vec_from(j.at("pi"));
    f.globals.sigma0 = j.at("sigma0").get<double>();
    f.globals.sigma1 = j.at("sigma1").get<double>();
    f.posterior.mean = vec_from(j.at("posterior").at("mean"));
    f.posterior.log_sd = vec_from(j.at("posterior").at("log_sd"));

    auto& lat = f.globals.gp_latent;
    lat.train_inputs = mat_from(j.at("train_inputs"), D);
    lat.whitened = vec_from(j.at("latent_whitened"));
    lat.values = vec_from(j.at("latent_values"));
    if (lat.whitened.size() != lat.train_inputs.rows() || lat.values.size() != lat.train_inputs.rows()) {
      throw SchemaError("artifact latent surface does not match the training inputs");
    }
    const MatrixXd K = kernel_matrix(lat.train_inputs, lat.train_inputs, f.globals.gp_hyper, false);
    auto chol = jittered_cholesky(K, f.globals.gp_hyper.alpha, f.globals.gp_hyper.jitter);
    lat.chol = std::move(chol.lower);
    f.responsibilities = mat_from(j.at("responsibilities"), f.structure.K);

    const auto& diag = j.at("diagnostics");
    f.final_elbo = diag.at("final_elbo").get<double>();
    f.best_restart = diag.at("best_restart").get<int>() - 1;
    f.seed = diag.at("seed").get<std::uint64_t>();
    f.elbo_trace = diag.at("elbo_trace").get<std::vector<double>>();
    for (const auto& r : diag.at("restarts")) {
      RestartSummary s;
      s.index = r.at("index").get<int>() - 1;
      s.seed = r.at("seed").get<std::uint64_t>();
      s.ok = r.at("ok").get<bool>();
      if (s.ok) s.final_elbo = r.at("final_elbo").get<double>();
      s.iterations = r.at("iterations").get<int>();
      s.converged = r.at("converged").get<bool>();
      s.error = r.at("error").get<std::string>();
      f.restarts.push_back(std::move(s));
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed model artifact: ") + e.what());
  }
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("cannot parse JSON file '" + path.string() + "': " + e.what());
  }
}

}  // namespace basiccs
