#include "basiccs/cli.hpp"

#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "basiccs/error.hpp"
#include "basiccs/serialize.hpp"
#include "basiccs/simgen.hpp"

namespace basiccs {

namespace {

struct SimulateArgs {
  std::string scenario;
  int n = 1200;
  double treat_prop = 0.5;
  std::uint64_t seed = 0;
  double noise_sd = 1.0;
  std::string out;
  std::string schema_out;
  std::string potential_out;
  bool print_spec = false;
};

struct FitArgs {
  std::string data;
  std::string schema;
  std::string config;
  std::string out;
  int K = 0;
  bool drop_missing = false;
};

struct AssignArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string mode = "soft";
  bool drop_missing = false;
};

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string sweep_k;
  double split_fraction = 0.5;
  std::uint64_t split_seed = 0;
  std::string profile_out;
  bool drop_missing = false;
};

std::filesystem::path default_schema_path(const std::filesystem::path& data) {
  auto p = data;
  p.replace_extension(".schema.json");
  return p;
}

std::vector<int> parse_k_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto dash = tok.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const int lo = std::stoi(tok.substr(0, dash));
        const int hi = std::stoi(tok.substr(dash + 1));
        if (hi < lo) throw UsageError("bad K range '" + tok + "'");
        for (int k = lo; k <= hi; ++k) out.push_back(k);
      } else {
        out.push_back(std::stoi(tok));
      }
    } catch (const std::logic_error&) {
      throw UsageError("cannot parse K list '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("empty K list");
  for (int k : out) {
    if (k < 1) throw UsageError("K values must be at least 1");
  }
  return out;
}

/// Ingests a data file in the encoding and scale of a fitted model.
Dataset load_for_model(const ModelArtifact& art, const std::string& path, bool require_outcome, bool drop_missing) {
  IngestOptions opts;
  opts.standardize = false;
  opts.require_outcome = require_outcome;
  opts.drop_missing = drop_missing;
  Dataset raw = ingest_csv(path, art.schema, art.config.outcome, opts);
  if (raw.column_names != art.column_names) throw SchemaError("data columns do not match the model's schema");
  return apply_standardization(std::move(raw), art.stats);
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.print_spec) {
    out << scenario_constants_json();
    if (a.scenario.empty()) return 0;
  }
  if (a.scenario.empty()) throw UsageError("--scenario is required");
  if (a.out.empty()) throw UsageError("--out is required");
  ScenarioSpec spec;
  spec.scenario = scenario_from_string(a.scenario);
  spec.n = a.n;
  spec.treat_prop = a.treat_prop;
  spec.seed = a.seed;
  spec.noise_sd = a.noise_sd;
  const Simulation sim = simulate(spec);
  write_csv(sim.data, a.out);
  const auto schema_path = a.schema_out.empty() ? default_schema_path(a.out) : std::filesystem::path(a.schema_out);
  write_text_file(schema_path, to_json(sim.schema).dump(2) + "\n");
  if (!a.potential_out.empty()) write_text_file(a.potential_out, potential_outcome_table(sim.data, spec.noise_sd));
  if (!a.print_spec) {
    out << "wrote " << sim.data.rows() << " rows to " << a.out << " (schema " << schema_path.string() << ")\n";
  }
  return 0;
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
  ModelConfig config = a.config.empty() ? ModelConfig{} : config_from_json(read_json_file(a.config));
  if (a.K > 0) config.K = a.K;
  config.validate();
  const auto schema_path = a.schema.empty() ? default_schema_path(a.data) : std::filesystem::path(a.schema);
  const CovariateSchema schema = schema_from_json(read_json_file(schema_path));
  IngestOptions opts;
  opts.drop_missing = a.drop_missing;
  const Dataset ds = ingest_csv(a.data, schema, config.outcome, opts);

  ModelArtifact art;
  art.config = config;
  art.schema = schema;
  art.stats = ds.stats;
  art.column_names = ds.column_names;
  art.model = fit(ds, config);
  write_text_file(a.out, to_json(art).dump() + "\n");

  const auto& m = art.model;
  out << "final_elbo " << format_double(m.final_elbo) << " (restart " << m.best_restart + 1 << ")\n";
  for (const auto& r : m.restarts) {
    out << "restart " << r.index + 1 << ": ";
    if (r.ok) {
      out << "elbo " << format_double(r.final_elbo) << ", " << r.iterations << " iterations"
          << (r.converged ? ", converged" : "") << '\n';
    } else {
      out << "failed: " << r.error << '\n';
    }
  }
  for (std::size_t k = 0; k < m.clusters.size(); ++k) {
    out << "cluster " << k + 1 << ": pi " << format_double(m.globals.pi[static_cast<Eigen::Index>(k)]) << ", tau "
        << format_double(m.clusters[k].beta) << '\n';
  }
  return 0;
}

int cmd_assign(const AssignArgs& a, std::ostream& out) {
  if (a.mode != "soft" && a.mode != "hard") throw UsageError("--mode must be soft or hard");
  const ModelArtifact art = artifact_from_json(read_json_file(a.model));
  const Dataset ds = load_for_model(art, a.data, false, a.drop_missing);
  const Assignment as = assign(art.model, ds);
  const VectorXd ite = predict_ite(as, art.model.tau(), a.mode == "soft" ? IteMode::soft : IteMode::hard);
  const VectorXd mu0 = predict_mu0(art.model, ds);
  const int K = art.model.structure.K;

  std::ostringstream csv;
  csv << "row_id";
  for (int k = 0; k < K; ++k) csv << ",prob_" << k + 1;
  csv << ",cluster,tie_broken,mu0_hat,ite_hat\n";
  for (Eigen::Index n = 0; n < ds.rows(); ++n) {
    const auto nu = static_cast<std::size_t>(n);
    csv << ds.row_ids[nu];
    for (int k = 0; k < K; ++k) csv << ',' << format_double(as.probs(n, k));
    csv << ',' << as.hard[nu] + 1 << ',' << (as.tie_broken[nu] ? 1 : 0) << ',' << format_double(mu0[n]) << ','
        << format_double(ite[n]) << '\n';
  }
  write_text_file(a.out, csv.str());
  out << "assigned " << ds.rows() << " rows to " << K << " clusters\n";
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const ModelArtifact art = artifact_from_json(read_json_file(a.model));
  const Dataset ds = load_for_model(art, a.data, true, a.drop_missing);
  const MetricsReport report = evaluate(art.model, ds);
  Json doc = to_json(report);

  if (!a.sweep_k.empty()) {
    const auto ks = parse_k_list(a.sweep_k);
    IngestOptions opts;
    opts.standardize = false;
    opts.drop_missing = a.drop_missing;
    const Dataset raw = ingest_csv(a.data, art.schema, art.config.outcome, opts);
    const auto [train, validation] = split(raw, a.split_fraction, a.split_seed);
    doc["sweep"] = to_json(k_sweep(train, validation, art.config, ks));
  }
  if (!a.profile_out.empty()) {
    write_text_file(a.profile_out, profile_csv(art.model, ds, assign(art.model, ds).hard));
  }
  const std::string text = doc.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    write_text_file(a.out, text);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Supervised causal clustering with a Gaussian-process control surface", "basiccs"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Draw a simulation scenario to CSV plus a schema sidecar");
  s->add_option("--scenario", sim.scenario, "simhte | simnull | simfs | sanity_lc | sanity_ll | binary_logit");
  s->add_option("--n", sim.n, "Number of rows")->capture_default_str();
  s->add_option("--treat-prop", sim.treat_prop, "Treatment probability in (0, 1)")->capture_default_str();
  s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  s->add_option("--noise-sd", sim.noise_sd, "Outcome noise sd")->capture_default_str();
  s->add_option("--out", sim.out, "Output CSV");
  s->add_option("--schema-out", sim.schema_out, "Schema JSON (default: <out stem>.schema.json)");
  s->add_option("--potential-outcomes", sim.potential_out, "Also write the (y0, y1) table here");
  s->add_flag("--print-spec", sim.print_spec, "Print every scenario's constants as JSON");

  FitArgs fa;
  auto* f = app.add_subcommand("fit", "Fit the model and write a JSON artifact");
  f->add_option("--data", fa.data, "Training CSV")->required();
  f->add_option("--schema", fa.schema, "Schema JSON (default: <data stem>.schema.json)");
  f->add_option("--config", fa.config, "Model config JSON");
  f->add_option("--out", fa.out, "Model artifact JSON")->required();
  f->add_option("--K", fa.K, "Override the number of clusters");
  f->add_flag("--drop-missing", fa.drop_missing, "Drop rows with missing cells");

  AssignArgs aa;
  auto* as = app.add_subcommand("assign", "Covariate-only cluster assignment and predictions");
  as->add_option("--model", aa.model, "Model artifact JSON")->required();
  as->add_option("--data", aa.data, "CSV to score")->required();
  as->add_option("--out", aa.out, "Assignments CSV")->required();
  as->add_option("--mode", aa.mode, "ITE mode: soft | hard")->capture_default_str();
  as->add_flag("--drop-missing", aa.drop_missing, "Drop rows with missing cells");

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Metrics report, optional K sweep and profile export");
  ev->add_option("--model", ea.model, "Model artifact JSON")->required();
  ev->add_option("--data", ea.data, "Evaluation CSV")->required();
  ev->add_option("--out", ea.out, "Metrics JSON (default: stdout)");
  ev->add_option("--sweep-k", ea.sweep_k, "Comma-separated K values or ranges, e.g. 1-5");
  ev->add_option("--split-fraction", ea.split_fraction, "Training fraction for the sweep")->capture_default_str();
  ev->add_option("--split-seed", ea.split_seed, "Seed of the sweep split")->capture_default_str();
  ev->add_option("--profile-out", ea.profile_out, "Per-cluster covariate profile CSV");
  ev->add_flag("--drop-missing", ea.drop_missing, "Drop rows with missing cells");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, out);
    if (f->parsed()) return cmd_fit(fa, out);
    if (as->parsed()) return cmd_assign(aa, out);
    if (ev->parsed()) return cmd_evaluate(ea, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace basiccs
