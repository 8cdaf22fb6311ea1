#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "basiccs/fit.hpp"
#include "basiccs/metrics.hpp"
#include "basiccs/sweep.hpp"

namespace basiccs {

using Json = nlohmann::ordered_json;

/// Config documents list only the keys they override; unknown keys are a
/// UsageError.
ModelConfig config_from_json(const Json& j);
Json to_json(const ModelConfig& c);
Json to_json(const PriorConfig& p);

/// Sidecar format: {"<column>": {"kind": "...", "levels": [...]}, ...} in
/// column order.
CovariateSchema schema_from_json(const Json& j);
Json to_json(const CovariateSchema& s);

Json to_json(const GpHyper& h);
GpHyper gp_hyper_from_json(const Json& j);

/// Non-finite numbers are written as null and read back as NaN.
Json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const Json& j);
Json to_json(const std::vector<SweepRow>& rows);

/// Everything needed to score new data: fitted model plus the schema and
/// standardization statistics of the training file.
struct ModelArtifact {
  ModelConfig config;
  CovariateSchema schema;
  StandardizationStats stats;
  std::vector<std::string> column_names;
  FitResult model;
};

Json to_json(const ModelArtifact& a);
/// Rebuilds the Cholesky factor from the stored inputs and jitter.
ModelArtifact artifact_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);

}  // namespace basiccs
