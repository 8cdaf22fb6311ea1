#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "basiccs/numeric.hpp"

namespace basiccs {

enum class ColumnKind { continuous, binary, categorical };

struct CovariateColumn {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> levels;  // categorical only
};

/// Ordered list of raw covariate columns as they appear in the schema sidecar.
struct CovariateSchema {
  std::vector<CovariateColumn> columns;

  /// Throws SchemaError on duplicate names, empty or duplicated levels, or no columns.
  void validate() const;
  const CovariateColumn* find(std::string_view name) const;
  /// Names after one-hot expansion, in encoded column order.
  std::vector<std::string> encoded_names() const;
};

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view s);

/// Kind of an encoded column; categorical columns become several binary ones.
enum class FeatureKind : std::uint8_t { continuous, binary };

struct OutcomeType {
  enum class Tag { continuous, binary };
  Tag tag = Tag::continuous;
  /// Raw label counted as favorable for binary outcomes; mapped to internal 1.
  int favorable_label = 1;

  bool is_binary() const { return tag == Tag::binary; }
  void validate() const;
};

struct ColumnStats {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
};

struct StandardizationStats {
  std::vector<ColumnStats> columns;
  const ColumnStats* find(std::string_view name) const;
};

/// Encoded observations. Binary outcomes are stored in the internal
/// orientation where 1 means favorable.
struct Dataset {
  MatrixXd X;
  std::vector<std::string> column_names;
  std::vector<FeatureKind> column_kinds;
  std::vector<int> a;
  VectorXd y;
  OutcomeType outcome;

  std::optional<VectorXd> true_tau;
  std::optional<std::vector<int>> true_cluster;
  std::optional<VectorXd> true_mu0;
  std::optional<VectorXd> true_y0;
  std::optional<VectorXd> true_y1;

  bool standardized = false;
  StandardizationStats stats;
  /// Position of each row in the originating file or generator output.
  std::vector<std::size_t> row_ids;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index dims() const { return X.cols(); }
  Dataset subset(const std::vector<std::size_t>& rows) const;
  std::vector<std::size_t> arm_rows(int arm) const;
  /// Throws DataError when a row breaks an invariant (treatment codes,
  /// binary values, one arm missing).
  void validate() const;
};

struct IngestOptions {
  bool drop_missing = false;
  bool standardize = true;
  /// When false the `a` and `y` columns may be absent (covariate-only scoring).
  bool require_outcome = true;
};

Dataset ingest_csv(const std::filesystem::path& path, const CovariateSchema& schema,
                   const OutcomeType& outcome, const IngestOptions& options);
Dataset ingest_csv_text(std::string_view text, const CovariateSchema& schema,
                        const OutcomeType& outcome, const IngestOptions& options);

/// Mean and (n - 1) sd of every continuous column of an unstandardized dataset.
StandardizationStats compute_standardization(const Dataset& raw);
/// Transforms with the provided statistics, never the data's own moments.
Dataset apply_standardization(Dataset raw, const StandardizationStats& stats);
Dataset standardize(Dataset raw);
Dataset unstandardize(Dataset ds);

/// Seeded random partition into floor(fraction * N) and the remainder.
/// Statistics are fitted on the first part and reused for the second.
std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed);

/// Level of a one-hot encoded categorical column for one row.
std::string decode_categorical(const Dataset& ds, const CovariateColumn& column, Eigen::Index row);

/// Writes encoded covariates (categoricals stay one-hot) on the original
/// scale plus a, y and any truth columns.
void write_csv(const Dataset& ds, const std::filesystem::path& path);
std::string to_csv(const Dataset& ds);

std::string format_double(double v);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace basiccs
