#include "basiccs/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "basiccs/error.hpp"

namespace basiccs {

namespace {

const std::vector<std::string> kTruthColumns = {"true_tau", "true_cluster", "true_mu0",
                                                "true_y0", "true_y1"};

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.emplace_back(trim(cur));
  return cells;
}

double parse_number(std::string_view cell, std::string_view column, std::size_t line) {
  double v = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line) + ": column '" + std::string(column) +
                    "' has non-numeric value '" + std::string(cell) + "'");
  }
  return v;
}

int parse_binary(std::string_view cell, std::string_view column, std::size_t line,
                 const char* what) {
  const double v = parse_number(cell, column, line);
  if (v != 0.0 && v != 1.0) {
    throw DataError(std::string(what) + " on line " + std::to_string(line) + ": column '" +
                    std::string(column) + "' has value '" + std::string(cell) + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::binary: return "binary";
    case ColumnKind::categorical: return "categorical";
  }
  return "continuous";
}

ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "binary") return ColumnKind::binary;
  if (s == "categorical") return ColumnKind::categorical;
  throw SchemaError("unknown column kind '" + std::string(s) + "'");
}

void CovariateSchema::validate() const {
  if (columns.empty()) throw SchemaError("schema has no covariate columns");
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (c.name.empty()) throw SchemaError("schema column with empty name");
    if (c.name == "a" || c.name == "y" ||
        std::find(kTruthColumns.begin(), kTruthColumns.end(), c.name) != kTruthColumns.end()) {
      throw SchemaError("schema column '" + c.name + "' clashes with a reserved column");
    }
    if (!names.insert(c.name).second) throw SchemaError("duplicate schema column '" + c.name + "'");
    if (c.kind == ColumnKind::categorical) {
      if (c.levels.empty()) throw SchemaError("categorical column '" + c.name + "' has no levels");
      std::set<std::string> levels(c.levels.begin(), c.levels.end());
      if (levels.size() != c.levels.size()) {
        throw SchemaError("categorical column '" + c.name + "' has duplicate levels");
      }
    }
  }
}

const CovariateColumn* CovariateSchema::find(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::vector<std::string> CovariateSchema::encoded_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.kind == ColumnKind::categorical) {
      for (const auto& level : c.levels) out.push_back(c.name + "_" + level);
    } else {
      out.push_back(c.name);
    }
  }
  return out;
}

void OutcomeType::validate() const {
  if (favorable_label != 0 && favorable_label != 1) {
    throw UsageError("favorable_label must be 0 or 1");
  }
}

const ColumnStats* StandardizationStats::find(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.column_names = column_names;
  out.column_kinds = column_kinds;
  out.outcome = outcome;
  out.standardized = standardized;
  out.stats = stats;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.X.resize(n, dims());
  out.y.resize(n);
  out.a.resize(rows.size());
  out.row_ids.resize(rows.size());
  auto pick = [&](const std::optional<VectorXd>& src, std::optional<VectorXd>& dst) {
    if (!src) return;
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = (*src)[static_cast<Eigen::Index>(rows[i])];
    dst = std::move(v);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.X.row(i) = X.row(r);
    out.y[i] = y[r];
    out.a[i] = a[rows[i]];
    out.row_ids[i] = row_ids[rows[i]];
  }
  pick(true_tau, out.true_tau);
  pick(true_mu0, out.true_mu0);
  pick(true_y0, out.true_y0);
  pick(true_y1, out.true_y1);
  if (true_cluster) {
    std::vector<int> v(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) v[i] = (*true_cluster)[rows[i]];
    out.true_cluster = std::move(v);
  }
  return out;
}

std::vector<std::size_t> Dataset::arm_rows(int arm) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == arm) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  if (rows() == 0) throw DataError("dataset is empty");
  if (static_cast<std::size_t>(dims()) != column_kinds.size() ||
      column_names.size() != column_kinds.size()) {
    throw DataError("dataset column metadata does not match the covariate matrix");
  }
  if (static_cast<Eigen::Index>(a.size()) != rows() || y.size() != rows()) {
    throw DataError("treatment/outcome length does not match the number of rows");
  }
  bool has0 = false, has1 = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != 0 && a[i] != 1) throw DataError("invalid treatment value on row " + std::to_string(i));
    (a[i] == 0 ? has0 : has1) = true;
  }
  if (!has0 || !has1) throw DataError("treatment column must contain both arms");
  for (Eigen::Index i = 0; i < rows(); ++i) {
    if (!std::isfinite(y[i])) throw DataError("non-finite outcome on row " + std::to_string(i));
    if (outcome.is_binary() && y[i] != 0.0 && y[i] != 1.0) {
      throw DataError("binary outcome outside {0,1} on row " + std::to_string(i));
    }
    for (Eigen::Index d = 0; d < dims(); ++d) {
      const double v = X(i, d);
      if (!std::isfinite(v)) throw DataError("non-finite covariate on row " + std::to_string(i));
      if (column_kinds[static_cast<std::size_t>(d)] == FeatureKind::binary && v != 0.0 && v != 1.0) {
        throw DataError("binary covariate '" + column_names[static_cast<std::size_t>(d)] +
                        "' outside {0,1} on row " + std::to_string(i));
      }
    }
  }
}

Dataset ingest_csv_text(std::string_view text, const CovariateSchema& schema,
                        const OutcomeType& outcome, const IngestOptions& options) {
  schema.validate();
  outcome.validate();

  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      auto line = trim(text.substr(start, end - start));
      if (!line.empty()) lines.emplace_back(line);
      start = end + 1;
    }
  }
  if (lines.empty()) throw SchemaError("CSV has no header row");
  if (!lines.empty() && lines[0].size() >= 3 && lines[0].compare(0, 3, "\xEF\xBB\xBF") == 0) {
    lines[0].erase(0, 3);
  }

  const auto header = split_csv_line(lines[0]);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!pos.emplace(header[i], i).second) throw SchemaError("duplicate CSV column '" + header[i] + "'");
  }
  for (const auto& c : schema.columns) {
    if (!pos.count(c.name)) throw SchemaError("CSV is missing schema column '" + c.name + "'");
  }
  const bool has_outcome = pos.count("a") && pos.count("y");
  if (options.require_outcome && !has_outcome) {
    throw SchemaError("CSV must contain the columns 'a' and 'y'");
  }
  for (const auto& h : header) {
    const bool known = schema.find(h) != nullptr || h == "a" || h == "y" ||
                       std::find(kTruthColumns.begin(), kTruthColumns.end(), h) != kTruthColumns.end();
    if (!known) throw SchemaError("CSV column '" + h + "' is not in the schema");
  }

  Dataset ds;
  ds.outcome = outcome;
  ds.column_names = schema.encoded_names();
  for (const auto& c : schema.columns) {
    const std::size_t width = c.kind == ColumnKind::categorical ? c.levels.size() : 1;
    for (std::size_t j = 0; j < width; ++j) {
      ds.column_kinds.push_back(c.kind == ColumnKind::continuous ? FeatureKind::continuous
                                                                 : FeatureKind::binary);
    }
  }
  const auto D = static_cast<Eigen::Index>(ds.column_names.size());

  std::vector<std::vector<double>> x_rows;
  std::vector<int> a_vals;
  std::vector<double> y_vals;
  std::vector<std::size_t> ids;
  std::vector<std::vector<double>> truth(kTruthColumns.size());
  std::vector<bool> truth_present(kTruthColumns.size());
  for (std::size_t t = 0; t < kTruthColumns.size(); ++t) truth_present[t] = pos.count(kTruthColumns[t]) > 0;

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split_csv_line(lines[li]);
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(li + 1) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(header.size()));
    }
    bool missing = false;
    auto cell = [&](const std::string& name) -> std::string_view { return cells[pos.at(name)]; };
    for (const auto& c : schema.columns) missing = missing || is_missing(cell(c.name));
    if (has_outcome) missing = missing || is_missing(cell("a")) || is_missing(cell("y"));
    for (std::size_t t = 0; t < kTruthColumns.size(); ++t) {
      if (truth_present[t]) missing = missing || is_missing(cell(kTruthColumns[t]));
    }
    if (missing) {
      if (options.drop_missing) continue;
      throw DataError("missing value on line " + std::to_string(li + 1));
    }

    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(D));
    for (const auto& c : schema.columns) {
      const auto v = cell(c.name);
      switch (c.kind) {
        case ColumnKind::continuous: row.push_back(parse_number(v, c.name, li + 1)); break;
        case ColumnKind::binary:
          row.push_back(parse_binary(v, c.name, li + 1, "invalid binary covariate"));
          break;
        case ColumnKind::categorical: {
          auto it = std::find(c.levels.begin(), c.levels.end(), v);
          if (it == c.levels.end()) {
            throw DataError("line " + std::to_string(li + 1) + ": unknown level '" + std::string(v) +
                            "' for column '" + c.name + "'");
          }
          for (std::size_t j = 0; j < c.levels.size(); ++j) {
            row.push_back(static_cast<std::size_t>(it - c.levels.begin()) == j ? 1.0 : 0.0);
          }
          break;
        }
      }
    }
    if (has_outcome) {
      a_vals.push_back(parse_binary(cell("a"), "a", li + 1, "invalid treatment value"));
      double yv = parse_number(cell("y"), "y", li + 1);
      if (outcome.is_binary()) {
        const int raw = parse_binary(cell("y"), "y", li + 1, "binary outcome outside {0,1}");
        yv = raw == outcome.favorable_label ? 1.0 : 0.0;
      }
      y_vals.push_back(yv);
    } else {
      a_vals.push_back(0);
      y_vals.push_back(0.0);
    }
    for (std::size_t t = 0; t < kTruthColumns.size(); ++t) {
      if (truth_present[t]) truth[t].push_back(parse_number(cell(kTruthColumns[t]), kTruthColumns[t], li + 1));
    }
    x_rows.push_back(std::move(row));
    ids.push_back(li - 1);
  }
  if (x_rows.empty()) throw DataError("dataset is empty after dropping rows with missing values");

  const auto N = static_cast<Eigen::Index>(x_rows.size());
  ds.X.resize(N, D);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index d = 0; d < D; ++d) ds.X(i, d) = x_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
  }
  ds.a = std::move(a_vals);
  ds.y = Eigen::Map<VectorXd>(y_vals.data(), N);
  ds.row_ids = std::move(ids);
  auto as_vec = [&](std::size_t t) { return VectorXd(Eigen::Map<VectorXd>(truth[t].data(), N)); };
  if (truth_present[0]) ds.true_tau = as_vec(0);
  if (truth_present[1]) {
    std::vector<int> tc(truth[1].size());
    for (std::size_t i = 0; i < tc.size(); ++i) tc[i] = static_cast<int>(std::lround(truth[1][i]));
    ds.true_cluster = std::move(tc);
  }
  if (truth_present[2]) ds.true_mu0 = as_vec(2);
  if (truth_present[3]) ds.true_y0 = as_vec(3);
  if (truth_present[4]) ds.true_y1 = as_vec(4);

  if (has_outcome) ds.validate();
  if (options.standardize) ds = standardize(std::move(ds));
  return ds;
}

Dataset ingest_csv(const std::filesystem::path& path, const CovariateSchema& schema,
                   const OutcomeType& outcome, const IngestOptions& options) {
  return ingest_csv_text(read_text_file(path), schema, outcome, options);
}

StandardizationStats compute_standardization(const Dataset& raw) {
  if (raw.standardized) throw UsageError("compute_standardization expects raw (unstandardized) data");
  StandardizationStats stats;
  for (Eigen::Index d = 0; d < raw.dims(); ++d) {
    if (raw.column_kinds[static_cast<std::size_t>(d)] != FeatureKind::continuous) continue;
    const VectorXd col = raw.X.col(d);
    ColumnStats s;
    s.name = raw.column_names[static_cast<std::size_t>(d)];
    s.mean = sample_mean(as_span(col));
    s.sd = sample_sd(as_span(col));
    // Constant columns are centered but not scaled.
    if (!(s.sd > 0.0)) s.sd = 1.0;
    stats.columns.push_back(std::move(s));
  }
  return stats;
}

Dataset apply_standardization(Dataset raw, const StandardizationStats& stats) {
  if (raw.standardized) throw UsageError("dataset is already standardized");
  for (Eigen::Index d = 0; d < raw.dims(); ++d) {
    if (raw.column_kinds[static_cast<std::size_t>(d)] != FeatureKind::continuous) continue;
    const auto& name = raw.column_names[static_cast<std::size_t>(d)];
    const ColumnStats* s = stats.find(name);
    if (s == nullptr) throw SchemaError("no standardization statistics for column '" + name + "'");
    raw.X.col(d) = (raw.X.col(d).array() - s->mean) / s->sd;
  }
  raw.stats = stats;
  raw.standardized = true;
  return raw;
}

Dataset standardize(Dataset raw) {
  auto stats = compute_standardization(raw);
  return apply_standardization(std::move(raw), stats);
}

Dataset unstandardize(Dataset ds) {
  if (!ds.standardized) return ds;
  for (Eigen::Index d = 0; d < ds.dims(); ++d) {
    if (ds.column_kinds[static_cast<std::size_t>(d)] != FeatureKind::continuous) continue;
    const ColumnStats* s = ds.stats.find(ds.column_names[static_cast<std::size_t>(d)]);
    ds.X.col(d) = ds.X.col(d).array() * s->sd + s->mean;
  }
  ds.standardized = false;
  ds.stats = {};
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(ds.rows());
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("split fraction must lie in (0, 1)");
  const auto n_first = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (n_first == 0 || n_first == n) throw UsageError("split fraction yields an empty split");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> first(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_first));
  std::vector<std::size_t> second(idx.begin() + static_cast<std::ptrdiff_t>(n_first), idx.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());

  const Dataset raw = unstandardize(ds);
  Dataset a = raw.subset(first);
  Dataset b = raw.subset(second);
  const auto stats = compute_standardization(a);
  return {apply_standardization(std::move(a), stats), apply_standardization(std::move(b), stats)};
}

std::string decode_categorical(const Dataset& ds, const CovariateColumn& column, Eigen::Index row) {
  if (column.kind != ColumnKind::categorical) throw UsageError("column '" + column.name + "' is not categorical");
  for (const auto& level : column.levels) {
    const auto name = column.name + "_" + level;
    auto it = std::find(ds.column_names.begin(), ds.column_names.end(), name);
    if (it == ds.column_names.end()) throw SchemaError("dataset lacks encoded column '" + name + "'");
    if (ds.X(row, it - ds.column_names.begin()) == 1.0) return level;
  }
  throw DataError("row " + std::to_string(row) + " has no active level for '" + column.name + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string to_csv(const Dataset& ds) {
  const Dataset raw = unstandardize(ds);
  std::ostringstream out;
  for (const auto& n : raw.column_names) out << n << ',';
  out << "a,y";
  if (raw.true_tau) out << ",true_tau";
  if (raw.true_cluster) out << ",true_cluster";
  if (raw.true_mu0) out << ",true_mu0";
  if (raw.true_y0) out << ",true_y0";
  if (raw.true_y1) out << ",true_y1";
  out << '\n';
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index d = 0; d < raw.dims(); ++d) {
      const double v = raw.X(i, d);
      if (raw.column_kinds[static_cast<std::size_t>(d)] == FeatureKind::binary) {
        out << static_cast<int>(v) << ',';
      } else {
        out << format_double(v) << ',';
      }
    }
    const auto iu = static_cast<std::size_t>(i);
    double yv = raw.y[i];
    if (raw.outcome.is_binary()) {
      const int internal = static_cast<int>(yv);
      out << raw.a[iu] << ',' << (internal == 1 ? raw.outcome.favorable_label : 1 - raw.outcome.favorable_label);
    } else {
      out << raw.a[iu] << ',' << format_double(yv);
    }
    if (raw.true_tau) out << ',' << format_double((*raw.true_tau)[i]);
    if (raw.true_cluster) out << ',' << (*raw.true_cluster)[iu];
    if (raw.true_mu0) out << ',' << format_double((*raw.true_mu0)[i]);
    if (raw.true_y0) out << ',' << format_double((*raw.true_y0)[i]);
    if (raw.true_y1) out << ',' << format_double((*raw.true_y1)[i]);
    out << '\n';
  }
  return out.str();
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) { write_text_file(path, to_csv(ds)); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace basiccs
