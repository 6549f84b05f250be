#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mdgp/kernel.hpp"

namespace mdgp {

enum class ColumnKind { Continuous, Categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
};

/// A typed column. Categorical values hold 0-based level indices into
/// `labels`.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<double> values;
  std::vector<std::string> labels;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Column> columns);

  std::size_t rows() const { return rows_; }
  const std::vector<Column> &columns() const { return columns_; }
  bool has(const std::string &name) const;
  const Column &column(const std::string &name) const;
  Column &column(const std::string &name);
  void add(Column column);

  Eigen::VectorXd vector(const std::string &name) const;
  /// N x D matrix ordered as the space's dimensions.
  Eigen::MatrixXd covariates(const CovariateSpace &space) const;
  /// Row subset.
  Dataset select(const std::vector<std::size_t> &rows) const;

 private:
  std::vector<Column> columns_;
  std::size_t rows_ = 0;
};

/// Level labels to enforce per categorical column, e.g. from a saved model.
using LevelMap = std::map<std::string, std::vector<std::string>>;

/// Reads an RFC-4180 CSV file with a header row. Only the requested columns
/// are kept. Categorical levels are numbered in order of first appearance
/// unless `levels` fixes them, in which case an unseen label is an error.
/// Throws DataError for missing columns, empty or NA cells and unparseable
/// numbers.
Dataset load_csv(const std::string &path, const std::vector<ColumnSpec> &specs,
                 const LevelMap &levels = {});
Dataset parse_csv(const std::string &text, const std::vector<ColumnSpec> &specs,
                  const LevelMap &levels = {});

/// Every column of the file as a continuous column, in header order.
Dataset parse_numeric_csv(const std::string &text);
Dataset load_numeric_csv(const std::string &path);

/// Column names of the header row.
std::vector<std::string> csv_header(const std::string &path);

/// Writes all columns; categorical cells are written as their labels.
void write_csv(const std::string &path, const Dataset &data);

/// Quotes a field when needed.
std::string csv_field(const std::string &text);

struct ColumnScaling {
  double mean = 0.0;
  double sd = 1.0;

  double forward(double x) const { return (x - mean) / sd; }
  double inverse(double z) const { return z * sd + mean; }
};

/// Per-column affine standardization, sample sd (N - 1).
class Standardization {
 public:
  /// Throws DataError for a zero-variance or too-short column.
  static Standardization fit(const Dataset &data,
                             const std::vector<std::string> &columns);

  bool has(const std::string &name) const { return scales_.count(name) > 0; }
  const ColumnScaling &scaling(const std::string &name) const;
  const std::map<std::string, ColumnScaling> &scales() const { return scales_; }
  void set(const std::string &name, ColumnScaling scaling);

  /// Columns without a stored scaling pass through unchanged.
  Dataset apply(const Dataset &data) const;
  Dataset invert(const Dataset &data) const;

  nlohmann::json to_json() const;
  static Standardization from_json(const nlohmann::json &j);

 private:
  std::map<std::string, ColumnScaling> scales_;
};

/// Fits the scaling of `columns` and returns the standardized data with it.
std::pair<Dataset, Standardization> standardize(
    const Dataset &data, const std::vector<std::string> &columns);

/// Space over `covariates` (in the given order) with observed ranges and
/// level labels taken from `data`.
CovariateSpace make_space(const Dataset &data,
                          const std::vector<std::string> &covariates);

/// Level labels of every categorical column.
LevelMap level_map(const Dataset &data);

}  // namespace mdgp
