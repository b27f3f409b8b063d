#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

namespace orthopolicy {

/// Which file columns play which role.
struct ColumnMapping {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
  std::optional<std::string> parental_outcome;
  /// Subset of `covariates`; empty means every covariate is a circumstance.
  std::vector<std::string> circumstances;
  char delimiter = ',';

  static ColumnMapping from_json(const nlohmann::json& j);
  static ColumnMapping load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Observed sample (Y, D, X, optional parental outcome X1). Immutable after
/// construction; the constructor enforces the shape and domain invariants.
class Dataset {
 public:
  Dataset(std::vector<double> outcome, std::vector<std::uint8_t> treatment, Eigen::MatrixXd covariates,
          std::vector<std::string> covariate_names, std::optional<std::vector<double>> parental_outcome = {},
          std::vector<std::size_t> circumstance_columns = {});

  std::size_t n() const { return outcome_.size(); }
  std::size_t k() const { return static_cast<std::size_t>(covariates_.cols()); }

  std::span<const double> outcome() const { return outcome_; }
  std::span<const std::uint8_t> treatment() const { return treatment_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<std::string>& covariate_names() const { return names_; }

  bool has_parental_outcome() const { return parental_.has_value(); }
  /// Throws ConfigError when absent.
  std::span<const double> parental_outcome() const;

  const std::vector<std::size_t>& circumstance_columns() const { return circumstances_; }
  std::vector<std::size_t> all_columns() const;

  /// Throws ConfigError naming the column when it does not exist.
  std::size_t column_index(std::string_view name) const;

  /// Covariate sub-matrix for the given units (rows) and columns.
  Eigen::MatrixXd select(std::span<const std::size_t> units, std::span<const std::size_t> columns) const;
  Eigen::MatrixXd select_columns(std::span<const std::size_t> columns) const;

  double mean_outcome() const;
  std::size_t treated_count() const;

 private:
  std::vector<double> outcome_;
  std::vector<std::uint8_t> treatment_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> names_;
  std::optional<std::vector<double>> parental_;
  std::vector<std::size_t> circumstances_;
};

struct LoadedDataset {
  Dataset data;
  std::size_t dropped_rows = 0;
};

/// Reads a delimited text file with a header row. Rows with a missing value
/// (empty, NA, NaN) in any mapped column are dropped and counted.
LoadedDataset load_dataset(const std::filesystem::path& path, const ColumnMapping& mapping);

}  // namespace orthopolicy
