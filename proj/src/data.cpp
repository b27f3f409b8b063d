#include "orthopolicy/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "orthopolicy/error.hpp"

namespace orthopolicy {

using nlohmann::json;

ColumnMapping ColumnMapping::from_json(const json& j) {
  ColumnMapping m;
  try {
    m.outcome = j.at("outcome").get<std::string>();
    m.treatment = j.at("treatment").get<std::string>();
    m.covariates = j.at("covariates").get<std::vector<std::string>>();
    if (j.contains("parental_outcome") && !j.at("parental_outcome").is_null())
      m.parental_outcome = j.at("parental_outcome").get<std::string>();
    if (j.contains("circumstances")) m.circumstances = j.at("circumstances").get<std::vector<std::string>>();
    if (j.contains("delimiter")) {
      const auto d = j.at("delimiter").get<std::string>();
      if (d.size() != 1) throw ConfigError("mapping: delimiter must be a single character");
      m.delimiter = d[0];
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mapping: ") + e.what());
  }
  if (m.covariates.empty()) throw ConfigError("mapping: at least one covariate is required");
  for (const auto& c : m.circumstances) {
    if (std::find(m.covariates.begin(), m.covariates.end(), c) == m.covariates.end())
      throw ConfigError("mapping: circumstance '" + c + "' is not listed among the covariates");
  }
  return m;
}

ColumnMapping ColumnMapping::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mapping file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("mapping file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

json ColumnMapping::to_json() const {
  json j{{"outcome", outcome}, {"treatment", treatment}, {"covariates", covariates},
         {"circumstances", circumstances}, {"delimiter", std::string(1, delimiter)}};
  j["parental_outcome"] = parental_outcome ? json(*parental_outcome) : json(nullptr);
  return j;
}

Dataset::Dataset(std::vector<double> outcome, std::vector<std::uint8_t> treatment, Eigen::MatrixXd covariates,
                 std::vector<std::string> covariate_names, std::optional<std::vector<double>> parental_outcome,
                 std::vector<std::size_t> circumstance_columns)
    : outcome_(std::move(outcome)),
      treatment_(std::move(treatment)),
      covariates_(std::move(covariates)),
      names_(std::move(covariate_names)),
      parental_(std::move(parental_outcome)),
      circumstances_(std::move(circumstance_columns)) {
  const std::size_t n = outcome_.size();
  if (n == 0) throw DataError("dataset is empty");
  if (n < 2) throw DataError("dataset needs at least 2 units");
  if (treatment_.size() != n || static_cast<std::size_t>(covariates_.rows()) != n)
    throw DataError("dataset columns have different lengths");
  if (names_.size() != static_cast<std::size_t>(covariates_.cols()))
    throw DataError("covariate names do not match the covariate matrix");
  if (parental_ && parental_->size() != n) throw DataError("parental outcome has the wrong length");
  for (std::size_t i = 0; i < n; ++i) {
    if (treatment_[i] > 1) throw DataError("treatment of unit " + std::to_string(i) + " is not binary");
    if (!std::isfinite(outcome_[i])) throw DataError("outcome of unit " + std::to_string(i) + " is not finite");
    if (parental_ && !std::isfinite((*parental_)[i]))
      throw DataError("parental outcome of unit " + std::to_string(i) + " is not finite");
  }
  if (!covariates_.allFinite()) throw DataError("covariates contain non-finite values");
  if (circumstances_.empty()) {
    circumstances_ = all_columns();
  } else {
    for (auto c : circumstances_)
      if (c >= k()) throw DataError("circumstance column index out of range");
  }
}

std::span<const double> Dataset::parental_outcome() const {
  if (!parental_) throw ConfigError("parental outcome column is required but was not provided");
  return *parental_;
}

std::vector<std::size_t> Dataset::all_columns() const {
  std::vector<std::size_t> cols(k());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  return cols;
}

std::size_t Dataset::column_index(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ConfigError("unknown covariate '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

Eigen::MatrixXd Dataset::select(std::span<const std::size_t> units, std::span<const std::size_t> columns) const {
  Eigen::MatrixXd out(units.size(), columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (std::size_t r = 0; r < units.size(); ++r) out(r, c) = covariates_(units[r], columns[c]);
  return out;
}

Eigen::MatrixXd Dataset::select_columns(std::span<const std::size_t> columns) const {
  Eigen::MatrixXd out(n(), columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) out.col(c) = covariates_.col(columns[c]);
  return out;
}

double Dataset::mean_outcome() const {
  return std::accumulate(outcome_.begin(), outcome_.end(), 0.0) / static_cast<double>(n());
}

std::size_t Dataset::treated_count() const {
  return static_cast<std::size_t>(std::count(treatment_.begin(), treatment_.end(), std::uint8_t{1}));
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return fields;
}

bool is_missing(const std::string& s) {
  if (s.empty()) return true;
  std::string lower;
  for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower == "na" || lower == "nan" || lower == "null" || lower == ".";
}

double parse_number(const std::string& s, std::size_t line, const std::string& column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v))
    throw DataError("line " + std::to_string(line) + ": column '" + column + "' has non-numeric value '" + s + "'");
  return v;
}

}  // namespace

LoadedDataset load_dataset(const std::filesystem::path& path, const ColumnMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("data file " + path.string() + " is empty");
  const auto header = split_line(line, mapping.delimiter);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);
  auto locate = [&](const std::string& name) {
    auto it = position.find(name);
    if (it == position.end()) throw ConfigError("mapped column '" + name + "' not found in " + path.string());
    return it->second;
  };
  const std::size_t y_col = locate(mapping.outcome);
  const std::size_t d_col = locate(mapping.treatment);
  std::vector<std::size_t> x_cols;
  for (const auto& c : mapping.covariates) x_cols.push_back(locate(c));
  std::optional<std::size_t> x1_col;
  if (mapping.parental_outcome) x1_col = locate(*mapping.parental_outcome);

  std::vector<double> y;
  std::vector<std::uint8_t> d;
  std::vector<double> x1;
  std::vector<double> x_rowmajor;
  std::size_t dropped = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_line(line, mapping.delimiter);
    if (fields.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    bool missing = is_missing(fields[y_col]) || is_missing(fields[d_col]) || (x1_col && is_missing(fields[*x1_col]));
    for (auto c : x_cols) missing = missing || is_missing(fields[c]);
    if (missing) {
      ++dropped;
      continue;
    }
    const double dv = parse_number(fields[d_col], line_no, mapping.treatment);
    if (dv != 0.0 && dv != 1.0)
      throw DataError("line " + std::to_string(line_no) + ": treatment '" + mapping.treatment + "' has value " +
                      fields[d_col] + ", expected 0 or 1");
    y.push_back(parse_number(fields[y_col], line_no, mapping.outcome));
    d.push_back(static_cast<std::uint8_t>(dv));
    for (std::size_t c = 0; c < x_cols.size(); ++c)
      x_rowmajor.push_back(parse_number(fields[x_cols[c]], line_no, mapping.covariates[c]));
    if (x1_col) x1.push_back(parse_number(fields[*x1_col], line_no, *mapping.parental_outcome));
  }
  if (y.empty()) throw DataError("data file " + path.string() + " has no complete rows");

  const std::size_t n = y.size();
  const std::size_t k = x_cols.size();
  Eigen::MatrixXd x(n, k);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) x(r, c) = x_rowmajor[r * k + c];

  std::vector<std::size_t> circumstances;
  for (const auto& c : mapping.circumstances) {
    auto it = std::find(mapping.covariates.begin(), mapping.covariates.end(), c);
    if (it == mapping.covariates.end()) throw ConfigError("circumstance '" + c + "' is not a covariate");
    circumstances.push_back(static_cast<std::size_t>(it - mapping.covariates.begin()));
  }
  std::optional<std::vector<double>> parental;
  if (x1_col) parental = std::move(x1);
  return LoadedDataset{Dataset(std::move(y), std::move(d), std::move(x), mapping.covariates, std::move(parental),
                               std::move(circumstances)),
                       dropped};
}

}  // namespace orthopolicy
