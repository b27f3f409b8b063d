#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "orthopolicy/data.hpp"
#include "orthopolicy/nuisance.hpp"
#include "orthopolicy/policy.hpp"
#include "orthopolicy/simlab.hpp"
#include "orthopolicy/welfare.hpp"

namespace orthopolicy {

/// Everything a run depends on. Built from a flat JSON object; unknown keys
/// are rejected. `to_json` gives the fully resolved form embedded in outputs.
struct RunConfig {
  // input: a delimited file plus column mapping, or a synthetic draw
  std::optional<std::string> data;
  std::optional<ColumnMapping> mapping;
  std::optional<DgpSpec> dgp;
  std::size_t n = 2000;

  CrossFitOptions fit;
  std::string family = "additive";  // a family name or "all"
  WelfareSpec welfare;

  int depth = 2;
  GridSpec grid;
  std::vector<std::string> features;  // names or column indices; empty = all

  std::vector<std::size_t> n_list{500, 2000};
  std::size_t reps = 20;
  std::size_t mc_draws = 1'000'000;

  Perturbation perturbation = Perturbation::Gamma;
  std::vector<double> tau_grid{-0.05, 0.0, 0.05};

  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::optional<std::string> out;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
  /// FNV-1a of the resolved config without `out`. `threads` never enters
  /// the serialized form since results do not depend on it.
  std::string hash() const;
  /// Families selected by `family`.
  std::vector<Family> families() const;
};

/// Reads a JSON config file; relative paths inside resolve against its directory.
nlohmann::json load_config_file(const std::filesystem::path& path);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace orthopolicy
