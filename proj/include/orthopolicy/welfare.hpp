#pragma once

#include <string>

#include "json.hpp"

namespace orthopolicy {

class Dataset;

enum class Family { Additive, AtkinsonIop, Gini, IopGini, KendallTau };
enum class Identification { DM, IPW, DR };

Family parse_family(const std::string& s);
std::string to_string(Family f);
Identification parse_identification(const std::string& s);
std::string to_string(Identification id);

/// Pair families average a kernel over pairs of units; the rest are unit means.
inline bool is_pair_family(Family f) {
  return f == Family::Gini || f == Family::IopGini || f == Family::KendallTau;
}

/// Families whose nuisances are fitted on circumstance columns only.
inline bool uses_circumstances(Family f) { return f == Family::AtkinsonIop || f == Family::IopGini; }

struct WelfareSpec {
  Family family = Family::Additive;
  double theta = 1.0;   // Atkinson concavity, in (0, 1]
  double target = 0.0;  // Kendall target t, in [-1, 1]
  Identification identification = Identification::DR;

  /// Throws ConfigError on out-of-range parameters.
  void validate() const;
  /// Also checks dataset requirements (parental outcome, positive outcome).
  void validate(const Dataset& data) const;
  nlohmann::json to_json() const;
};

/// Atkinson utility: v^(1-theta)/(1-theta), or log v at theta = 1.
double atkinson_utility(double v, double theta);

}  // namespace orthopolicy
