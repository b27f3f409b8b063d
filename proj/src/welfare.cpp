#include "orthopolicy/welfare.hpp"

#include <cmath>

#include "orthopolicy/data.hpp"
#include "orthopolicy/error.hpp"

namespace orthopolicy {

Family parse_family(const std::string& s) {
  if (s == "additive") return Family::Additive;
  if (s == "atkinson_iop" || s == "atkinson") return Family::AtkinsonIop;
  if (s == "gini") return Family::Gini;
  if (s == "iop_gini") return Family::IopGini;
  if (s == "kendall_tau" || s == "kendall") return Family::KendallTau;
  throw ConfigError("unknown welfare family '" + s + "'");
}

std::string to_string(Family f) {
  switch (f) {
    case Family::Additive: return "additive";
    case Family::AtkinsonIop: return "atkinson_iop";
    case Family::Gini: return "gini";
    case Family::IopGini: return "iop_gini";
    case Family::KendallTau: return "kendall_tau";
  }
  return "additive";
}

Identification parse_identification(const std::string& s) {
  if (s == "dm") return Identification::DM;
  if (s == "ipw") return Identification::IPW;
  if (s == "dr") return Identification::DR;
  throw ConfigError("unknown identification '" + s + "' (expected dm, ipw or dr)");
}

std::string to_string(Identification id) {
  switch (id) {
    case Identification::DM: return "dm";
    case Identification::IPW: return "ipw";
    case Identification::DR: return "dr";
  }
  return "dr";
}

void WelfareSpec::validate() const {
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
  if (!(target >= -1.0 && target <= 1.0)) throw ConfigError("target_t must lie in [-1, 1]");
}

void WelfareSpec::validate(const Dataset& data) const {
  validate();
  if (family == Family::KendallTau && !data.has_parental_outcome())
    throw ConfigError("kendall_tau welfare needs a parental_outcome column");
  if (family == Family::AtkinsonIop) {
    const auto y = data.outcome();
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!(y[i] > 0.0))
        throw DataError("atkinson_iop welfare needs a positive outcome; unit " + std::to_string(i) + " has " +
                        std::to_string(y[i]));
  }
}

nlohmann::json WelfareSpec::to_json() const {
  return {{"family", to_string(family)},
          {"theta", theta},
          {"target_t", target},
          {"identification", to_string(identification)}};
}

double atkinson_utility(double v, double theta) {
  if (theta == 1.0) return std::log(v);
  return std::pow(v, 1.0 - theta) / (1.0 - theta);
}

}  // namespace orthopolicy
