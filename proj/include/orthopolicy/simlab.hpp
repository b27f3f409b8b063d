#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "orthopolicy/data.hpp"
#include "orthopolicy/nuisance.hpp"
#include "orthopolicy/policy.hpp"
#include "orthopolicy/welfare.hpp"

namespace orthopolicy {

/// Synthetic law with closed-form nuisances:
///   X ~ U[0,1]^dim
///   e(x)     = propensity_base + propensity_slope * x[propensity_feature]
///   g0(x)    = outcome_intercept + sum_k outcome_coefs[k] * x[k]
///   g1(x)    = g0(x) + effect_base + effect_slope * x[f] + effect_jump * 1(x[f] > jump_at),  f = effect_feature
///   Y(d)     = g_d(X) + noise_sd * eps, eps ~ N(0,1) shared by both arms, clipped at +-noise_clip
///   X1       = parental_intercept + parental_gamma0 * g0(X) + parental_coef * x[parental_feature]
///              + parental_sd * N(0,1)
struct DgpSpec {
  std::string name = "reference";
  std::size_t dim = 2;
  double propensity_base = 0.25;
  double propensity_slope = 0.5;
  std::size_t propensity_feature = 0;
  double outcome_intercept = 0.0;
  std::vector<double> outcome_coefs{1.0, 1.0};
  double effect_base = 1.0;
  double effect_slope = 0.0;
  std::size_t effect_feature = 0;
  double effect_jump = -2.0;
  double jump_at = 0.7;
  double noise_sd = 0.5;
  double noise_clip = 6.0;  // in units of noise_sd; 0 disables clipping
  bool parental = true;
  double parental_intercept = 0.0;
  double parental_gamma0 = 1.0;
  double parental_coef = 0.0;
  std::size_t parental_feature = 0;
  double parental_sd = 0.31622776601683794;  // variance 0.1
  std::uint64_t seed = 1;

  /// reference, positive, randomized, kendall.
  static DgpSpec preset(const std::string& name);
  static DgpSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  double propensity(const double* x) const;
  double gamma(int d, const double* x) const;
  double parental_mean(const double* x) const;
  /// Closed-form E[g1(X) - g0(X)] under the uniform covariate law.
  double true_ate() const;
};

struct Sample {
  Dataset data;
  std::vector<double> y0;
  std::vector<double> y1;
  std::vector<double> propensity;
  std::vector<double> gamma0;
  std::vector<double> gamma1;
  std::vector<double> parental_mean;  // empty without a parental outcome
};

Sample draw_sample(const DgpSpec& spec, std::size_t n, std::uint64_t seed);
inline Sample draw_sample(const DgpSpec& spec, std::size_t n) { return draw_sample(spec, n, spec.seed); }

/// phi_ab(x_i, x_j) under the law: gini uses the normal closed form of
/// E[min(Y_i(a), Y_j(b))], kendall E[sgn(dX1) sgn(dY)], iop_gini min of g.
double oracle_phi(const DgpSpec& spec, Family family, int a, int b, const double* xi, const double* xj);

/// True nuisances evaluated on a sample.
NuisanceFits oracle_fits(const DgpSpec& spec, const Sample& sample, Family family, double trim = 0.01);

/// Monte-Carlo draws of the covariate law; unit k contributes to linear
/// functionals, pairs (2k, 2k+1) to pair functionals.
struct OracleDraws {
  Eigen::MatrixXd x;  // row-major semantics: row k is draw k
  std::vector<double> gamma0;
  std::vector<double> gamma1;
  std::size_t size() const { return gamma0.size(); }
  std::size_t pairs() const { return size() / 2; }
};
OracleDraws draw_oracle(const DgpSpec& spec, std::size_t draws, std::uint64_t seed);

struct OracleValue {
  double value = 0.0;  // welfare
  double mean = 0.0;   // functional before the kendall transform
  double se = 0.0;     // Monte-Carlo standard error of `mean` (50 batches)
};

OracleValue oracle_welfare(const DgpSpec& spec, const OracleDraws& draws, const PolicyTree& policy,
                           const WelfareSpec& welfare);
OracleValue oracle_welfare(const DgpSpec& spec, const PolicyTree& policy, const WelfareSpec& welfare,
                           std::size_t mc_draws = 1'000'000);

/// Oracle welfare sums per grid cell, for exact search over the class.
CellAggregate oracle_aggregate(const DgpSpec& spec, const OracleDraws& draws, const ThresholdGrid& grid,
                               const WelfareSpec& welfare);

struct RegretOptions {
  WelfareSpec welfare;
  CrossFitOptions fit;
  GridSpec grid;
  std::vector<std::size_t> features;  // empty = all covariates
  int depth = 2;
  std::vector<std::size_t> n_list{500, 2000};
  std::size_t replications = 20;
  std::size_t mc_draws = 1'000'000;
  std::uint64_t seed = 1;
};

struct RegretRow {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> regrets;
  std::vector<double> welfare;  // oracle welfare of each estimated rule
};

struct RegretCurve {
  double best_welfare = 0.0;  // W* over the class
  PolicyTree best_tree = PolicyTree::constant(false);
  double mc_se = 0.0;  // Monte-Carlo SE of the oracle at W*
  nlohmann::json grid;
  std::vector<RegretRow> rows;
};

/// Grid fixed at population quantiles of the oracle draws so every
/// replication searches the same class.
RegretCurve regret_experiment(const DgpSpec& spec, const RegretOptions& options);

enum class Perturbation { Gamma, Propensity, Phi };
Perturbation parse_perturbation(const std::string& s);
std::string to_string(Perturbation p);

struct ProbeOptions {
  WelfareSpec welfare;
  Perturbation target = Perturbation::Gamma;
  std::vector<double> tau_grid{-0.05, 0.0, 0.05};
  std::size_t n = 1000;
  std::size_t replications = 50;
  std::uint64_t seed = 1;
  double trim = 0.01;
  std::optional<PolicyTree> policy;  // default: treat when x[0] > 0.5
};

/// Unit-level perturbation direction h(x).
using UnitDirection = std::function<double(const double* x, std::size_t dim)>;
/// sin of the coordinate sum.
UnitDirection default_direction();

struct ProbeReplication {
  double orthogonal_slope = 0.0;
  double plugin_slope = 0.0;
  double orthogonal_at_zero = 0.0;
  double dr_at_zero = 0.0;
};

struct ProbeResult {
  std::string plugin;  // comparator identification
  double tau = 0.0;    // finite-difference step
  std::vector<ProbeReplication> replications;
  double share_smaller = 0.0;  // share with |orthogonal| < |plug-in|
  double mean_abs_orthogonal = 0.0;
  double mean_abs_plugin = 0.0;
};

/// Central finite-difference slope of the welfare estimate in tau when the
/// oracle nuisance is moved along h, for the orthogonal (DR) estimator and
/// the uncorrected plug-in (DM for gamma and phi, IPW for e). For pair
/// families without a gamma nuisance, a gamma perturbation moves phi along
/// (h(x_i) + h(x_j)) / 2.
ProbeResult orthogonality_probe(const DgpSpec& spec, const ProbeOptions& options,
                                const UnitDirection& h = default_direction());

}  // namespace orthopolicy
