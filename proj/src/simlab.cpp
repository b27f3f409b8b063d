#include "orthopolicy/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "orthopolicy/error.hpp"
#include "orthopolicy/parallel.hpp"
#include "orthopolicy/rng.hpp"
#include "orthopolicy/scores.hpp"
#include "orthopolicy/ustat.hpp"

namespace orthopolicy {

// ---------------------------------------------------------------------------
// DGP

DgpSpec DgpSpec::preset(const std::string& name) {
  DgpSpec s;
  if (name == "reference") return s;
  if (name == "positive") {
    s.name = name;
    s.outcome_intercept = 4.0;
    return s;
  }
  if (name == "randomized") {
    s.name = name;
    s.propensity_base = 0.5;
    s.propensity_slope = 0.0;
    return s;
  }
  if (name == "kendall") {
    // Parental outcome tracks x1 and the treatment effect grows with x1:
    // treat-none has tau near 0.1, treat-all near 0.3, and treating only
    // low-x1 units pulls tau towards 0.
    s.name = name;
    s.outcome_coefs = {0.32, 0.0};
    s.effect_base = 0.0;
    s.effect_slope = 0.78;
    s.effect_jump = 0.0;
    s.noise_sd = 0.5;
    s.parental_gamma0 = 0.0;
    s.parental_coef = 1.0;
    s.parental_feature = 0;
    s.parental_sd = 0.2;
    return s;
  }
  throw ConfigError("unknown dgp preset '" + name + "' (expected reference, positive, randomized or kendall)");
}

DgpSpec DgpSpec::from_json(const nlohmann::json& j) {
  DgpSpec s = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : DgpSpec{};
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("name", s.name);
    get("dim", s.dim);
    get("propensity_base", s.propensity_base);
    get("propensity_slope", s.propensity_slope);
    get("propensity_feature", s.propensity_feature);
    get("outcome_intercept", s.outcome_intercept);
    get("outcome_coefs", s.outcome_coefs);
    get("effect_base", s.effect_base);
    get("effect_slope", s.effect_slope);
    get("effect_feature", s.effect_feature);
    get("effect_jump", s.effect_jump);
    get("jump_at", s.jump_at);
    get("noise_sd", s.noise_sd);
    get("noise_clip", s.noise_clip);
    get("parental", s.parental);
    get("parental_intercept", s.parental_intercept);
    get("parental_gamma0", s.parental_gamma0);
    get("parental_coef", s.parental_coef);
    get("parental_feature", s.parental_feature);
    get("parental_sd", s.parental_sd);
    get("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dgp: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json DgpSpec::to_json() const {
  return {{"name", name},
          {"dim", dim},
          {"propensity_base", propensity_base},
          {"propensity_slope", propensity_slope},
          {"propensity_feature", propensity_feature},
          {"outcome_intercept", outcome_intercept},
          {"outcome_coefs", outcome_coefs},
          {"effect_base", effect_base},
          {"effect_slope", effect_slope},
          {"effect_feature", effect_feature},
          {"effect_jump", effect_jump},
          {"jump_at", jump_at},
          {"noise_sd", noise_sd},
          {"noise_clip", noise_clip},
          {"parental", parental},
          {"parental_intercept", parental_intercept},
          {"parental_gamma0", parental_gamma0},
          {"parental_coef", parental_coef},
          {"parental_feature", parental_feature},
          {"parental_sd", parental_sd},
          {"seed", seed}};
}

void DgpSpec::validate() const {
  if (dim == 0) throw ConfigError("dgp: dim must be positive");
  if (outcome_coefs.size() != dim) throw ConfigError("dgp: outcome_coefs needs one entry per dimension");
  if (propensity_feature >= dim || effect_feature >= dim || parental_feature >= dim)
    throw ConfigError("dgp: feature index out of range");
  const double lo = std::min(propensity_base, propensity_base + propensity_slope);
  const double hi = std::max(propensity_base, propensity_base + propensity_slope);
  if (!(lo > 0.0 && hi < 1.0)) throw ConfigError("dgp: propensity must stay inside (0, 1)");
  if (noise_sd < 0.0 || parental_sd < 0.0 || noise_clip < 0.0) throw ConfigError("dgp: scales must be >= 0");
}

double DgpSpec::propensity(const double* x) const {
  return propensity_base + propensity_slope * x[propensity_feature];
}

double DgpSpec::gamma(int d, const double* x) const {
  double g = outcome_intercept;
  for (std::size_t k = 0; k < dim; ++k) g += outcome_coefs[k] * x[k];
  if (d == 1) {
    const double xf = x[effect_feature];
    g += effect_base + effect_slope * xf + (xf > jump_at ? effect_jump : 0.0);
  }
  return g;
}

double DgpSpec::parental_mean(const double* x) const {
  return parental_intercept + parental_gamma0 * gamma(0, x) + parental_coef * x[parental_feature];
}

double DgpSpec::true_ate() const {
  return effect_base + 0.5 * effect_slope + effect_jump * (1.0 - std::clamp(jump_at, 0.0, 1.0));
}

Sample draw_sample(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 2) throw ArgumentError("draw_sample needs n >= 2");
  Rng rng(derive_seed(seed, {0x5a3e, n}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
  std::vector<double> y(n), x1;
  std::vector<std::uint8_t> d(n);
  struct Truth {
    std::vector<double> y0, y1, propensity, gamma0, gamma1, parental_mean;
  } s;
  s.y0.resize(n);
  s.y1.resize(n);
  s.propensity.resize(n);
  s.gamma0.resize(n);
  s.gamma1.resize(n);
  if (spec.parental) {
    x1.resize(n);
    s.parental_mean.resize(n);
  }
  std::vector<double> row(spec.dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < spec.dim; ++k) row[k] = unif(rng);
    const double u = unif(rng);
    double eps = norm(rng);
    const double pn = norm(rng);
    if (spec.noise_clip > 0.0) eps = std::clamp(eps, -spec.noise_clip, spec.noise_clip);
    for (std::size_t k = 0; k < spec.dim; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    s.propensity[i] = spec.propensity(row.data());
    s.gamma0[i] = spec.gamma(0, row.data());
    s.gamma1[i] = spec.gamma(1, row.data());
    s.y0[i] = s.gamma0[i] + spec.noise_sd * eps;
    s.y1[i] = s.gamma1[i] + spec.noise_sd * eps;
    d[i] = u < s.propensity[i] ? 1 : 0;
    y[i] = d[i] ? s.y1[i] : s.y0[i];
    if (spec.parental) {
      s.parental_mean[i] = spec.parental_mean(row.data());
      x1[i] = s.parental_mean[i] + spec.parental_sd * pn;
    }
  }
  std::vector<std::string> names;
  for (std::size_t k = 0; k < spec.dim; ++k) names.push_back("x" + std::to_string(k + 1));
  std::optional<std::vector<double>> parental;
  if (spec.parental) parental = std::move(x1);
  return Sample{Dataset(std::move(y), std::move(d), std::move(x), std::move(names), std::move(parental)),
                std::move(s.y0),
                std::move(s.y1),
                std::move(s.propensity),
                std::move(s.gamma0),
                std::move(s.gamma1),
                std::move(s.parental_mean)};
}

// ---------------------------------------------------------------------------
// Oracle nuisances

namespace {

// E|N(m, s^2)|
double mean_abs_normal(double m, double s) {
  if (s <= 0.0) return std::abs(m);
  return s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-m * m / (2.0 * s * s)) + m * std::erf(m / (s * std::sqrt(2.0)));
}

// E sgn(N(m, 2 s^2)): difference of two independent N(., s^2) draws.
double mean_sign_difference(double m, double s) {
  if (s <= 0.0) return sgn(m);
  return std::erf(m / (2.0 * s));
}

}  // namespace

double oracle_phi(const DgpSpec& spec, Family family, int a, int b, const double* xi, const double* xj) {
  const double ma = spec.gamma(a, xi);
  const double mb = spec.gamma(b, xj);
  switch (family) {
    case Family::Gini:
      return 0.5 * (ma + mb - mean_abs_normal(ma - mb, spec.noise_sd * std::sqrt(2.0)));
    case Family::IopGini: return std::min(ma, mb);
    case Family::KendallTau:
      if (!spec.parental) throw ConfigError("kendall_tau needs a dgp with a parental outcome");
      return mean_sign_difference(spec.parental_mean(xi) - spec.parental_mean(xj), spec.parental_sd) *
             mean_sign_difference(ma - mb, spec.noise_sd);
    default: break;
  }
  throw ArgumentError("family " + to_string(family) + " has no pair kernel");
}

NuisanceFits oracle_fits(const DgpSpec& spec, const Sample& sample, Family family, double trim) {
  std::vector<double> e(sample.propensity);
  for (auto& v : e) v = std::clamp(v, trim, 1.0 - trim);
  std::shared_ptr<const PhiSource> phi;
  if (family == Family::Gini || family == Family::KendallTau) {
    const std::size_t n = sample.data.n();
    const std::size_t dim = spec.dim;
    std::vector<double> rows(n * dim);
    const auto& x = sample.data.covariates();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < dim; ++k)
        rows[i * dim + k] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    phi = std::make_shared<FunctionPhi>(n, [spec, family, rows, dim](int a, int b, std::size_t i, std::size_t j) {
      return oracle_phi(spec, family, a, b, &rows[i * dim], &rows[j * dim]);
    });
  }
  auto fits = NuisanceFits::known(sample.gamma0, sample.gamma1, std::move(e), std::move(phi), trim);
  return fits;
}

// ---------------------------------------------------------------------------
// Monte-Carlo oracle

OracleDraws draw_oracle(const DgpSpec& spec, std::size_t draws, std::uint64_t seed) {
  spec.validate();
  if (draws < 2) throw ArgumentError("oracle needs at least two draws");
  OracleDraws o;
  o.x.resize(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(spec.dim));
  o.gamma0.resize(draws);
  o.gamma1.resize(draws);
  Rng rng(derive_seed(seed, {0x0c1e, draws}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> row(spec.dim);
  for (std::size_t k = 0; k < draws; ++k) {
    for (std::size_t d = 0; d < spec.dim; ++d) {
      row[d] = unif(rng);
      o.x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)) = row[d];
    }
    o.gamma0[k] = spec.gamma(0, row.data());
    o.gamma1[k] = spec.gamma(1, row.data());
  }
  return o;
}

namespace {

constexpr std::size_t kBatches = 50;

std::vector<double> draw_row(const OracleDraws& o, std::size_t k) {
  std::vector<double> r(static_cast<std::size_t>(o.x.cols()));
  for (std::size_t d = 0; d < r.size(); ++d) r[d] = o.x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  return r;
}

double linear_value(const OracleDraws& o, std::size_t k, int arm, const WelfareSpec& w) {
  const double g = arm == 1 ? o.gamma1[k] : o.gamma0[k];
  if (w.family == Family::AtkinsonIop) {
    if (!(g > 0.0)) throw NumericError("atkinson oracle needs positive conditional means");
    return atkinson_utility(g, w.theta);
  }
  return g;
}

}  // namespace

OracleValue oracle_welfare(const DgpSpec& spec, const OracleDraws& draws, const PolicyTree& policy,
                           const WelfareSpec& welfare) {
  const auto actions = policy.assign(draws.x);
  const bool pair = is_pair_family(welfare.family);
  const std::size_t count = pair ? draws.pairs() : draws.size();
  std::vector<double> v(count);
  parallel_for(count, [&](std::size_t k) {
    if (!pair) {
      v[k] = linear_value(draws, k, actions[k], welfare);
      return;
    }
    const auto xi = draw_row(draws, 2 * k);
    const auto xj = draw_row(draws, 2 * k + 1);
    v[k] = oracle_phi(spec, welfare.family, actions[2 * k], actions[2 * k + 1], xi.data(), xj.data());
  });
  OracleValue out;
  out.mean = pairwise_sum(v) / static_cast<double>(count);
  const std::size_t batches = std::min(kBatches, count);
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = b * count / batches, hi = (b + 1) * count / batches;
    means[b] = pairwise_sum(std::span<const double>(v).subspan(lo, hi - lo)) / static_cast<double>(hi - lo);
  }
  double ss = 0.0;
  for (double m : means) ss += (m - out.mean) * (m - out.mean);
  out.se = batches > 1 ? std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches)) : 0.0;
  out.value = welfare.family == Family::KendallTau ? -std::abs(out.mean - welfare.target) : out.mean;
  return out;
}

OracleValue oracle_welfare(const DgpSpec& spec, const PolicyTree& policy, const WelfareSpec& welfare,
                           std::size_t mc_draws) {
  return oracle_welfare(spec, draw_oracle(spec, mc_draws, derive_seed(spec.seed, {0x0dae})), policy, welfare);
}

CellAggregate oracle_aggregate(const DgpSpec& spec, const OracleDraws& draws, const ThresholdGrid& grid,
                               const WelfareSpec& welfare) {
  const auto index = index_cells(grid, draws.x);
  const std::size_t m = index.cells;
  CellAggregate agg;
  agg.slots = grid.slots();
  agg.bins = index.bins;
  agg.count.assign(m, 0.0);
  for (auto c : index.cell_of) agg.count[c] += 1.0;
  if (!is_pair_family(welfare.family)) {
    agg.treated_sum.assign(m, 0.0);
    agg.control_sum.assign(m, 0.0);
    for (std::size_t k = 0; k < draws.size(); ++k) {
      agg.treated_sum[index.cell_of[k]] += linear_value(draws, k, 1, welfare);
      agg.control_sum[index.cell_of[k]] += linear_value(draws, k, 0, welfare);
    }
    agg.normalizer = static_cast<double>(draws.size());
    return agg;
  }
  agg.pair = true;
  const std::size_t pairs = draws.pairs();
  std::vector<std::array<double, 4>> phi(pairs);
  parallel_for(pairs, [&](std::size_t k) {
    const auto xi = draw_row(draws, 2 * k);
    const auto xj = draw_row(draws, 2 * k + 1);
    for (int ab = 0; ab < 4; ++ab)
      phi[k][static_cast<std::size_t>(ab)] = oracle_phi(spec, welfare.family, ab / 2, ab % 2, xi.data(), xj.data());
  });
  for (auto& a : agg.pair_sum) a.assign(m * m, 0.0);
  for (std::size_t k = 0; k < pairs; ++k) {
    const std::size_t cell = index.cell_of[2 * k] * m + index.cell_of[2 * k + 1];
    for (std::size_t ab = 0; ab < 4; ++ab) agg.pair_sum[ab][cell] += phi[k][ab];
  }
  agg.normalizer = static_cast<double>(pairs);
  return agg;
}

// ---------------------------------------------------------------------------
// Regret

RegretCurve regret_experiment(const DgpSpec& spec, const RegretOptions& options) {
  if (options.replications < 1) throw ArgumentError("regret experiment needs at least one replication");
  if (options.n_list.empty()) throw ArgumentError("regret experiment needs at least one sample size");
  options.welfare.validate();
  const auto draws = draw_oracle(spec, options.mc_draws, derive_seed(options.seed, {0x0dae}));
  const auto grid = ThresholdGrid::from_data(draws.x, options.features, options.grid);
  const auto agg = oracle_aggregate(spec, draws, grid, options.welfare);
  const auto best = optimize_policy(agg, grid, options.depth, options.welfare);

  RegretCurve curve;
  curve.best_welfare = best.welfare;
  curve.best_tree = best.tree;
  curve.mc_se = oracle_welfare(spec, draws, best.tree, options.welfare).se;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < spec.dim; ++k) names.push_back("x" + std::to_string(k + 1));
  curve.grid = grid.to_json(names);

  for (auto n : options.n_list) {
    RegretRow row;
    row.n = n;
    for (std::size_t r = 0; r < options.replications; ++r) {
      const std::uint64_t seed = derive_seed(options.seed, {n, r});
      const auto sample = draw_sample(spec, n, seed);
      CrossFitOptions fit = options.fit;
      fit.seed = seed;
      fit.learner.seed = derive_seed(seed, {1});
      fit.pair_learner.seed = derive_seed(seed, {2});
      const auto fits = cross_fit(sample.data, options.welfare, fit);
      const auto scores = build_scores(sample.data, fits, options.welfare);
      const auto chosen = optimize_policy(scores, options.welfare, grid, sample.data.covariates(), options.depth);
      const double w = cell_welfare(agg, grid, chosen.tree, options.welfare).value;
      row.welfare.push_back(w);
      row.regrets.push_back(curve.best_welfare - w);
    }
    row.mean = pairwise_sum(row.regrets) / static_cast<double>(row.regrets.size());
    double ss = 0.0;
    for (double v : row.regrets) ss += (v - row.mean) * (v - row.mean);
    row.sd = row.regrets.size() > 1 ? std::sqrt(ss / static_cast<double>(row.regrets.size() - 1)) : 0.0;
    curve.rows.push_back(std::move(row));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Orthogonality probe

Perturbation parse_perturbation(const std::string& s) {
  if (s == "gamma") return Perturbation::Gamma;
  if (s == "e" || s == "propensity") return Perturbation::Propensity;
  if (s == "phi") return Perturbation::Phi;
  throw ConfigError("unknown perturbation '" + s + "' (expected gamma, e or phi)");
}

std::string to_string(Perturbation p) {
  switch (p) {
    case Perturbation::Gamma: return "gamma";
    case Perturbation::Propensity: return "e";
    case Perturbation::Phi: return "phi";
  }
  return "gamma";
}

UnitDirection default_direction() {
  return [](const double* x, std::size_t dim) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += x[k];
    return std::sin(s);
  };
}

ProbeResult orthogonality_probe(const DgpSpec& spec, const ProbeOptions& options, const UnitDirection& h) {
  options.welfare.validate();
  if (options.replications < 1) throw ArgumentError("probe needs at least one replication");
  double tau = 0.0;
  for (double t : options.tau_grid)
    if (t > 0.0 && std::find(options.tau_grid.begin(), options.tau_grid.end(), -t) != options.tau_grid.end())
      tau = tau == 0.0 ? t : std::min(tau, t);
  if (tau == 0.0) throw ConfigError("tau grid needs a symmetric pair +-tau");

  const Family family = options.welfare.family;
  Perturbation target = options.target;
  const bool has_gamma = family == Family::Additive || family == Family::AtkinsonIop || family == Family::IopGini;
  if (target == Perturbation::Gamma && !has_gamma) target = Perturbation::Phi;
  if (target == Perturbation::Phi && !(family == Family::Gini || family == Family::KendallTau))
    throw ConfigError("phi perturbation applies to gini and kendall_tau only");
  const Identification plugin = target == Perturbation::Propensity ? Identification::IPW : Identification::DM;

  PolicyTree policy = options.policy ? *options.policy
                                     : PolicyTree::stump(Split{0, 0, 0.5}, std::array<std::uint8_t, 2>{0, 1});

  ProbeResult result;
  result.plugin = to_string(plugin);
  result.tau = tau;
  for (std::size_t r = 0; r < options.replications; ++r) {
    const auto sample = draw_sample(spec, options.n, derive_seed(options.seed, {0x9b0e, r}));
    const auto base = oracle_fits(spec, sample, family, options.trim);
    const auto& x = sample.data.covariates();
    const std::size_t n = sample.data.n();
    std::vector<double> hx(n);
    std::vector<double> row(spec.dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < spec.dim; ++k) row[k] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      hx[i] = h(row.data(), spec.dim);
    }
    const auto actions = policy.assign(x);

    auto evaluate = [&](double t, Identification id) {
      NuisanceFits f = base;
      switch (target) {
        case Perturbation::Gamma:
          for (std::size_t i = 0; i < n; ++i) {
            f.gamma0[i] += t * hx[i];
            f.gamma1[i] += t * hx[i];
          }
          break;
        case Perturbation::Propensity:
          for (std::size_t i = 0; i < n; ++i)
            f.propensity[i] = std::clamp(f.propensity[i] + t * hx[i], options.trim, 1.0 - options.trim);
          break;
        case Perturbation::Phi:
          f.phi = std::make_shared<PerturbedPhi>(base.phi, t,
                                                 [&hx](std::size_t i, std::size_t j) { return 0.5 * (hx[i] + hx[j]); });
          break;
      }
      WelfareSpec w = options.welfare;
      w.identification = id;
      return estimate_welfare(build_scores(sample.data, f, w), actions, w).mean;
    };

    ProbeReplication rep;
    rep.orthogonal_slope = (evaluate(tau, Identification::DR) - evaluate(-tau, Identification::DR)) / (2.0 * tau);
    rep.plugin_slope = (evaluate(tau, plugin) - evaluate(-tau, plugin)) / (2.0 * tau);
    rep.orthogonal_at_zero = evaluate(0.0, Identification::DR);
    WelfareSpec dr = options.welfare;
    dr.identification = Identification::DR;
    rep.dr_at_zero = estimate_welfare(build_scores(sample.data, base, dr), actions, dr).mean;
    result.replications.push_back(rep);
  }
  std::size_t smaller = 0;
  for (const auto& rep : result.replications) {
    if (std::abs(rep.orthogonal_slope) < std::abs(rep.plugin_slope)) ++smaller;
    result.mean_abs_orthogonal += std::abs(rep.orthogonal_slope);
    result.mean_abs_plugin += std::abs(rep.plugin_slope);
  }
  const auto reps = static_cast<double>(result.replications.size());
  result.share_smaller = static_cast<double>(smaller) / reps;
  result.mean_abs_orthogonal /= reps;
  result.mean_abs_plugin /= reps;
  return result;
}

}  // namespace orthopolicy
