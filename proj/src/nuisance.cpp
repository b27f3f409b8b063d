#include "orthopolicy/nuisance.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <string>

#include "orthopolicy/error.hpp"
#include "orthopolicy/parallel.hpp"
#include "orthopolicy/rng.hpp"
#include "orthopolicy/ustat.hpp"

namespace orthopolicy {

void FunctionPhi::predict_row(int a, int b, std::size_t i, std::span<double> out) const {
  for (std::size_t j = i + 1; j < n_; ++j) out[j - i - 1] = fn_(a, b, i, j);
}

void PerturbedPhi::predict_row(int a, int b, std::size_t i, std::span<double> out) const {
  base_->predict_row(a, b, i, out);
  if (tau_ == 0.0) return;
  for (std::size_t j = i + 1; j < n(); ++j) out[j - i - 1] += tau_ * h_(i, j);
}

NuisanceFits NuisanceFits::known(std::vector<double> gamma0, std::vector<double> gamma1,
                                 std::vector<double> propensity, std::shared_ptr<const PhiSource> phi, double trim) {
  NuisanceFits f;
  f.n = std::max({gamma0.size(), gamma1.size(), propensity.size(), phi ? phi->n() : std::size_t{0}});
  f.contexts = 1;
  f.gamma0 = std::move(gamma0);
  f.gamma1 = std::move(gamma1);
  f.propensity = std::move(propensity);
  f.phi = std::move(phi);
  f.trim = trim;
  f.propensity_predictions = f.propensity.size();
  return f;
}

namespace {

std::string fold_name(const PairFoldAssignment& folds, std::size_t f) {
  const auto& pf = folds.folds()[f];
  if (pf.shape == PairFoldShape::Square) return "pair fold " + std::to_string(f) + " (group " + std::to_string(pf.first) + ")";
  return "pair fold " + std::to_string(f) + " (groups " + std::to_string(pf.first) + " and " +
         std::to_string(pf.second) + ")";
}

std::vector<std::size_t> arm_units(const Dataset& data, std::span<const std::size_t> units, int d) {
  std::vector<std::size_t> out;
  const auto t = data.treatment();
  for (auto u : units)
    if (t[u] == d) out.push_back(u);
  return out;
}

std::vector<double> gather(std::span<const double> v, std::span<const std::size_t> idx) {
  std::vector<double> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = v[idx[r]];
  return out;
}

// One training set and the units whose predictions it supplies, with the
// slot each prediction lands in.
struct FitTask {
  std::vector<std::size_t> train;
  std::vector<std::size_t> query;
  std::vector<std::size_t> slots;
  std::string name;
};

std::vector<FitTask> unit_tasks(const FoldAssignment& folds) {
  std::vector<FitTask> tasks;
  for (std::size_t g = 0; g < folds.groups(); ++g) {
    FitTask t;
    t.train = folds.complement({g});
    t.query = folds.members(g);
    t.slots = t.query;
    t.name = "fold " + std::to_string(g);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::vector<FitTask> pair_tasks(const PairFoldAssignment& folds) {
  const auto& units = folds.units();
  const std::size_t k = units.groups();
  std::vector<FitTask> tasks;
  for (std::size_t f = 0; f < folds.fold_count(); ++f) {
    const auto& pf = folds.folds()[f];
    FitTask t;
    t.train = folds.training_units(f);
    t.name = fold_name(folds, f);
    auto add = [&](std::size_t g, std::size_t context) {
      for (auto u : units.members(g)) {
        t.query.push_back(u);
        t.slots.push_back(u * k + context);
      }
    };
    add(pf.first, pf.second);
    if (pf.shape == PairFoldShape::Triangle) add(pf.second, pf.first);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

GammaPredictions run_gamma(const Dataset& data, const std::vector<FitTask>& tasks, std::size_t slots,
                           const Learner& learner, std::span<const std::size_t> columns) {
  GammaPredictions out;
  out.gamma0.assign(slots, 0.0);
  out.gamma1.assign(slots, 0.0);
  for (const auto& t : tasks) {
    const Eigen::MatrixXd query = data.select(t.query, columns);
    for (int d = 0; d <= 1; ++d) {
      const auto arm = arm_units(data, t.train, d);
      if (arm.empty())
        throw EstimationError("training complement of " + t.name + " has no " + (d == 1 ? "treated" : "control") +
                              " units");
      const auto y = gather(data.outcome(), arm);
      const auto model = learner.fit(data.select(arm, columns), y);
      const auto pred = model->predict(query);
      auto& target = d == 1 ? out.gamma1 : out.gamma0;
      for (std::size_t r = 0; r < pred.size(); ++r) target[t.slots[r]] = pred[r];
    }
  }
  return out;
}

PropensityPredictions run_propensity(const Dataset& data, const std::vector<FitTask>& tasks, std::size_t slots,
                                     const Learner& learner, double trim, std::span<const std::size_t> columns) {
  if (!(trim > 0.0 && trim < 0.5)) throw ConfigError("trim must lie in (0, 0.5)");
  PropensityPredictions out;
  out.values.assign(slots, 0.5);
  std::vector<double> d_all(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) d_all[i] = data.treatment()[i];
  for (const auto& t : tasks) {
    const auto y = gather(d_all, t.train);
    const auto model = learner.fit(data.select(t.train, columns), y);
    const auto pred = model->predict(data.select(t.query, columns));
    for (std::size_t r = 0; r < pred.size(); ++r) {
      double e = pred[r];
      if (e < trim || e > 1.0 - trim) {
        ++out.clamped;
        e = std::clamp(e, trim, 1.0 - trim);
      }
      out.values[t.slots[r]] = e;
    }
  }
  return out;
}

}  // namespace

GammaPredictions fit_gamma(const Dataset& data, const FoldAssignment& folds, const Learner& learner,
                           std::span<const std::size_t> columns) {
  return run_gamma(data, unit_tasks(folds), data.n(), learner, columns);
}

GammaPredictions fit_gamma(const Dataset& data, const PairFoldAssignment& folds, const Learner& learner,
                           std::span<const std::size_t> columns) {
  return run_gamma(data, pair_tasks(folds), data.n() * folds.units().groups(), learner, columns);
}

PropensityPredictions fit_propensity(const Dataset& data, const FoldAssignment& folds, const Learner& learner,
                                     double trim, std::span<const std::size_t> columns) {
  return run_propensity(data, unit_tasks(folds), data.n(), learner, trim, columns);
}

PropensityPredictions fit_propensity(const Dataset& data, const PairFoldAssignment& folds, const Learner& learner,
                                     double trim, std::span<const std::size_t> columns) {
  return run_propensity(data, pair_tasks(folds), data.n() * folds.units().groups(), learner, trim, columns);
}

std::vector<double> fit_mean(const Dataset& data, const FoldAssignment& folds, const Learner& learner,
                             std::span<const std::size_t> columns, std::span<const double> target) {
  std::vector<double> out(data.n());
  for (const auto& t : unit_tasks(folds)) {
    const auto model = learner.fit(data.select(t.train, columns), gather(target, t.train));
    const auto pred = model->predict(data.select(t.query, columns));
    for (std::size_t r = 0; r < pred.size(); ++r) out[t.slots[r]] = pred[r];
  }
  return out;
}

// ---------------------------------------------------------------------------
// phi

namespace {

class CrossFitPhi final : public PhiSource {
 public:
  CrossFitPhi(const Dataset& data, const PairFoldAssignment& folds, std::vector<std::size_t> columns,
              std::vector<std::array<std::unique_ptr<Regressor>, 4>> models)
      : features_(data.select_columns(columns)), folds_(folds), models_(std::move(models)) {}

  std::size_t n() const override { return static_cast<std::size_t>(features_.rows()); }

  void predict_row(int a, int b, std::size_t i, std::span<double> out) const override {
    const auto& units = folds_.units();
    const std::size_t total = n();
    const Eigen::Index k = features_.cols();
    const std::size_t gi = units.group_of(i);
    std::vector<std::vector<std::size_t>> by_group(units.groups());
    for (std::size_t j = i + 1; j < total; ++j) by_group[units.group_of(j)].push_back(j);
    for (std::size_t g = 0; g < by_group.size(); ++g) {
      const auto& js = by_group[g];
      if (js.empty()) continue;
      Eigen::MatrixXd x(static_cast<Eigen::Index>(js.size()), 2 * k);
      for (std::size_t r = 0; r < js.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        x.row(row).head(k) = features_.row(static_cast<Eigen::Index>(i));
        x.row(row).tail(k) = features_.row(static_cast<Eigen::Index>(js[r]));
      }
      std::vector<double> pred(js.size());
      models_[folds_.fold_of_groups(gi, g)][static_cast<std::size_t>(2 * a + b)]->predict(x, pred);
      for (std::size_t r = 0; r < js.size(); ++r) out[js[r] - i - 1] = pred[r];
    }
  }

 private:
  Eigen::MatrixXd features_;
  PairFoldAssignment folds_;
  std::vector<std::array<std::unique_ptr<Regressor>, 4>> models_;
};

}  // namespace

std::shared_ptr<const PhiSource> fit_phi(const Dataset& data, const PairFoldAssignment& folds,
                                         const Learner& learner, const PairTarget& target,
                                         std::span<const std::size_t> columns, std::size_t pair_cap,
                                         std::uint64_t seed) {
  if (pair_cap == 0) throw ConfigError("pair_cap must be positive");
  const Eigen::MatrixXd features = data.select_columns(columns);
  const Eigen::Index k = features.cols();
  std::vector<std::array<std::unique_ptr<Regressor>, 4>> models(folds.fold_count());
  std::vector<std::array<std::vector<std::size_t>, 2>> arms(folds.fold_count());
  for (std::size_t f = 0; f < folds.fold_count(); ++f) {
    const auto train = folds.training_units(f);
    arms[f] = {arm_units(data, train, 0), arm_units(data, train, 1)};
    for (int a = 0; a <= 1; ++a)
      for (int b = 0; b <= 1; ++b) {
        const auto nl = arms[f][static_cast<std::size_t>(a)].size();
        const auto nr = arms[f][static_cast<std::size_t>(b)].size();
        if (nl * nr - (a == b ? nl : 0) == 0)
          throw EstimationError("no training pairs with treatments (" + std::to_string(a) + ", " +
                                std::to_string(b) + ") for " + fold_name(folds, f));
      }
  }
  parallel_for(folds.fold_count() * 4, [&](std::size_t task) {
    const std::size_t f = task / 4;
    const int a = static_cast<int>(task % 4) / 2;
    const int b = static_cast<int>(task % 2);
    const auto& left = arms[f][static_cast<std::size_t>(a)];
    const auto& right = arms[f][static_cast<std::size_t>(b)];
    const std::size_t available = left.size() * right.size() - (a == b ? left.size() : 0);
    std::vector<UnitPair> pairs;
    if (available <= pair_cap) {
      pairs.reserve(available);
      for (auto p : left)
        for (auto q : right)
          if (p != q) pairs.emplace_back(p, q);
    } else {
      Rng rng(derive_seed(seed, {0x9417, f, task % 4}));
      std::uniform_int_distribution<std::size_t> pick_l(0, left.size() - 1);
      std::uniform_int_distribution<std::size_t> pick_r(0, right.size() - 1);
      pairs.reserve(pair_cap);
      while (pairs.size() < pair_cap) {
        const auto p = left[pick_l(rng)];
        const auto q = right[pick_r(rng)];
        if (p != q) pairs.emplace_back(p, q);
      }
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(pairs.size()), 2 * k);
    std::vector<double> y(pairs.size());
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      x.row(row).head(k) = features.row(static_cast<Eigen::Index>(pairs[r].first));
      x.row(row).tail(k) = features.row(static_cast<Eigen::Index>(pairs[r].second));
      y[r] = target(pairs[r].first, pairs[r].second);
    }
    models[f][task % 4] = learner.fit(x, y);
  });
  return std::make_shared<CrossFitPhi>(data, folds, std::vector<std::size_t>(columns.begin(), columns.end()),
                                       std::move(models));
}

PairTarget observed_kernel(const Dataset& data, Family family) {
  std::vector<double> y(data.outcome().begin(), data.outcome().end());
  if (family == Family::Gini) return [y](std::size_t k, std::size_t l) { return std::min(y[k], y[l]); };
  if (family == Family::KendallTau) {
    std::vector<double> x1(data.parental_outcome().begin(), data.parental_outcome().end());
    return [y, x1](std::size_t k, std::size_t l) { return sgn(x1[k] - x1[l]) * sgn(y[k] - y[l]); };
  }
  throw ArgumentError("family " + to_string(family) + " has no observed pair kernel");
}

// ---------------------------------------------------------------------------

LearnerSpec CrossFitOptions::default_pair_learner() {
  LearnerSpec s;
  s.kind = LearnerKind::Forest;
  s.trees = 10;
  s.min_leaf = 25;
  return s;
}

void CrossFitOptions::validate() const {
  if (!(trim > 0.0 && trim < 0.5)) throw ConfigError("trim must lie in (0, 0.5)");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (pair_cap == 0) throw ConfigError("pair_cap must be positive");
}

NuisanceFits cross_fit(const Dataset& data, const WelfareSpec& spec, const CrossFitOptions& options) {
  options.validate();
  spec.validate(data);
  const auto unit_learner = make_learner(options.learner);
  const auto columns = uses_circumstances(spec.family) ? data.circumstance_columns() : data.all_columns();
  const auto units = make_unit_folds(data.n(), options.folds, options.seed);

  NuisanceFits fits;
  fits.n = data.n();
  fits.trim = options.trim;

  if (!is_pair_family(spec.family)) {
    auto gamma = fit_gamma(data, units, *unit_learner, columns);
    auto prop = fit_propensity(data, units, *unit_learner, options.trim, columns);
    fits.contexts = 1;
    fits.gamma0 = std::move(gamma.gamma0);
    fits.gamma1 = std::move(gamma.gamma1);
    fits.propensity = std::move(prop.values);
    fits.clamped = prop.clamped;
    fits.propensity_predictions = fits.propensity.size();
    return fits;
  }

  const auto pairs = make_pair_folds(units);
  fits.contexts = units.groups();
  fits.context_key = units.group_labels();
  auto prop = fit_propensity(data, pairs, *unit_learner, options.trim, columns);
  fits.propensity = std::move(prop.values);
  fits.clamped = prop.clamped;
  fits.propensity_predictions = fits.propensity.size();
  if (spec.family == Family::IopGini) {
    auto gamma = fit_gamma(data, pairs, *unit_learner, columns);
    fits.gamma0 = std::move(gamma.gamma0);
    fits.gamma1 = std::move(gamma.gamma1);
  } else {
    const auto pair_learner = make_learner(options.pair_learner);
    fits.phi = fit_phi(data, pairs, *pair_learner, observed_kernel(data, spec.family), columns, options.pair_cap,
                       options.seed);
  }
  return fits;
}

}  // namespace orthopolicy
