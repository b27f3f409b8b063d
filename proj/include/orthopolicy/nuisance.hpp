#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "orthopolicy/data.hpp"
#include "orthopolicy/folds.hpp"
#include "orthopolicy/learners.hpp"
#include "orthopolicy/welfare.hpp"

namespace orthopolicy {

/// Pairwise conditional mean phi_ab(X_i, X_j) evaluated along row i of the
/// upper triangle: out[j - i - 1] for j = i+1 .. n-1.
class PhiSource {
 public:
  virtual ~PhiSource() = default;
  virtual std::size_t n() const = 0;
  virtual void predict_row(int a, int b, std::size_t i, std::span<double> out) const = 0;
};

/// phi given directly as a function of the two unit indices.
class FunctionPhi final : public PhiSource {
 public:
  using Fn = std::function<double(int a, int b, std::size_t i, std::size_t j)>;
  FunctionPhi(std::size_t n, Fn fn) : n_(n), fn_(std::move(fn)) {}
  std::size_t n() const override { return n_; }
  void predict_row(int a, int b, std::size_t i, std::span<double> out) const override;

 private:
  std::size_t n_;
  Fn fn_;
};

/// base + tau * h(i, j).
class PerturbedPhi final : public PhiSource {
 public:
  using Direction = std::function<double(std::size_t i, std::size_t j)>;
  PerturbedPhi(std::shared_ptr<const PhiSource> base, double tau, Direction h)
      : base_(std::move(base)), tau_(tau), h_(std::move(h)) {}
  std::size_t n() const override { return base_->n(); }
  void predict_row(int a, int b, std::size_t i, std::span<double> out) const override;

 private:
  std::shared_ptr<const PhiSource> base_;
  double tau_;
  Direction h_;
};

/// Cross-fitted nuisance predictions. Unit-level quantities are stored per
/// (unit, context): with pair folds the context is the partner's group, so
/// the prediction used for pair (i, j) comes from the model trained without
/// both i's and j's groups. With unit folds there is a single context.
struct NuisanceFits {
  std::size_t n = 0;
  std::size_t contexts = 1;
  std::vector<std::size_t> context_key;  // per unit, used when it is the partner
  std::vector<double> gamma0;            // n * contexts, empty when not fitted
  std::vector<double> gamma1;
  std::vector<double> propensity;
  std::shared_ptr<const PhiSource> phi;
  double trim = 0.01;
  std::size_t clamped = 0;  // propensity predictions moved onto [trim, 1 - trim]
  std::size_t propensity_predictions = 0;

  std::size_t slot(std::size_t i, std::size_t partner) const {
    return contexts == 1 ? i : i * contexts + context_key[partner];
  }
  double gamma(int d, std::size_t i, std::size_t partner) const {
    return d == 1 ? gamma1[slot(i, partner)] : gamma0[slot(i, partner)];
  }
  double gamma(int d, std::size_t i) const { return gamma(d, i, i); }
  /// P(D = d | X_i).
  double prob(int d, std::size_t i, std::size_t partner) const {
    const double e = propensity[slot(i, partner)];
    return d == 1 ? e : 1.0 - e;
  }
  double prob(int d, std::size_t i) const { return prob(d, i, i); }
  bool has_gamma() const { return !gamma1.empty(); }
  bool has_propensity() const { return !propensity.empty(); }
  double clamped_share() const {
    return propensity_predictions == 0 ? 0.0
                                       : static_cast<double>(clamped) / static_cast<double>(propensity_predictions);
  }

  /// Known nuisances (single context); phi may be null.
  static NuisanceFits known(std::vector<double> gamma0, std::vector<double> gamma1, std::vector<double> propensity,
                            std::shared_ptr<const PhiSource> phi = nullptr, double trim = 0.01);
};

struct GammaPredictions {
  std::vector<double> gamma0;
  std::vector<double> gamma1;
};

struct PropensityPredictions {
  std::vector<double> values;
  std::size_t clamped = 0;
};

/// gamma(d, x) on the given columns, one model per arm per fold complement.
GammaPredictions fit_gamma(const Dataset& data, const FoldAssignment& folds, const Learner& learner,
                           std::span<const std::size_t> columns);
/// Pair-fold version: n * K predictions, context = partner's group.
GammaPredictions fit_gamma(const Dataset& data, const PairFoldAssignment& folds, const Learner& learner,
                           std::span<const std::size_t> columns);

PropensityPredictions fit_propensity(const Dataset& data, const FoldAssignment& folds, const Learner& learner,
                                     double trim, std::span<const std::size_t> columns);
PropensityPredictions fit_propensity(const Dataset& data, const PairFoldAssignment& folds, const Learner& learner,
                                     double trim, std::span<const std::size_t> columns);

/// Cross-fitted regression of an arbitrary per-unit target (no arm split).
std::vector<double> fit_mean(const Dataset& data, const FoldAssignment& folds, const Learner& learner,
                             std::span<const std::size_t> columns, std::span<const double> target);

/// Pair kernel g(k, l) on training units, used as the phi regression target.
using PairTarget = std::function<double(std::size_t k, std::size_t l)>;

/// phi_ab regressions on stacked ordered pairs (X_k, X_l) of each fold's
/// training units with D_k = a, D_l = b; subsampled to pair_cap pairs.
std::shared_ptr<const PhiSource> fit_phi(const Dataset& data, const PairFoldAssignment& folds,
                                         const Learner& learner, const PairTarget& target,
                                         std::span<const std::size_t> columns, std::size_t pair_cap,
                                         std::uint64_t seed);

struct CrossFitOptions {
  LearnerSpec learner;
  LearnerSpec pair_learner = default_pair_learner();
  double trim = 0.01;
  std::size_t folds = 5;
  std::size_t pair_cap = 50000;
  std::uint64_t seed = 1;

  static LearnerSpec default_pair_learner();
  void validate() const;
};

/// Fits whatever nuisances the family's scores need.
NuisanceFits cross_fit(const Dataset& data, const WelfareSpec& spec, const CrossFitOptions& options);

/// Family kernel g on observed units (gini: min of outcomes; kendall: sign
/// product with the parental outcome).
PairTarget observed_kernel(const Dataset& data, Family family);

}  // namespace orthopolicy
