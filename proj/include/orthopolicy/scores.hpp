#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "orthopolicy/data.hpp"
#include "orthopolicy/nuisance.hpp"
#include "orthopolicy/welfare.hpp"

namespace orthopolicy {

/// Per-unit scores: welfare of policy pi is mean(treated * pi + control * (1 - pi)).
struct LinearScoreSet {
  std::vector<double> treated;
  std::vector<double> control;
  std::size_t n() const { return treated.size(); }
};

/// Per-pair scores Gamma^{ab}_{ij} for i < j. Stored densely (row-major
/// upper triangle) when the pair count fits the budget; otherwise each row
/// is regenerated on demand from the nuisance predictions.
class PairScoreSet {
 public:
  /// Writes out[j - i - 1] = Gamma^{ab}_{ij} for j = i+1 .. n-1.
  using RowFn = std::function<void(int a, int b, std::size_t i, std::span<double> out)>;
  static constexpr std::size_t kDenseBudget = 5'000'000;

  PairScoreSet(std::size_t n, RowFn rows, std::size_t dense_budget = kDenseBudget);

  std::size_t n() const { return n_; }
  std::size_t pair_count() const { return n_ * (n_ - 1) / 2; }
  bool dense() const { return dense_; }
  static std::size_t offset(std::size_t n, std::size_t i) { return i * (2 * n - i - 1) / 2; }

  /// Row i of slice (a, b); `scratch` is used only for lazy storage.
  std::span<const double> row(int a, int b, std::size_t i, std::vector<double>& scratch) const;
  /// Whole slice in canonical order; dense storage only.
  std::span<const double> slice(int a, int b) const;
  /// Sequential visit of every row of a slice.
  void visit_slice(int a, int b, const std::function<void(std::size_t i, std::span<const double>)>& fn) const;
  double at(int a, int b, std::size_t i, std::size_t j) const;

 private:
  std::size_t n_;
  RowFn rows_;
  bool dense_;
  std::array<std::vector<double>, 4> store_;
};

using ScoreSet = std::variant<LinearScoreSet, PairScoreSet>;

LinearScoreSet linear_scores_additive(const Dataset& data, const NuisanceFits& fits,
                                      Identification id = Identification::DR);
/// gamma predictions below 1e-6 * mean(Y) are floored before U and gamma^-theta.
LinearScoreSet linear_scores_atkinson_iop(const Dataset& data, const NuisanceFits& fits, double theta,
                                          Identification id = Identification::DR);
PairScoreSet pair_scores_gini(const Dataset& data, const NuisanceFits& fits, Identification id = Identification::DR);
PairScoreSet pair_scores_iop_gini(const Dataset& data, const NuisanceFits& fits,
                                  Identification id = Identification::DR);
PairScoreSet pair_scores_kendall(const Dataset& data, const NuisanceFits& fits,
                                 Identification id = Identification::DR);

/// Inverse-propensity scores without correction terms.
ScoreSet ipw_scores(const Dataset& data, const NuisanceFits& fits, const WelfareSpec& spec);

/// IPW base plus the propensity correction that makes it orthogonal with
/// respect to e. Additive and gini only; gini needs dense storage since the
/// correction averages phi over all partners.
ScoreSet ipw_orthogonal_scores(const Dataset& data, const NuisanceFits& fits, Family family);

/// Dispatch on family and identification.
ScoreSet build_scores(const Dataset& data, const NuisanceFits& fits, const WelfareSpec& spec);

}  // namespace orthopolicy
