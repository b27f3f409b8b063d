#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

namespace orthopolicy {

/// Partition of units 0..n-1 into L groups whose sizes differ by at most one.
class FoldAssignment {
 public:
  /// Wraps an explicit group labelling (labels in [0, groups)).
  static FoldAssignment from_groups(std::vector<std::size_t> group_of, std::size_t groups);

  std::size_t n() const { return group_of_.size(); }
  std::size_t groups() const { return members_.size(); }
  std::size_t group_of(std::size_t unit) const { return group_of_[unit]; }
  const std::vector<std::size_t>& group_labels() const { return group_of_; }
  const std::vector<std::size_t>& members(std::size_t group) const { return members_[group]; }

  /// Units outside the listed groups, ascending.
  std::vector<std::size_t> complement(std::initializer_list<std::size_t> excluded) const;

 private:
  std::vector<std::size_t> group_of_;
  std::vector<std::vector<std::size_t>> members_;
};

/// Seeded balanced split; a pure function of (n, groups, seed).
FoldAssignment make_unit_folds(std::size_t n, std::size_t groups, std::uint64_t seed);

enum class PairFoldShape { Square, Triangle };

/// Pairs (i<j) with one unit in `first` and the other in `second`. A square has
/// first == second (within-group pairs); a triangle spans two groups.
struct PairFold {
  PairFoldShape shape;
  std::size_t first;
  std::size_t second;
};

using UnitPair = std::pair<std::size_t, std::size_t>;

/// Pair-level cross-fitting folds built on a unit partition. The nuisances
/// used for a pair fold are trained on units outside both of its groups, so
/// no pair is ever scored with a model that saw either of its members.
class PairFoldAssignment {
 public:
  explicit PairFoldAssignment(FoldAssignment units);

  const FoldAssignment& units() const { return units_; }
  const std::vector<PairFold>& folds() const { return folds_; }
  std::size_t fold_count() const { return folds_.size(); }

  std::size_t fold_of_groups(std::size_t g1, std::size_t g2) const;
  std::size_t fold_of_pair(std::size_t i, std::size_t j) const {
    return fold_of_groups(units_.group_of(i), units_.group_of(j));
  }

  /// All (i, j) with i < j in the fold, ascending.
  std::vector<UnitPair> pairs(std::size_t fold) const;
  std::size_t pair_count(std::size_t fold) const;

  /// Training units for the fold's nuisances.
  std::vector<std::size_t> training_units(std::size_t fold) const;
  /// Units that appear in the fold's pairs.
  std::vector<std::size_t> scored_units(std::size_t fold) const;

 private:
  FoldAssignment units_;
  std::vector<PairFold> folds_;
  std::vector<std::size_t> fold_index_;  // groups x groups
};

/// K squares followed by K(K-1)/2 triangles. Requires K >= 2.
PairFoldAssignment make_pair_folds(const FoldAssignment& units);

}  // namespace orthopolicy
