#include "orthopolicy/folds.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "orthopolicy/error.hpp"
#include "orthopolicy/rng.hpp"

namespace orthopolicy {

FoldAssignment FoldAssignment::from_groups(std::vector<std::size_t> group_of, std::size_t groups) {
  if (groups == 0) throw ArgumentError("fold assignment needs at least one group");
  FoldAssignment f;
  f.members_.resize(groups);
  for (std::size_t i = 0; i < group_of.size(); ++i) {
    if (group_of[i] >= groups) throw ArgumentError("group label out of range for unit " + std::to_string(i));
    f.members_[group_of[i]].push_back(i);
  }
  f.group_of_ = std::move(group_of);
  return f;
}

std::vector<std::size_t> FoldAssignment::complement(std::initializer_list<std::size_t> excluded) const {
  std::vector<std::size_t> out;
  out.reserve(n());
  for (std::size_t i = 0; i < n(); ++i) {
    if (std::find(excluded.begin(), excluded.end(), group_of_[i]) == excluded.end()) out.push_back(i);
  }
  return out;
}

FoldAssignment make_unit_folds(std::size_t n, std::size_t groups, std::uint64_t seed) {
  if (groups < 2) throw ArgumentError("need at least 2 folds");
  if (groups > n) throw ArgumentError("number of folds (" + std::to_string(groups) + ") exceeds n (" +
                                      std::to_string(n) + ")");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0xf01d}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> group_of(n);
  for (std::size_t r = 0; r < n; ++r) group_of[order[r]] = r % groups;
  return FoldAssignment::from_groups(std::move(group_of), groups);
}

PairFoldAssignment::PairFoldAssignment(FoldAssignment units) : units_(std::move(units)) {
  const std::size_t k = units_.groups();
  if (k < 2) throw ArgumentError("pair folds need at least 2 unit groups");
  fold_index_.assign(k * k, 0);
  for (std::size_t g = 0; g < k; ++g) {
    fold_index_[g * k + g] = folds_.size();
    folds_.push_back({PairFoldShape::Square, g, g});
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = f + 1; g < k; ++g) {
      fold_index_[f * k + g] = fold_index_[g * k + f] = folds_.size();
      folds_.push_back({PairFoldShape::Triangle, f, g});
    }
  }
}

std::size_t PairFoldAssignment::fold_of_groups(std::size_t g1, std::size_t g2) const {
  return fold_index_[g1 * units_.groups() + g2];
}

std::vector<UnitPair> PairFoldAssignment::pairs(std::size_t fold) const {
  const auto& pf = folds_.at(fold);
  std::vector<UnitPair> out;
  const auto& a = units_.members(pf.first);
  const auto& b = units_.members(pf.second);
  if (pf.shape == PairFoldShape::Square) {
    for (std::size_t p = 0; p < a.size(); ++p)
      for (std::size_t q = p + 1; q < a.size(); ++q) out.emplace_back(a[p], a[q]);
  } else {
    for (auto i : a)
      for (auto j : b) out.emplace_back(std::min(i, j), std::max(i, j));
    std::sort(out.begin(), out.end());
  }
  return out;
}

std::size_t PairFoldAssignment::pair_count(std::size_t fold) const {
  const auto& pf = folds_.at(fold);
  const std::size_t a = units_.members(pf.first).size();
  if (pf.shape == PairFoldShape::Square) return a * (a - (a > 0 ? 1 : 0)) / 2;
  return a * units_.members(pf.second).size();
}

std::vector<std::size_t> PairFoldAssignment::training_units(std::size_t fold) const {
  const auto& pf = folds_.at(fold);
  return units_.complement({pf.first, pf.second});
}

std::vector<std::size_t> PairFoldAssignment::scored_units(std::size_t fold) const {
  const auto& pf = folds_.at(fold);
  std::vector<std::size_t> out = units_.members(pf.first);
  if (pf.shape == PairFoldShape::Triangle) {
    const auto& b = units_.members(pf.second);
    out.insert(out.end(), b.begin(), b.end());
    std::sort(out.begin(), out.end());
  }
  return out;
}

PairFoldAssignment make_pair_folds(const FoldAssignment& units) { return PairFoldAssignment(units); }

}  // namespace orthopolicy
