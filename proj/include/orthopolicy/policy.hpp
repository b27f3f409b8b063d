#pragma once

#include <array>
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
#include "orthopolicy/scores.hpp"
#include "orthopolicy/welfare.hpp"

namespace orthopolicy {

// ---------------------------------------------------------------------------
// Candidate thresholds

enum class GridKind { Deciles, Quantiles, All };

struct GridSpec {
  GridKind kind = GridKind::Deciles;
  std::size_t quantiles = 10;

  /// "deciles", "all" or "quantiles:Q".
  static GridSpec parse(const std::string& s);
  std::string to_string() const;
};

/// Sorted candidate cuts per policy feature. A unit goes left at cut c when
/// x <= cut; bin(x) is the index of the first cut >= x, so x <= cut_c exactly
/// when bin(x) <= c.
class ThresholdGrid {
 public:
  ThresholdGrid(std::vector<std::size_t> features, std::vector<std::vector<double>> cuts);

  /// Deciles (or all distinct values for features with at most ten of
  /// them), Q-quantiles, or all distinct values. Cuts at the feature
  /// maximum are dropped since they split nothing.
  static ThresholdGrid from_data(const Eigen::MatrixXd& x, std::vector<std::size_t> features, GridSpec spec);

  std::size_t slots() const { return features_.size(); }
  std::size_t feature(std::size_t slot) const { return features_[slot]; }
  const std::vector<std::size_t>& features() const { return features_; }
  const std::vector<double>& cuts(std::size_t slot) const { return cuts_[slot]; }
  /// Splits in enumeration order: slots ascending, cuts ascending.
  std::size_t split_count() const { return splits_.size(); }
  std::pair<std::size_t, std::size_t> split(std::size_t s) const { return splits_[s]; }
  std::size_t bin(std::size_t slot, double x) const;
  nlohmann::json to_json(const std::vector<std::string>& names = {}) const;

 private:
  std::vector<std::size_t> features_;
  std::vector<std::vector<double>> cuts_;
  std::vector<std::pair<std::size_t, std::size_t>> splits_;
};

// ---------------------------------------------------------------------------
// Trees

struct Split {
  std::size_t feature = 0;  // covariate column
  std::size_t cut = 0;      // index into the grid's cuts for that feature
  double threshold = 0.0;   // x <= threshold goes left
};

/// Complete threshold tree of depth 0, 1 or 2. Leaves are numbered left to
/// right; splits are [root, left child, right child].
class PolicyTree {
 public:
  static PolicyTree constant(bool treat);
  static PolicyTree stump(Split root, std::array<std::uint8_t, 2> actions);
  static PolicyTree two_level(Split root, Split left, Split right, std::array<std::uint8_t, 4> actions);

  int depth() const { return depth_; }
  std::size_t leaf_count() const { return std::size_t{1} << depth_; }
  const Split& split(std::size_t k) const { return splits_[k]; }
  bool treats(std::size_t leaf) const { return actions_[leaf] != 0; }

  template <class Row>
  std::size_t leaf_of(const Row& x) const {
    if (depth_ == 0) return 0;
    const bool left = x(static_cast<Eigen::Index>(splits_[0].feature)) <= splits_[0].threshold;
    if (depth_ == 1) return left ? 0 : 1;
    const Split& s = splits_[left ? 1 : 2];
    const bool inner = x(static_cast<Eigen::Index>(s.feature)) <= s.threshold;
    return (left ? 0 : 2) + (inner ? 0 : 1);
  }
  std::vector<std::size_t> leaves(const Eigen::MatrixXd& x) const;
  std::vector<std::uint8_t> assign(const Eigen::MatrixXd& x) const;

  /// [depth, (feature, cut) per split, leaf actions]; lexicographic order of
  /// encodings is the enumeration order.
  std::vector<std::int64_t> encoding() const;
  nlohmann::json to_json(const std::vector<std::string>& names = {}) const;
  std::string describe(const std::vector<std::string>& names = {}) const;

 private:
  int depth_ = 0;
  std::array<Split, 3> splits_{};
  std::array<std::uint8_t, 4> actions_{};
};

/// Every complete tree of the given depth over the grid, in encoding order.
/// Count at depth 2 is S^3 * 16 for S = total cuts, S * 4 at depth 1, 2 at 0.
class TreeEnumerator {
 public:
  TreeEnumerator(const ThresholdGrid& grid, int depth, bool dedupe = false);
  std::uint64_t count() const;
  PolicyTree at(std::uint64_t index) const;
  /// With dedupe, trees whose treatment map over the grid lattice repeats an
  /// earlier one are skipped.
  void for_each(const std::function<void(std::uint64_t index, const PolicyTree&)>& fn) const;
  std::vector<PolicyTree> all() const;

 private:
  const ThresholdGrid& grid_;
  int depth_;
  bool dedupe_;
};

// ---------------------------------------------------------------------------
// Welfare

struct WelfareEstimate {
  double value = 0.0;  // welfare (kendall: -|mean - t|)
  double mean = 0.0;   // score mean under the policy
  double se = 0.0;     // standard error of `mean`
};

WelfareEstimate estimate_welfare(const ScoreSet& scores, std::span<const std::uint8_t> actions,
                                 const WelfareSpec& spec);
WelfareEstimate estimate_welfare(const ScoreSet& scores, const PolicyTree& policy, const Eigen::MatrixXd& x,
                                 const WelfareSpec& spec);

/// Score sums pre-aggregated per cell of the grid lattice (distinct bin
/// tuples), so evaluating a tree costs O(cells^2) rather than O(n^2).
struct CellAggregate {
  bool pair = false;
  std::size_t slots = 0;
  std::vector<std::uint16_t> bins;  // cells x slots
  std::vector<double> count;        // units per cell
  std::vector<double> treated_sum;  // linear
  std::vector<double> control_sum;
  std::array<std::vector<double>, 4> pair_sum;  // cells x cells, [cell(i)][cell(j)]
  double normalizer = 1.0;

  std::size_t cells() const { return count.size(); }
  std::uint16_t bin(std::size_t cell, std::size_t slot) const { return bins[cell * slots + slot]; }
};

/// Cell id per unit, and the distinct bin tuples in lexicographic order.
struct CellIndex {
  std::vector<std::size_t> cell_of;
  std::vector<std::uint16_t> bins;
  std::size_t cells = 0;
};
CellIndex index_cells(const ThresholdGrid& grid, const Eigen::MatrixXd& x);

CellAggregate aggregate_scores(const ScoreSet& scores, const ThresholdGrid& grid, const Eigen::MatrixXd& x);

struct OptimizationResult {
  PolicyTree tree = PolicyTree::constant(false);
  double welfare = 0.0;
  double mean = 0.0;
  double treated = 0.0;  // units (or weight) treated
  std::uint64_t index = 0;
  std::uint64_t evaluated = 0;
};

/// Exact argmax over every tree of the given depth. Welfare within
/// 1e-12 * max(1, |W*|) of the maximum counts as tied; ties go to fewer
/// treated units, then to the smaller encoding.
OptimizationResult optimize_policy(const CellAggregate& cells, const ThresholdGrid& grid, int depth,
                                   const WelfareSpec& spec);
OptimizationResult optimize_policy(const ScoreSet& scores, const WelfareSpec& spec, const ThresholdGrid& grid,
                                   const Eigen::MatrixXd& x, int depth);

/// Welfare of one tree from the cell sums.
WelfareEstimate cell_welfare(const CellAggregate& cells, const ThresholdGrid& grid, const PolicyTree& tree,
                             const WelfareSpec& spec);

// ---------------------------------------------------------------------------
// Diagnostics and reports

struct SliceStats {
  std::string name;
  double second_moment = 0.0;
  double min = 0.0;
  double max = 0.0;
  double histogram_low = 0.0;
  double histogram_high = 0.0;
  std::vector<std::size_t> histogram;
};

struct ScoreDiagnostics {
  std::vector<SliceStats> slices;
  double clamped_share = 0.0;
  nlohmann::json to_json() const;
};

ScoreDiagnostics score_diagnostics(const ScoreSet& scores, double clamped_share = 0.0, std::size_t bins = 20);

struct AteEstimate {
  double ate = 0.0;
  double se = 0.0;
  double p = 1.0;
};
AteEstimate estimate_ate(const LinearScoreSet& scores);

/// Score sets for the summary columns of a policy report.
struct ReportScores {
  LinearScoreSet additive;
  std::optional<PairScoreSet> gini;
  std::optional<PairScoreSet> iop_gini;
  std::optional<PairScoreSet> kendall;
  std::vector<std::pair<std::string, std::string>> unavailable;  // column, reason
};
ReportScores report_scores(const Dataset& data, const CrossFitOptions& options, Identification id);

struct NodeSummary {
  std::size_t n = 0;
  double cate = 0.0;
  double treated_share = 0.0;  // observed p-hat
};

struct PolicyReport {
  std::string label;
  double welfare = 0.0;
  double welfare_se = 0.0;
  double mean = 0.0;
  std::optional<double> gini;
  std::optional<double> iop;
  std::optional<double> kendall_tau;
  double share_treated = 0.0;
  PolicyTree tree = PolicyTree::constant(false);
  std::vector<NodeSummary> nodes;  // root, then internal nodes, then leaves (breadth first)
  std::string rendering;
  nlohmann::json to_json(const std::vector<std::string>& names) const;
};

PolicyReport policy_report(const Dataset& data, const ReportScores& report, const ScoreSet& scores,
                           const WelfareSpec& spec, const PolicyTree& policy, std::string label = "");

/// ASCII tree with n, CATE and p-hat on every node.
std::string render_tree(const PolicyTree& tree, const std::vector<NodeSummary>& nodes,
                        const std::vector<std::string>& names);

}  // namespace orthopolicy
