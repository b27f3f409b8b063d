#include "orthopolicy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "orthopolicy/error.hpp"
#include "orthopolicy/parallel.hpp"

namespace orthopolicy {

// ---------------------------------------------------------------------------
// Grid

GridSpec GridSpec::parse(const std::string& s) {
  GridSpec g;
  if (s == "deciles") return g;
  if (s == "all") {
    g.kind = GridKind::All;
    return g;
  }
  const std::string prefix = "quantiles:";
  if (s.rfind(prefix, 0) == 0) {
    g.kind = GridKind::Quantiles;
    try {
      std::size_t used = 0;
      const long q = std::stol(s.substr(prefix.size()), &used);
      if (used != s.size() - prefix.size() || q < 2) throw std::invalid_argument(s);
      g.quantiles = static_cast<std::size_t>(q);
    } catch (const std::exception&) {
      throw ConfigError("grid '" + s + "': expected quantiles:Q with integer Q >= 2");
    }
    return g;
  }
  throw ConfigError("unknown grid '" + s + "' (expected deciles, all or quantiles:Q)");
}

std::string GridSpec::to_string() const {
  switch (kind) {
    case GridKind::Deciles: return "deciles";
    case GridKind::All: return "all";
    case GridKind::Quantiles: return "quantiles:" + std::to_string(quantiles);
  }
  return "deciles";
}

ThresholdGrid::ThresholdGrid(std::vector<std::size_t> features, std::vector<std::vector<double>> cuts)
    : features_(std::move(features)), cuts_(std::move(cuts)) {
  if (features_.empty()) throw ArgumentError("threshold grid has no features");
  if (features_.size() != cuts_.size()) throw ArgumentError("threshold grid: one cut list per feature");
  for (std::size_t s = 0; s < features_.size(); ++s) {
    if (s > 0 && features_[s] <= features_[s - 1]) throw ArgumentError("grid features must be strictly increasing");
    if (cuts_[s].empty())
      throw ArgumentError("threshold grid has no cuts for feature " + std::to_string(features_[s]));
    if (cuts_[s].size() > 65000) throw ArgumentError("too many cuts for one feature");
    for (std::size_t c = 0; c < cuts_[s].size(); ++c) {
      if (!std::isfinite(cuts_[s][c])) throw ArgumentError("grid cuts must be finite");
      if (c > 0 && !(cuts_[s][c] > cuts_[s][c - 1])) throw ArgumentError("grid cuts must be strictly increasing");
      splits_.emplace_back(s, c);
    }
  }
}

namespace {

double type7_quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

ThresholdGrid ThresholdGrid::from_data(const Eigen::MatrixXd& x, std::vector<std::size_t> features, GridSpec spec) {
  if (x.rows() < 1) throw ArgumentError("cannot build a grid from an empty sample");
  if (features.empty())
    for (Eigen::Index c = 0; c < x.cols(); ++c) features.push_back(static_cast<std::size_t>(c));
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  std::vector<std::vector<double>> cuts;
  for (auto f : features) {
    if (f >= static_cast<std::size_t>(x.cols())) throw ArgumentError("grid feature index out of range");
    std::vector<double> v(x.col(static_cast<Eigen::Index>(f)).data(),
                          x.col(static_cast<Eigen::Index>(f)).data() + x.rows());
    std::sort(v.begin(), v.end());
    std::vector<double> distinct = v;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<double> c;
    std::size_t q = spec.kind == GridKind::Quantiles ? spec.quantiles : 10;
    if (spec.kind == GridKind::All || (spec.kind == GridKind::Deciles && distinct.size() <= 10)) {
      c = distinct;
    } else {
      for (std::size_t k = 1; k < q; ++k) c.push_back(type7_quantile(v, static_cast<double>(k) / static_cast<double>(q)));
      c.erase(std::unique(c.begin(), c.end()), c.end());
    }
    const double top = v.back();
    c.erase(std::remove_if(c.begin(), c.end(), [top](double t) { return t >= top; }), c.end());
    if (c.empty()) throw ArgumentError("feature " + std::to_string(f) + " is constant; no cut points");
    cuts.push_back(std::move(c));
  }
  return ThresholdGrid(std::move(features), std::move(cuts));
}

std::size_t ThresholdGrid::bin(std::size_t slot, double x) const {
  const auto& c = cuts_[slot];
  return static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), x) - c.begin());
}

nlohmann::json ThresholdGrid::to_json(const std::vector<std::string>& names) const {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t s = 0; s < slots(); ++s) {
    nlohmann::json e{{"feature", features_[s]}, {"cuts", cuts_[s]}};
    if (features_[s] < names.size()) e["name"] = names[features_[s]];
    j.push_back(e);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Trees

PolicyTree PolicyTree::constant(bool treat) {
  PolicyTree t;
  t.depth_ = 0;
  t.actions_[0] = treat ? 1 : 0;
  return t;
}

PolicyTree PolicyTree::stump(Split root, std::array<std::uint8_t, 2> actions) {
  PolicyTree t;
  t.depth_ = 1;
  t.splits_[0] = root;
  t.actions_[0] = actions[0] ? 1 : 0;
  t.actions_[1] = actions[1] ? 1 : 0;
  return t;
}

PolicyTree PolicyTree::two_level(Split root, Split left, Split right, std::array<std::uint8_t, 4> actions) {
  PolicyTree t;
  t.depth_ = 2;
  t.splits_ = {root, left, right};
  for (std::size_t l = 0; l < 4; ++l) t.actions_[l] = actions[l] ? 1 : 0;
  return t;
}

std::vector<std::size_t> PolicyTree::leaves(const Eigen::MatrixXd& x) const {
  std::vector<std::size_t> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) out[static_cast<std::size_t>(r)] = leaf_of(x.row(r));
  return out;
}

std::vector<std::uint8_t> PolicyTree::assign(const Eigen::MatrixXd& x) const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) out[static_cast<std::size_t>(r)] = actions_[leaf_of(x.row(r))];
  return out;
}

std::vector<std::int64_t> PolicyTree::encoding() const {
  std::vector<std::int64_t> e{depth_};
  const std::size_t splits = depth_ == 0 ? 0 : (depth_ == 1 ? 1 : 3);
  for (std::size_t k = 0; k < splits; ++k) {
    e.push_back(static_cast<std::int64_t>(splits_[k].feature));
    e.push_back(static_cast<std::int64_t>(splits_[k].cut));
  }
  for (std::size_t l = 0; l < leaf_count(); ++l) e.push_back(actions_[l]);
  return e;
}

namespace {

std::string feature_name(std::size_t f, const std::vector<std::string>& names) {
  return f < names.size() ? names[f] : "x" + std::to_string(f);
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

nlohmann::json PolicyTree::to_json(const std::vector<std::string>& names) const {
  nlohmann::json splits = nlohmann::json::array();
  const std::size_t count = depth_ == 0 ? 0 : (depth_ == 1 ? 1 : 3);
  for (std::size_t k = 0; k < count; ++k)
    splits.push_back({{"feature", feature_name(splits_[k].feature, names)},
                      {"column", splits_[k].feature},
                      {"cut", splits_[k].cut},
                      {"threshold", splits_[k].threshold}});
  std::vector<int> actions;
  for (std::size_t l = 0; l < leaf_count(); ++l) actions.push_back(actions_[l]);
  return {{"depth", depth_}, {"splits", splits}, {"leaf_treat", actions}, {"encoding", encoding()}};
}

std::string PolicyTree::describe(const std::vector<std::string>& names) const {
  auto act = [&](std::size_t l) { return std::string(actions_[l] ? "treat" : "none"); };
  auto cond = [&](const Split& s) {
    return feature_name(s.feature, names) + "<=" + format_number(s.threshold);
  };
  if (depth_ == 0) return actions_[0] ? "treat-all" : "treat-none";
  if (depth_ == 1) return "[" + cond(splits_[0]) + " ? " + act(0) + " : " + act(1) + "]";
  return "[" + cond(splits_[0]) + " ? [" + cond(splits_[1]) + " ? " + act(0) + " : " + act(1) + "] : [" +
         cond(splits_[2]) + " ? " + act(2) + " : " + act(3) + "]]";
}

// ---------------------------------------------------------------------------
// Enumeration

TreeEnumerator::TreeEnumerator(const ThresholdGrid& grid, int depth, bool dedupe)
    : grid_(grid), depth_(depth), dedupe_(dedupe) {
  if (depth < 0 || depth > 2) throw ArgumentError("tree depth must be 0, 1 or 2");
  if (grid.split_count() == 0) throw ArgumentError("threshold grid is empty");
}

std::uint64_t TreeEnumerator::count() const {
  const std::uint64_t s = grid_.split_count();
  if (depth_ == 0) return 2;
  if (depth_ == 1) return s * 4;
  return s * s * s * 16;
}

PolicyTree TreeEnumerator::at(std::uint64_t index) const {
  if (index >= count()) throw ArgumentError("tree index out of range");
  auto make_split = [&](std::uint64_t s) {
    const auto [slot, cut] = grid_.split(static_cast<std::size_t>(s));
    return Split{grid_.feature(slot), cut, grid_.cuts(slot)[cut]};
  };
  if (depth_ == 0) return PolicyTree::constant(index == 1);
  if (depth_ == 1) {
    const auto lab = index % 4;
    return PolicyTree::stump(make_split(index / 4),
                             {static_cast<std::uint8_t>((lab >> 1) & 1), static_cast<std::uint8_t>(lab & 1)});
  }
  const std::uint64_t s = grid_.split_count();
  const auto lab = index % 16;
  const auto structure = index / 16;
  const auto right = structure % s;
  const auto left = (structure / s) % s;
  const auto root = structure / (s * s);
  std::array<std::uint8_t, 4> actions{};
  for (std::size_t l = 0; l < 4; ++l) actions[l] = static_cast<std::uint8_t>((lab >> (3 - l)) & 1);
  return PolicyTree::two_level(make_split(root), make_split(left), make_split(right), actions);
}

void TreeEnumerator::for_each(const std::function<void(std::uint64_t, const PolicyTree&)>& fn) const {
  const std::uint64_t total = count();
  if (!dedupe_) {
    for (std::uint64_t i = 0; i < total; ++i) fn(i, at(i));
    return;
  }
  // One representative point per lattice cell: bin b maps to cut b itself
  // (x = cut_b lies in bin b), the last bin to a point above every cut.
  std::size_t lattice = 1;
  for (std::size_t s = 0; s < grid_.slots(); ++s) {
    lattice *= grid_.cuts(s).size() + 1;
    if (lattice > (std::size_t{1} << 20)) throw ArgumentError("grid lattice too large to deduplicate trees");
  }
  std::size_t width = 0;
  for (auto f : grid_.features()) width = std::max(width, f + 1);
  Eigen::MatrixXd points = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(lattice), static_cast<Eigen::Index>(width));
  for (std::size_t p = 0; p < lattice; ++p) {
    std::size_t rest = p;
    for (std::size_t s = 0; s < grid_.slots(); ++s) {
      const auto& c = grid_.cuts(s);
      const std::size_t b = rest % (c.size() + 1);
      rest /= c.size() + 1;
      points(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(grid_.feature(s))) =
          b < c.size() ? c[b] : c.back() + 1.0;
    }
  }
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < total; ++i) {
    const PolicyTree tree = at(i);
    const auto a = tree.assign(points);
    if (seen.insert(std::string(a.begin(), a.end())).second) fn(i, tree);
  }
}

std::vector<PolicyTree> TreeEnumerator::all() const {
  std::vector<PolicyTree> out;
  for_each([&](std::uint64_t, const PolicyTree& t) { out.push_back(t); });
  return out;
}

// ---------------------------------------------------------------------------
// Welfare

namespace {

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*lo == *hi) return 0.0;
  const double mean = pairwise_sum(v) / static_cast<double>(v.size());
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1));
}

constexpr std::size_t kRowChunks = 16;

WelfareEstimate finish(double mean, double se, const WelfareSpec& spec) {
  WelfareEstimate w;
  w.mean = mean;
  w.se = se;
  w.value = spec.family == Family::KendallTau ? -std::abs(mean - spec.target) : mean;
  return w;
}

}  // namespace

WelfareEstimate estimate_welfare(const ScoreSet& scores, std::span<const std::uint8_t> actions,
                                 const WelfareSpec& spec) {
  if (const auto* lin = std::get_if<LinearScoreSet>(&scores)) {
    const std::size_t n = lin->n();
    if (actions.size() != n) throw ArgumentError("policy and scores differ in length");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = actions[i] ? lin->treated[i] : lin->control[i];
    return finish(pairwise_sum(v) / static_cast<double>(n), sample_sd(v) / std::sqrt(static_cast<double>(n)), spec);
  }
  const auto& pairs = std::get<PairScoreSet>(scores);
  const std::size_t n = pairs.n();
  if (actions.size() != n) throw ArgumentError("policy and scores differ in length");
  const std::size_t chunks = std::min(kRowChunks, n - 1);
  std::vector<double> row_sum(n, 0.0);
  std::vector<std::vector<double>> col_sum(chunks, std::vector<double>(n, 0.0));
  parallel_for(chunks, [&](std::size_t c) {
    std::vector<double> s0, s1;
    const std::size_t begin = c * (n - 1) / chunks;
    const std::size_t end = (c + 1) * (n - 1) / chunks;
    auto& col = col_sum[c];
    for (std::size_t i = begin; i < end; ++i) {
      const int a = actions[i];
      const auto r0 = pairs.row(a, 0, i, s0);
      const auto r1 = pairs.row(a, 1, i, s1);
      double s = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = actions[j] ? r1[j - i - 1] : r0[j - i - 1];
        s += v;
        col[j] += v;
      }
      row_sum[i] = s;
    }
  });
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    double col = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) col += col_sum[c][i];
    h[i] = (row_sum[i] + col) / static_cast<double>(n - 1);
  }
  const double mean = pairwise_sum(row_sum) / static_cast<double>(pairs.pair_count());
  return finish(mean, 2.0 * sample_sd(h) / std::sqrt(static_cast<double>(n)), spec);
}

WelfareEstimate estimate_welfare(const ScoreSet& scores, const PolicyTree& policy, const Eigen::MatrixXd& x,
                                 const WelfareSpec& spec) {
  const auto actions = policy.assign(x);
  return estimate_welfare(scores, actions, spec);
}

// ---------------------------------------------------------------------------
// Diagnostics

namespace {

struct Moments {
  double sum_sq = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
};

SliceStats finish_slice(std::string name, const Moments& m, std::vector<std::size_t> hist, double lo, double hi) {
  SliceStats s;
  s.name = std::move(name);
  s.second_moment = m.count ? m.sum_sq / static_cast<double>(m.count) : 0.0;
  s.min = m.min;
  s.max = m.max;
  s.histogram_low = lo;
  s.histogram_high = hi;
  s.histogram = std::move(hist);
  return s;
}

std::size_t hist_bin(double v, double lo, double hi, std::size_t bins) {
  if (!(hi > lo)) return 0;
  const double t = (v - lo) / (hi - lo) * static_cast<double>(bins);
  return std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, t)));
}

}  // namespace

ScoreDiagnostics score_diagnostics(const ScoreSet& scores, double clamped_share, std::size_t bins) {
  if (bins == 0) throw ArgumentError("histogram needs at least one bin");
  ScoreDiagnostics out;
  out.clamped_share = clamped_share;
  if (const auto* lin = std::get_if<LinearScoreSet>(&scores)) {
    for (int arm = 1; arm >= 0; --arm) {
      const auto& v = arm == 1 ? lin->treated : lin->control;
      Moments m;
      std::vector<double> sq(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        sq[i] = v[i] * v[i];
        m.min = std::min(m.min, v[i]);
        m.max = std::max(m.max, v[i]);
      }
      m.count = v.size();
      m.sum_sq = pairwise_sum(sq);
      std::vector<std::size_t> hist(bins, 0);
      for (double x : v) ++hist[hist_bin(x, m.min, m.max, bins)];
      out.slices.push_back(finish_slice(arm == 1 ? "1" : "0", m, std::move(hist), m.min, m.max));
    }
    return out;
  }
  const auto& pairs = std::get<PairScoreSet>(scores);
  const std::size_t n = pairs.n();
  for (int ab = 3; ab >= 0; --ab) {
    const int a = ab / 2, b = ab % 2;
    std::vector<double> row_sq(n - 1), row_min(n - 1), row_max(n - 1);
    parallel_for(n - 1, [&](std::size_t i) {
      std::vector<double> scratch;
      const auto r = pairs.row(a, b, i, scratch);
      double s = 0.0, lo = r[0], hi = r[0];
      for (double v : r) {
        s += v * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      row_sq[i] = s;
      row_min[i] = lo;
      row_max[i] = hi;
    });
    Moments m;
    m.count = pairs.pair_count();
    m.sum_sq = pairwise_sum(row_sq);
    m.min = *std::min_element(row_min.begin(), row_min.end());
    m.max = *std::max_element(row_max.begin(), row_max.end());
    std::vector<std::size_t> hist(bins, 0);
    pairs.visit_slice(a, b, [&](std::size_t, std::span<const double> r) {
      for (double v : r) ++hist[hist_bin(v, m.min, m.max, bins)];
    });
    out.slices.push_back(finish_slice(std::to_string(a) + std::to_string(b), m, std::move(hist), m.min, m.max));
  }
  return out;
}

nlohmann::json ScoreDiagnostics::to_json() const {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& sl : slices)
    s.push_back({{"slice", sl.name},
                 {"second_moment", sl.second_moment},
                 {"min", sl.min},
                 {"max", sl.max},
                 {"histogram_range", {sl.histogram_low, sl.histogram_high}},
                 {"histogram", sl.histogram}});
  return {{"slices", s}, {"clamped_share", clamped_share}};
}

AteEstimate estimate_ate(const LinearScoreSet& scores) {
  const std::size_t n = scores.n();
  if (n < 2) throw ArgumentError("ATE needs at least two units");
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = scores.treated[i] - scores.control[i];
  AteEstimate a;
  a.ate = pairwise_sum(diff) / static_cast<double>(n);
  a.se = sample_sd(diff) / std::sqrt(static_cast<double>(n));
  if (a.se > 0.0)
    a.p = std::erfc(std::abs(a.ate / a.se) / std::sqrt(2.0));
  else
    a.p = a.ate == 0.0 ? 1.0 : 0.0;
  return a;
}

}  // namespace orthopolicy
