#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "orthopolicy/error.hpp"
#include "orthopolicy/parallel.hpp"
#include "orthopolicy/policy.hpp"

namespace orthopolicy {

CellIndex index_cells(const ThresholdGrid& grid, const Eigen::MatrixXd& x) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const std::size_t slots = grid.slots();
  for (std::size_t s = 0; s < slots; ++s)
    if (grid.feature(s) >= static_cast<std::size_t>(x.cols())) throw ArgumentError("grid feature out of range");
  std::vector<std::uint16_t> tuples(n * slots);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < slots; ++s)
      tuples[i * slots + s] = static_cast<std::uint16_t>(
          grid.bin(s, x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(grid.feature(s)))));
  std::map<std::vector<std::uint16_t>, std::size_t> ids;
  for (std::size_t i = 0; i < n; ++i)
    ids.emplace(std::vector<std::uint16_t>(tuples.begin() + static_cast<std::ptrdiff_t>(i * slots),
                                           tuples.begin() + static_cast<std::ptrdiff_t>((i + 1) * slots)),
                0);
  CellIndex out;
  out.cells = ids.size();
  std::size_t next = 0;
  for (auto& [key, id] : ids) {
    id = next++;
    out.bins.insert(out.bins.end(), key.begin(), key.end());
  }
  out.cell_of.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.cell_of[i] = ids.at(std::vector<std::uint16_t>(tuples.begin() + static_cast<std::ptrdiff_t>(i * slots),
                                                       tuples.begin() + static_cast<std::ptrdiff_t>((i + 1) * slots)));
  return out;
}

CellAggregate aggregate_scores(const ScoreSet& scores, const ThresholdGrid& grid, const Eigen::MatrixXd& x) {
  const auto index = index_cells(grid, x);
  const std::size_t m = index.cells;
  CellAggregate agg;
  agg.slots = grid.slots();
  agg.bins = index.bins;
  agg.count.assign(m, 0.0);
  for (auto c : index.cell_of) agg.count[c] += 1.0;

  if (const auto* lin = std::get_if<LinearScoreSet>(&scores)) {
    if (lin->n() != index.cell_of.size()) throw ArgumentError("scores and covariates differ in length");
    agg.pair = false;
    agg.treated_sum.assign(m, 0.0);
    agg.control_sum.assign(m, 0.0);
    for (std::size_t i = 0; i < lin->n(); ++i) {
      agg.treated_sum[index.cell_of[i]] += lin->treated[i];
      agg.control_sum[index.cell_of[i]] += lin->control[i];
    }
    agg.normalizer = static_cast<double>(lin->n());
    return agg;
  }

  const auto& pairs = std::get<PairScoreSet>(scores);
  const std::size_t n = pairs.n();
  if (n != index.cell_of.size()) throw ArgumentError("scores and covariates differ in length");
  agg.pair = true;
  // Fixed chunking (a function of the cell count only) keeps totals
  // independent of the worker count.
  const double per_chunk = 4.0 * static_cast<double>(m) * static_cast<double>(m) * sizeof(double);
  const std::size_t budget_chunks = static_cast<std::size_t>(std::max(1.0, 256e6 / per_chunk));
  const std::size_t chunks = std::clamp<std::size_t>(budget_chunks, 1, std::min<std::size_t>(16, n - 1));
  std::vector<std::array<std::vector<double>, 4>> partial(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    auto& acc = partial[c];
    for (auto& a : acc) a.assign(m * m, 0.0);
    std::vector<double> scratch;
    const std::size_t begin = c * (n - 1) / chunks;
    const std::size_t end = (c + 1) * (n - 1) / chunks;
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t base = index.cell_of[i] * m;
      for (int ab = 0; ab < 4; ++ab) {
        const auto r = pairs.row(ab / 2, ab % 2, i, scratch);
        auto& a = acc[static_cast<std::size_t>(ab)];
        for (std::size_t j = i + 1; j < n; ++j) a[base + index.cell_of[j]] += r[j - i - 1];
      }
    }
  });
  for (int ab = 0; ab < 4; ++ab) {
    auto& total = agg.pair_sum[static_cast<std::size_t>(ab)];
    total.assign(m * m, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
      const auto& p = partial[c][static_cast<std::size_t>(ab)];
      for (std::size_t k = 0; k < m * m; ++k) total[k] += p[k];
    }
  }
  agg.normalizer = static_cast<double>(pairs.pair_count());
  return agg;
}

namespace {

using Leaf4 = std::array<std::array<double, 4>, 4>;

struct Candidate {
  double welfare = -std::numeric_limits<double>::infinity();
  double mean = 0.0;
  double treated = 0.0;
  std::uint64_t index = 0;
  bool valid = false;
};

class Evaluator {
 public:
  Evaluator(const CellAggregate& cells, const ThresholdGrid& grid, int depth, const WelfareSpec& spec)
      : cells_(cells), grid_(grid), depth_(depth), spec_(spec), m_(cells.cells()), s_(grid.split_count()) {
    if (cells.slots != grid.slots()) throw ArgumentError("cell aggregate does not match the grid");
    if (depth < 0 || depth > 2) throw ArgumentError("tree depth must be 0, 1 or 2");
    if (s_ == 0) throw ArgumentError("threshold grid is empty");
    goes_left_.resize(s_ * m_);
    for (std::size_t s = 0; s < s_; ++s) {
      const auto [slot, cut] = grid.split(s);
      for (std::size_t c = 0; c < m_; ++c) goes_left_[s * m_ + c] = cells.bin(c, slot) <= cut ? 1 : 0;
    }
  }

  std::size_t tasks() const { return depth_ == 2 ? s_ : 1; }

  using Visit = std::function<void(std::uint64_t index, double welfare, double mean, double treated)>;

  void run(std::size_t task, const Visit& visit) const {
    if (depth_ == 0) {
      std::vector<std::uint8_t> leaf(m_, 0);
      emit(0, leaf, 1, visit);
      return;
    }
    if (depth_ == 1) {
      std::vector<std::uint8_t> leaf(m_);
      for (std::size_t s = 0; s < s_; ++s) {
        for (std::size_t c = 0; c < m_; ++c) leaf[c] = left(s, c) ? 0 : 1;
        emit(s * 4, leaf, 2, visit);
      }
      return;
    }
    if (cells_.pair)
      run_pair_root(task, visit);
    else
      run_linear_root(task, visit);
  }

 private:
  bool left(std::size_t s, std::size_t c) const { return goes_left_[s * m_ + c] != 0; }

  // Generic evaluation from a per-cell leaf assignment (depth 0 and 1).
  void emit(std::uint64_t base, const std::vector<std::uint8_t>& leaf, std::size_t leaves, const Visit& visit) const {
    std::array<double, 4> count{};
    for (std::size_t c = 0; c < m_; ++c) count[leaf[c]] += cells_.count[c];
    if (!cells_.pair) {
      std::array<double, 4> t{}, u{};
      for (std::size_t c = 0; c < m_; ++c) {
        t[leaf[c]] += cells_.treated_sum[c];
        u[leaf[c]] += cells_.control_sum[c];
      }
      labelings_linear(base, t, u, count, leaves, visit);
      return;
    }
    std::array<Leaf4, 4> b{};
    for (int ab = 0; ab < 4; ++ab) {
      const auto& a = cells_.pair_sum[static_cast<std::size_t>(ab)];
      for (std::size_t c = 0; c < m_; ++c)
        for (std::size_t d = 0; d < m_; ++d) b[static_cast<std::size_t>(ab)][leaf[c]][leaf[d]] += a[c * m_ + d];
    }
    labelings_pair(base, b, count, leaves, visit);
  }

  static int action(std::size_t lab, std::size_t leaf, std::size_t leaves) {
    return static_cast<int>((lab >> (leaves - 1 - leaf)) & 1);
  }

  double transform(double mean) const {
    return spec_.family == Family::KendallTau ? -std::abs(mean - spec_.target) : mean;
  }

  void labelings_linear(std::uint64_t base, const std::array<double, 4>& t, const std::array<double, 4>& u,
                        const std::array<double, 4>& count, std::size_t leaves, const Visit& visit) const {
    const std::size_t labs = std::size_t{1} << leaves;
    for (std::size_t lab = 0; lab < labs; ++lab) {
      double total = 0.0, treated = 0.0;
      for (std::size_t l = 0; l < leaves; ++l) {
        const bool a = action(lab, l, leaves) != 0;
        total += a ? t[l] : u[l];
        if (a) treated += count[l];
      }
      const double mean = total / cells_.normalizer;
      visit(base + lab, transform(mean), mean, treated);
    }
  }

  void labelings_pair(std::uint64_t base, const std::array<Leaf4, 4>& b, const std::array<double, 4>& count,
                      std::size_t leaves, const Visit& visit) const {
    const std::size_t labs = std::size_t{1} << leaves;
    for (std::size_t lab = 0; lab < labs; ++lab) {
      double total = 0.0, treated = 0.0;
      for (std::size_t l = 0; l < leaves; ++l) {
        const int a = action(lab, l, leaves);
        if (a) treated += count[l];
        for (std::size_t k = 0; k < leaves; ++k)
          total += b[static_cast<std::size_t>(2 * a + action(lab, k, leaves))][l][k];
      }
      const double mean = total / cells_.normalizer;
      visit(base + lab, transform(mean), mean, treated);
    }
  }

  void run_linear_root(std::size_t r, const Visit& visit) const {
    std::vector<std::uint8_t> leaf(m_);
    for (std::size_t sl = 0; sl < s_; ++sl)
      for (std::size_t sr = 0; sr < s_; ++sr) {
        std::array<double, 4> t{}, u{}, count{};
        for (std::size_t c = 0; c < m_; ++c) {
          const std::size_t l = left(r, c) ? (left(sl, c) ? 0 : 1) : (left(sr, c) ? 2 : 3);
          t[l] += cells_.treated_sum[c];
          u[l] += cells_.control_sum[c];
          count[l] += cells_.count[c];
        }
        labelings_linear(((r * s_ + sl) * s_ + sr) * 16, t, u, count, 4, visit);
      }
  }

  void run_pair_root(std::size_t r, const Visit& visit) const {
    std::vector<std::size_t> lc, rc;
    for (std::size_t c = 0; c < m_; ++c) (left(r, c) ? lc : rc).push_back(c);
    const std::size_t nl = lc.size(), nr = rc.size();
    auto A = [&](int ab, std::size_t c, std::size_t d) {
      return cells_.pair_sum[static_cast<std::size_t>(ab)][c * m_ + d];
    };

    // Within-right blocks and right leaf counts for every right split.
    std::vector<std::array<std::array<std::array<double, 2>, 2>, 4>> right_block(s_);
    std::vector<std::array<double, 2>> right_count(s_);
    std::vector<std::uint8_t> yr(nr);
    for (std::size_t sr = 0; sr < s_; ++sr) {
      for (std::size_t q = 0; q < nr; ++q) yr[q] = left(sr, rc[q]) ? 0 : 1;
      auto& blk = right_block[sr];
      blk = {};
      right_count[sr] = {};
      for (std::size_t q = 0; q < nr; ++q) right_count[sr][yr[q]] += cells_.count[rc[q]];
      for (int ab = 0; ab < 4; ++ab)
        for (std::size_t p = 0; p < nr; ++p)
          for (std::size_t q = 0; q < nr; ++q) blk[static_cast<std::size_t>(ab)][yr[p]][yr[q]] += A(ab, rc[p], rc[q]);
    }

    std::vector<std::uint8_t> xl(nl);
    // from_left[ab][x][q]: sum over left cells in leaf x of A(left, right q);
    // to_left[ab][x][q]: sum over left cells in leaf x of A(right q, left).
    std::array<std::array<std::vector<double>, 2>, 4> from_left, to_left;
    for (auto& v : from_left)
      for (auto& w : v) w.assign(nr, 0.0);
    for (auto& v : to_left)
      for (auto& w : v) w.assign(nr, 0.0);

    for (std::size_t sl = 0; sl < s_; ++sl) {
      for (std::size_t p = 0; p < nl; ++p) xl[p] = left(sl, lc[p]) ? 0 : 1;
      std::array<double, 2> left_count{};
      for (std::size_t p = 0; p < nl; ++p) left_count[xl[p]] += cells_.count[lc[p]];
      std::array<std::array<std::array<double, 2>, 2>, 4> left_block{};
      for (int ab = 0; ab < 4; ++ab) {
        const auto k = static_cast<std::size_t>(ab);
        for (std::size_t p = 0; p < nl; ++p)
          for (std::size_t q = 0; q < nl; ++q) left_block[k][xl[p]][xl[q]] += A(ab, lc[p], lc[q]);
        for (int x = 0; x < 2; ++x) {
          std::fill(from_left[k][static_cast<std::size_t>(x)].begin(), from_left[k][static_cast<std::size_t>(x)].end(), 0.0);
          std::fill(to_left[k][static_cast<std::size_t>(x)].begin(), to_left[k][static_cast<std::size_t>(x)].end(), 0.0);
        }
        for (std::size_t p = 0; p < nl; ++p)
          for (std::size_t q = 0; q < nr; ++q) {
            from_left[k][xl[p]][q] += A(ab, lc[p], rc[q]);
            to_left[k][xl[p]][q] += A(ab, rc[q], lc[p]);
          }
      }

      for (std::size_t sr = 0; sr < s_; ++sr) {
        for (std::size_t q = 0; q < nr; ++q) yr[q] = left(sr, rc[q]) ? 0 : 1;
        std::array<Leaf4, 4> b{};
        for (std::size_t k = 0; k < 4; ++k) {
          for (std::size_t x = 0; x < 2; ++x)
            for (std::size_t y = 0; y < 2; ++y) {
              b[k][x][y] = left_block[k][x][y];
              b[k][2 + x][2 + y] = right_block[sr][k][x][y];
            }
          for (std::size_t x = 0; x < 2; ++x)
            for (std::size_t q = 0; q < nr; ++q) {
              b[k][x][2 + yr[q]] += from_left[k][x][q];
              b[k][2 + yr[q]][x] += to_left[k][x][q];
            }
        }
        const std::array<double, 4> count{left_count[0], left_count[1], right_count[sr][0], right_count[sr][1]};
        labelings_pair(((r * s_ + sl) * s_ + sr) * 16, b, count, 4, visit);
      }
    }
  }

  const CellAggregate& cells_;
  const ThresholdGrid& grid_;
  int depth_;
  WelfareSpec spec_;
  std::size_t m_;
  std::size_t s_;
  std::vector<std::uint8_t> goes_left_;
};

bool better_tie(const Candidate& a, const Candidate& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (a.treated != b.treated) return a.treated < b.treated;
  return a.index < b.index;
}

}  // namespace

OptimizationResult optimize_policy(const CellAggregate& cells, const ThresholdGrid& grid, int depth,
                                   const WelfareSpec& spec) {
  const Evaluator eval(cells, grid, depth, spec);
  const std::size_t tasks = eval.tasks();

  std::vector<double> task_max(tasks, -std::numeric_limits<double>::infinity());
  std::vector<std::uint64_t> task_count(tasks, 0);
  parallel_for(tasks, [&](std::size_t t) {
    eval.run(t, [&](std::uint64_t, double w, double, double) {
      if (!std::isfinite(w)) throw NumericError("non-finite welfare during policy search");
      task_max[t] = std::max(task_max[t], w);
      ++task_count[t];
    });
  });
  const double best = *std::max_element(task_max.begin(), task_max.end());
  const double floor = best - 1e-12 * std::max(1.0, std::abs(best));

  std::vector<Candidate> task_best(tasks);
  parallel_for(tasks, [&](std::size_t t) {
    eval.run(t, [&](std::uint64_t index, double w, double mean, double treated) {
      if (w < floor) return;
      Candidate c{w, mean, treated, index, true};
      if (better_tie(c, task_best[t])) task_best[t] = c;
    });
  });
  Candidate winner;
  for (const auto& c : task_best)
    if (better_tie(c, winner)) winner = c;

  OptimizationResult out;
  out.tree = TreeEnumerator(grid, depth).at(winner.index);
  out.welfare = winner.welfare;
  out.mean = winner.mean;
  out.treated = winner.treated;
  out.index = winner.index;
  for (auto c : task_count) out.evaluated += c;
  return out;
}

OptimizationResult optimize_policy(const ScoreSet& scores, const WelfareSpec& spec, const ThresholdGrid& grid,
                                   const Eigen::MatrixXd& x, int depth) {
  return optimize_policy(aggregate_scores(scores, grid, x), grid, depth, spec);
}

WelfareEstimate cell_welfare(const CellAggregate& cells, const ThresholdGrid& grid, const PolicyTree& tree,
                             const WelfareSpec& spec) {
  if (cells.slots != grid.slots()) throw ArgumentError("cell aggregate does not match the grid");
  auto slot_of = [&](std::size_t feature) {
    for (std::size_t s = 0; s < grid.slots(); ++s)
      if (grid.feature(s) == feature) return s;
    throw ArgumentError("tree splits on a feature outside the grid");
  };
  const std::size_t m = cells.cells();
  std::vector<std::uint8_t> act(m);
  const std::size_t splits = tree.depth() == 0 ? 0 : (tree.depth() == 1 ? 1 : 3);
  std::array<std::size_t, 3> slot{};
  for (std::size_t k = 0; k < splits; ++k) slot[k] = slot_of(tree.split(k).feature);
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t leaf = 0;
    if (tree.depth() >= 1) {
      const bool l = cells.bin(c, slot[0]) <= tree.split(0).cut;
      leaf = l ? 0 : 1;
      if (tree.depth() == 2) {
        const std::size_t k = l ? 1 : 2;
        leaf = (l ? 0 : 2) + (cells.bin(c, slot[k]) <= tree.split(k).cut ? 0 : 1);
      }
    }
    act[c] = tree.treats(leaf) ? 1 : 0;
  }
  double total = 0.0;
  if (!cells.pair) {
    for (std::size_t c = 0; c < m; ++c) total += act[c] ? cells.treated_sum[c] : cells.control_sum[c];
  } else {
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t d = 0; d < m; ++d)
        total += cells.pair_sum[static_cast<std::size_t>(2 * act[c] + act[d])][c * m + d];
  }
  WelfareEstimate w;
  w.mean = total / cells.normalizer;
  w.value = spec.family == Family::KendallTau ? -std::abs(w.mean - spec.target) : w.mean;
  return w;
}

}  // namespace orthopolicy
