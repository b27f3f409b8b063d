#include "orthopolicy/ustat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "orthopolicy/error.hpp"
#include "orthopolicy/parallel.hpp"
#include "orthopolicy/rng.hpp"

namespace orthopolicy {

double u_statistic(std::size_t n, const PairKernel& kernel) {
  if (n < 2) throw ArgumentError("u_statistic needs n >= 2");
  std::vector<double> rows(n - 1);
  parallel_for(n - 1, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) s += kernel.eval(i, j);
    rows[i] = s;
  });
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return pairwise_sum(rows) / pairs;
}

namespace {

double block_mean(const std::vector<std::size_t>& perm, std::size_t half, const PairKernel& kernel) {
  double s = 0.0;
  for (std::size_t i = 0; i < half; ++i) s += kernel.eval(perm[i], perm[half + i]);
  return s / static_cast<double>(half);
}

std::size_t factorial_capped(std::size_t n) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

double hoeffding_estimate(std::size_t n, const PairKernel& kernel, std::size_t permutations, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("hoeffding_estimate needs n >= 2");
  if (permutations < 1) throw ArgumentError("hoeffding_estimate needs at least one permutation");
  const std::size_t half = n / 2;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  if (n <= 10 && permutations >= factorial_capped(n)) {
    std::vector<double> means;
    means.reserve(factorial_capped(n));
    do {
      means.push_back(block_mean(perm, half, kernel));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return pairwise_sum(means) / static_cast<double>(means.size());
  }

  Rng rng(derive_seed(seed, {0x40ef}));
  std::vector<double> means(permutations);
  for (std::size_t p = 0; p < permutations; ++p) {
    std::shuffle(perm.begin(), perm.end(), rng);
    means[p] = block_mean(perm, half, kernel);
  }
  return pairwise_sum(means) / static_cast<double>(permutations);
}

double sum_abs_differences(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  std::vector<double> terms(v.size());
  for (std::size_t r = 0; r < v.size(); ++r) terms[r] = (2.0 * static_cast<double>(r) - n + 1.0) * v[r];
  return pairwise_sum(terms);
}

double sum_pairwise_min(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  std::vector<double> terms(n);
  for (std::size_t r = 0; r < n; ++r) terms[r] = static_cast<double>(n - 1 - r) * v[r];
  return pairwise_sum(terms);
}

double gini_index(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw ArgumentError("gini_index needs n >= 2");
  for (double v : values) {
    if (!(v >= 0.0)) throw NumericError("gini_index requires non-negative finite values");
  }
  const double mean = pairwise_sum(values) / static_cast<double>(n);
  if (!(mean > 0.0)) throw NumericError("gini_index requires a positive mean");
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return (sum_abs_differences(values) / pairs) / (2.0 * mean);
}

IopShare iop_share(std::span<const double> fitted, std::span<const double> outcome) {
  if (fitted.size() != outcome.size()) throw ArgumentError("iop_share: length mismatch");
  IopShare s;
  s.iop = gini_index(fitted);
  const double total = gini_index(outcome);
  s.ratio = total > 0.0 ? s.iop / total : 0.0;
  return s;
}

namespace {

// Counts inversions of v while merge-sorting it.
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& buffer, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(v, buffer, lo, mid) + count_inversions(v, buffer, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      buffer[k++] = v[j++];
    } else {
      buffer[k++] = v[i++];
    }
  }
  while (i < mid) buffer[k++] = v[i++];
  while (j < hi) buffer[k++] = v[j++];
  std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(lo), buffer.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

template <class Eq>
std::int64_t tied_pairs(std::size_t n, Eq same) {
  std::int64_t ties = 0;
  std::size_t run = 1;
  for (std::size_t r = 1; r <= n; ++r) {
    if (r < n && same(r - 1, r)) {
      ++run;
    } else {
      ties += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
      run = 1;
    }
  }
  return ties;
}

}  // namespace

std::int64_t kendall_sign_sum(std::span<const double> y, std::span<const double> x) {
  if (y.size() != x.size()) throw ArgumentError("kendall_tau: length mismatch");
  const std::size_t n = y.size();
  if (n < 2) throw ArgumentError("kendall_tau needs n >= 2");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  const std::int64_t pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t ties_x = tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[order[a]] == x[order[b]]; });
  const std::int64_t ties_xy = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[order[a]] == x[order[b]] && y[order[a]] == y[order[b]];
  });
  std::vector<double> ys(n);
  for (std::size_t r = 0; r < n; ++r) ys[r] = y[order[r]];
  std::vector<double> buffer(n);
  const std::int64_t discordant = count_inversions(ys, buffer, 0, n);
  const std::int64_t ties_y = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
  // concordant - discordant, with every tied pair counted as zero
  return pairs - ties_x - ties_y + ties_xy - 2 * discordant;
}

double kendall_tau(std::span<const double> y, std::span<const double> x) {
  const auto n = static_cast<double>(y.size());
  return static_cast<double>(kendall_sign_sum(y, x)) / (0.5 * n * (n - 1.0));
}

}  // namespace orthopolicy
