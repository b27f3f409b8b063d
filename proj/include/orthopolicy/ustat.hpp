#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace orthopolicy {

/// Arity-2 kernel over unit indices. Hoeffding averaging targets the
/// symmetrised kernel, so it only matches u_statistic for symmetric kernels.
struct PairKernel {
  std::function<double(std::size_t, std::size_t)> eval;
  bool symmetric = true;
};

/// Mean of the kernel over all i < j.
double u_statistic(std::size_t n, const PairKernel& kernel);

/// Average over permutations of the floor(n/2)-block mean of independent pairs
/// (Hoeffding's sum-of-i.i.d. representation). When `permutations` >= n! and
/// n <= 10 every permutation is enumerated and the result equals u_statistic
/// for symmetric kernels; otherwise permutations are sampled with `seed`.
double hoeffding_estimate(std::size_t n, const PairKernel& kernel, std::size_t permutations, std::uint64_t seed);

/// E|Y_i - Y_j| / E[Y_i + Y_j] in U-statistic form. Requires values >= 0 and a
/// positive mean.
double gini_index(std::span<const double> values);

/// Sum over i < j of |y_i - y_j|, via sorting.
double sum_abs_differences(std::span<const double> values);

/// Sum over i < j of min(y_i, y_j), via sorting.
double sum_pairwise_min(std::span<const double> values);

struct IopShare {
  double iop = 0.0;
  double ratio = 0.0;
};

/// IOp = Gini of the fitted circumstance predictions; ratio = IOp / Gini(Y).
IopShare iop_share(std::span<const double> fitted, std::span<const double> outcome);

/// Sum over i < j of sgn(y_i - y_j) sgn(x_i - x_j), exact integer count
/// (Knight's O(n log n) merge-sort algorithm; ties contribute 0).
std::int64_t kendall_sign_sum(std::span<const double> y, std::span<const double> x);

/// Kendall's tau-a with sgn(0) = 0 and no tie correction.
double kendall_tau(std::span<const double> y, std::span<const double> x);

inline double sgn(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace orthopolicy
