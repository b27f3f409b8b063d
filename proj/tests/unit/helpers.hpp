#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "orthopolicy/data.hpp"

namespace testutil {

// Small random dataset: X uniform, D Bernoulli(0.3 + 0.4 x0), Y = x0 + x1 + D + noise.
inline orthopolicy::Dataset toy_data(std::size_t n, unsigned seed, bool positive = true, bool parental = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 0.3);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  std::vector<double> y(n), x1(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = u(rng);
    x(r, 1) = u(rng);
    d[i] = u(rng) < 0.3 + 0.4 * x(r, 0);
    y[i] = (positive ? 2.0 : 0.0) + x(r, 0) + x(r, 1) + d[i] + z(rng);
    x1[i] = x(r, 0) + z(rng);
  }
  std::optional<std::vector<double>> par;
  if (parental) par = x1;
  return orthopolicy::Dataset(y, d, x, {"a", "b"}, par);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace testutil
