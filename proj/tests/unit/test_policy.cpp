#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "orthopolicy/error.hpp"
#include "orthopolicy/policy.hpp"

using namespace orthopolicy;

namespace {

LinearScoreSet random_linear(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  LinearScoreSet s;
  for (std::size_t i = 0; i < n; ++i) {
    s.treated.push_back(z(rng));
    s.control.push_back(z(rng));
  }
  return s;
}

PairScoreSet random_pairs(std::size_t n, unsigned seed) {
  std::vector<double> v(4 * n * n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  for (auto& x : v) x = z(rng);
  return PairScoreSet(n, [v, n](int a, int b, std::size_t i, std::span<double> out) {
    for (std::size_t j = i + 1; j < n; ++j) out[j - i - 1] = v[((2 * a + b) * n + i) * n + j];
  });
}

Eigen::MatrixXd random_x(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = u(rng), x(i, 1) = u(rng);
  return x;
}

}  // namespace

TEST_CASE("grid specs parse") {
  CHECK(GridSpec::parse("deciles").kind == GridKind::Deciles);
  CHECK(GridSpec::parse("quantiles:4").quantiles == 4);
  CHECK(GridSpec::parse("all").kind == GridKind::All);
  CHECK_THROWS(GridSpec::parse("thirds"));
}

TEST_CASE("decile grid drops the maximum and bins by x <= cut") {
  Eigen::MatrixXd x(100, 1);
  for (int i = 0; i < 100; ++i) x(i, 0) = i;
  const auto g = ThresholdGrid::from_data(x, {}, GridSpec{});
  CHECK(g.cuts(0).size() == 9);
  for (double c : g.cuts(0)) CHECK(c < 99);
  CHECK(g.bin(0, g.cuts(0)[0]) == 0);
  CHECK(g.bin(0, g.cuts(0)[0] + 1e-9) == 1);
  CHECK(g.bin(0, 1e9) == 9);
  Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(10, 1);
  CHECK_THROWS_AS(ThresholdGrid::from_data(flat, {}, GridSpec{}), ArgumentError);
}

TEST_CASE("tree routing") {
  const Split root{0, 0, 0.5}, left{1, 0, 0.3}, right{1, 1, 0.7};
  const auto t = PolicyTree::two_level(root, left, right, {0, 1, 1, 0});
  Eigen::RowVector2d p;
  p << 0.2, 0.4;
  CHECK(t.leaf_of(p) == 1);
  p << 0.9, 0.8;
  CHECK(t.leaf_of(p) == 3);
  CHECK(t.treats(1));
  CHECK(!t.treats(3));
}

TEST_CASE("enumeration counts and order") {
  const ThresholdGrid g({0, 1}, {{0.2, 0.5, 0.8}, {0.3, 0.6, 0.9}});
  CHECK(TreeEnumerator(g, 0).count() == 2);
  CHECK(TreeEnumerator(g, 1).count() == 6 * 4);
  CHECK(TreeEnumerator(g, 2).count() == 6 * 6 * 6 * 16);
  std::vector<std::int64_t> prev;
  TreeEnumerator(g, 2).for_each([&](std::uint64_t, const PolicyTree& t) {
    const auto e = t.encoding();
    CHECK(prev < e);
    prev = e;
  });
}

TEST_CASE("optimizer matches brute force enumeration") {
  const std::size_t n = 40;
  const auto x = random_x(n, 1);
  const ThresholdGrid g({0, 1}, {{0.25, 0.5, 0.75}, {0.3, 0.6, 0.9}});
  for (unsigned seed = 0; seed < 4; ++seed) {
    for (bool pair : {false, true}) {
      const ScoreSet s = pair ? ScoreSet(random_pairs(n, seed)) : ScoreSet(random_linear(n, seed));
      WelfareSpec spec;
      spec.family = pair ? Family::Gini : Family::Additive;
      for (int depth = 0; depth <= 2; ++depth) {
        double best = -1e300;
        TreeEnumerator(g, depth).for_each([&](std::uint64_t, const PolicyTree& t) {
          best = std::max(best, estimate_welfare(s, t, x, spec).value);
        });
        const auto r = optimize_policy(s, spec, g, x, depth);
        CHECK(r.welfare == doctest::Approx(best).epsilon(1e-12));
        CHECK(estimate_welfare(s, r.tree, x, spec).value == doctest::Approx(best).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("zero scores tie-break to treating nobody") {
  LinearScoreSet s;
  s.treated.assign(30, 0.0);
  s.control.assign(30, 0.0);
  const auto x = random_x(30, 2);
  const ThresholdGrid g({0}, {{0.5}});
  WelfareSpec spec;
  const auto r = optimize_policy(ScoreSet(s), spec, g, x, 2);
  CHECK(r.index == 0);
  CHECK(r.treated == 0.0);
}

TEST_CASE("scores favouring treatment select treat-all") {
  auto s = random_linear(30, 3);
  for (std::size_t i = 0; i < s.n(); ++i) s.treated[i] = s.control[i] + 1.0;
  const auto x = random_x(30, 4);
  const ThresholdGrid g({0, 1}, {{0.5}, {0.5}});
  const auto r = optimize_policy(ScoreSet(s), WelfareSpec{}, g, x, 2);
  for (auto a : r.tree.assign(x)) CHECK(a == 1);
}

TEST_CASE("ATE with its standard error") {
  LinearScoreSet s;
  s.treated = {2, 3, 4, 5};
  s.control = {1, 1, 1, 1};
  const auto a = estimate_ate(s);
  CHECK(a.ate == doctest::Approx(2.5));
  CHECK(a.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
}

TEST_CASE("second-moment diagnostics") {
  LinearScoreSet s;
  s.treated = {1, -1, 2};
  s.control = {0, 0, 3};
  const auto d = score_diagnostics(ScoreSet(s));
  REQUIRE(d.slices.size() == 2);
  CHECK(d.slices[0].second_moment == doctest::Approx(2.0));
  CHECK(d.slices[1].max == 3.0);
}
