#include <cmath>
#include <random>

#include "doctest.h"
#include "orthopolicy/learners.hpp"

using namespace orthopolicy;

namespace {

Eigen::MatrixXd grid1d(std::size_t n) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i) / static_cast<double>(n - 1);
  return x;
}

}  // namespace

TEST_CASE("every learner reproduces a constant target") {
  const auto x = grid1d(50);
  const std::vector<double> y(50, 2.5);
  for (auto kind : {LearnerKind::Kernel, LearnerKind::Knn, LearnerKind::Forest}) {
    LearnerSpec spec;
    spec.kind = kind;
    const auto model = make_learner(spec)->fit(x, y);
    for (double v : model->predict(x)) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  }
}

TEST_CASE("knn averages exactly the k closest points") {
  Eigen::MatrixXd x(5, 1);
  x << 0, 1, 2, 3, 10;
  const std::vector<double> y{0, 1, 2, 3, 100};
  const auto model = NearestNeighbors(2).fit(x, y);
  Eigen::MatrixXd q(1, 1);
  q << 2.4;
  CHECK(model->predict(q)[0] == doctest::Approx(2.5));
  CHECK(NearestNeighbors::default_k(1000) == 10);
}

TEST_CASE("kernel regression is local") {
  const auto x = grid1d(400);
  std::vector<double> y(400);
  for (std::size_t i = 0; i < 400; ++i) y[i] = std::sin(3.0 * x(static_cast<Eigen::Index>(i), 0));
  const auto model = KernelRegression().fit(x, y);
  Eigen::MatrixXd q(1, 1);
  q << 0.5;
  CHECK(model->predict(q)[0] == doctest::Approx(std::sin(1.5)).epsilon(0.02));
}

TEST_CASE("forest recovers a step and is seeded") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd x(600, 2);
  std::vector<double> y(600);
  for (int i = 0; i < 600; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y[static_cast<std::size_t>(i)] = x(i, 0) > 0.5 ? 1.0 : 0.0;
  }
  LearnerSpec spec;
  spec.kind = LearnerKind::Forest;
  spec.trees = 20;
  const auto a = make_learner(spec)->fit(x, y)->predict(x);
  const auto b = make_learner(spec)->fit(x, y)->predict(x);
  CHECK(a == b);
  Eigen::MatrixXd q(2, 2);
  q << 0.2, 0.5, 0.8, 0.5;
  const auto p = make_learner(spec)->fit(x, y)->predict(q);
  CHECK(p[0] < 0.1);
  CHECK(p[1] > 0.9);
}

TEST_CASE("learner spec json round trip") {
  LearnerSpec s;
  s.kind = LearnerKind::Knn;
  s.k = 7;
  const auto t = LearnerSpec::from_json(s.to_json());
  CHECK(t.kind == LearnerKind::Knn);
  CHECK(t.k == 7);
}
