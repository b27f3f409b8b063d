#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "orthopolicy/error.hpp"
#include "orthopolicy/policy.hpp"
#include "orthopolicy/scores.hpp"
#include "orthopolicy/ustat.hpp"

using namespace orthopolicy;

namespace {

struct Known {
  std::vector<double> g0, g1, e;
};

Known arbitrary_nuisances(const Dataset& data, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Known k;
  for (std::size_t i = 0; i < data.n(); ++i) {
    k.g0.push_back(2.0 + 2.0 * u(rng));
    k.g1.push_back(2.5 + 2.0 * u(rng));
    k.e.push_back(0.2 + 0.6 * u(rng));
  }
  return k;
}

double pmin(double a, double b) { return a < b ? a : b; }

}  // namespace

TEST_CASE("additive scores follow the AIPW formula") {
  const auto data = testutil::toy_data(40, 1);
  const auto k = arbitrary_nuisances(data, 2);
  const auto fits = NuisanceFits::known(k.g0, k.g1, k.e);
  const auto dr = linear_scores_additive(data, fits, Identification::DR);
  const auto dm = linear_scores_additive(data, fits, Identification::DM);
  const auto ipw = linear_scores_additive(data, fits, Identification::IPW);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double y = data.outcome()[i];
    const int d = data.treatment()[i];
    CHECK(dr.treated[i] == doctest::Approx(k.g1[i] + d * (y - k.g1[i]) / k.e[i]));
    CHECK(dr.control[i] == doctest::Approx(k.g0[i] + (1 - d) * (y - k.g0[i]) / (1 - k.e[i])));
    CHECK(dm.treated[i] == k.g1[i]);
    CHECK(ipw.control[i] == doctest::Approx((1 - d) * y / (1 - k.e[i])));
  }
}

TEST_CASE("atkinson scores correct the utility of the fitted mean") {
  const auto data = testutil::toy_data(30, 4);
  const auto k = arbitrary_nuisances(data, 5);
  const auto fits = NuisanceFits::known(k.g0, k.g1, k.e);
  const double theta = 0.5;
  const auto s = linear_scores_atkinson_iop(data, fits, theta, Identification::DR);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double y = data.outcome()[i];
    const int d = data.treatment()[i];
    const double u1 = std::pow(k.g1[i], 1 - theta) / (1 - theta);
    CHECK(s.treated[i] == doctest::Approx(u1 + std::pow(k.g1[i], -theta) * d * (y - k.g1[i]) / k.e[i]));
  }
}

TEST_CASE("gini pair scores and the welfare average") {
  const auto data = testutil::toy_data(25, 6);
  const auto k = arbitrary_nuisances(data, 7);
  auto phi_fn = [&](int a, int b, std::size_t i, std::size_t j) {
    return pmin(a ? k.g1[i] : k.g0[i], b ? k.g1[j] : k.g0[j]) - 0.1;
  };
  const auto fits = NuisanceFits::known(k.g0, k.g1, k.e, std::make_shared<FunctionPhi>(data.n(), phi_fn));
  const auto scores = pair_scores_gini(data, fits, Identification::DR);
  const auto y = data.outcome();
  const auto d = data.treatment();
  const std::size_t n = data.n();
  auto p = [&](int a, std::size_t i) { return a ? k.e[i] : 1 - k.e[i]; };
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          const double dab = (d[i] == a) * (d[j] == b);
          const double want = phi_fn(a, b, i, j) + dab / (p(a, i) * p(b, j)) * (pmin(y[i], y[j]) - phi_fn(a, b, i, j));
          CHECK(scores.at(a, b, i, j) == doctest::Approx(want).epsilon(1e-12));
        }

  std::vector<std::uint8_t> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = i % 3 == 0;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) total += scores.at(pi[i], pi[j], i, j);
  WelfareSpec spec;
  spec.family = Family::Gini;
  const auto w = estimate_welfare(ScoreSet(scores), pi, spec);
  CHECK(w.value == doctest::Approx(total / (n * (n - 1) / 2.0)).epsilon(1e-12));
}

TEST_CASE("lazy and dense pair storage agree") {
  const auto data = testutil::toy_data(30, 8);
  const auto k = arbitrary_nuisances(data, 9);
  const auto fits = NuisanceFits::known(k.g0, k.g1, k.e);
  const std::size_t n = data.n();
  PairScoreSet::RowFn rows = [&](int a, int b, std::size_t i, std::span<double> out) {
    for (std::size_t j = i + 1; j < n; ++j) out[j - i - 1] = a * k.g1[i] + b * k.g0[j] + double(i) - double(j);
  };
  const PairScoreSet dense(n, rows);
  const PairScoreSet lazy(n, rows, 0);
  CHECK(dense.dense());
  CHECK(!lazy.dense());
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) CHECK(dense.at(1, 0, i, j) == lazy.at(1, 0, i, j));
  std::vector<std::uint8_t> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = i % 2;
  WelfareSpec spec;
  spec.family = Family::Gini;
  CHECK(estimate_welfare(ScoreSet(dense), pi, spec).value == estimate_welfare(ScoreSet(lazy), pi, spec).value);
}

TEST_CASE("zero residuals make DR equal DM for every family") {
  const auto base = testutil::toy_data(20, 10);
  const auto k = arbitrary_nuisances(base, 11);
  std::vector<double> y(base.n());
  for (std::size_t i = 0; i < base.n(); ++i) y[i] = base.treatment()[i] ? k.g1[i] : k.g0[i];
  const std::vector<double> x1(base.parental_outcome().begin(), base.parental_outcome().end());
  const Dataset data(y, {base.treatment().begin(), base.treatment().end()}, base.covariates(), base.covariate_names(), x1);
  // phi consistent with a noiseless outcome
  auto phi_gini = [&](int a, int b, std::size_t i, std::size_t j) {
    return pmin(a ? k.g1[i] : k.g0[i], b ? k.g1[j] : k.g0[j]);
  };
  auto phi_kendall = [&](int a, int b, std::size_t i, std::size_t j) {
    return sgn(x1[i] - x1[j]) * sgn((a ? k.g1[i] : k.g0[i]) - (b ? k.g1[j] : k.g0[j]));
  };
  for (Family f : {Family::Additive, Family::AtkinsonIop, Family::Gini, Family::IopGini, Family::KendallTau}) {
    std::shared_ptr<const PhiSource> phi;
    if (f == Family::Gini) phi = std::make_shared<FunctionPhi>(data.n(), phi_gini);
    if (f == Family::KendallTau) phi = std::make_shared<FunctionPhi>(data.n(), phi_kendall);
    const auto fits = NuisanceFits::known(k.g0, k.g1, k.e, phi);
    WelfareSpec spec;
    spec.family = f;
    spec.identification = Identification::DM;
    const auto dm = build_scores(data, fits, spec);
    spec.identification = Identification::DR;
    const auto dr = build_scores(data, fits, spec);
    std::vector<std::uint8_t> pi(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) pi[i] = data.covariates()(static_cast<Eigen::Index>(i), 0) > 0.4;
    CHECK(estimate_welfare(dm, pi, spec).mean == doctest::Approx(estimate_welfare(dr, pi, spec).mean).epsilon(1e-12));
  }
}

TEST_CASE("kendall welfare is the negative distance to the target") {
  const auto data = testutil::toy_data(20, 12);
  const auto k = arbitrary_nuisances(data, 13);
  const auto fits = NuisanceFits::known(
      k.g0, k.g1, k.e, std::make_shared<FunctionPhi>(data.n(), [](int, int, std::size_t, std::size_t) { return 0.4; }));
  WelfareSpec spec;
  spec.family = Family::KendallTau;
  spec.identification = Identification::DM;
  spec.target = 0.1;
  const auto s = build_scores(data, fits, spec);
  std::vector<std::uint8_t> pi(data.n(), 1);
  const auto w = estimate_welfare(s, pi, spec);
  CHECK(w.mean == doctest::Approx(0.4));
  CHECK(w.value == doctest::Approx(-0.3));
}

TEST_CASE("atkinson rejects non-positive outcomes") {
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 2;
  const Dataset data({1.0, -0.5, 2.0}, {0, 1, 1}, x, {"x"});
  WelfareSpec spec;
  spec.family = Family::AtkinsonIop;
  CHECK_THROWS_AS(spec.validate(data), DataError);
  spec.theta = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
