#include "doctest.h"
#include "orthopolicy/simlab.hpp"

using namespace orthopolicy;

TEST_CASE("zero noise and a pure treatment effect") {
  DgpSpec s;
  s.outcome_coefs = {0, 0};
  s.effect_base = 1;
  s.effect_jump = 0;
  s.noise_sd = 0;
  const auto smp = draw_sample(s, 200, 3);
  for (std::size_t i = 0; i < 200; ++i) CHECK(smp.data.outcome()[i] == double(smp.data.treatment()[i]));
}

TEST_CASE("randomized design treats about half") {
  const auto smp = draw_sample(DgpSpec::preset("randomized"), 10000, 4);
  const double share = double(smp.data.treated_count()) / 10000.0;
  CHECK(share > 0.48);
  CHECK(share < 0.52);
}

TEST_CASE("draws are reproducible") {
  const auto a = draw_sample(DgpSpec{}, 100, 5);
  const auto b = draw_sample(DgpSpec{}, 100, 5);
  CHECK(std::vector<double>(a.data.outcome().begin(), a.data.outcome().end()) ==
        std::vector<double>(b.data.outcome().begin(), b.data.outcome().end()));
}

TEST_CASE("reference law closed forms") {
  const DgpSpec s;
  CHECK(s.true_ate() == doctest::Approx(0.4));
  WelfareSpec w;
  const auto all = oracle_welfare(s, PolicyTree::constant(true), w, 100000);
  // E[x1 + x2 + 1 - 2 * 1(x1 > 0.7)] = 1.4
  CHECK(std::abs(all.value - 1.4) < 3 * all.se);
}

TEST_CASE("oracle welfare of a degenerate outcome is the constant") {
  DgpSpec s;
  s.outcome_intercept = 3;
  s.outcome_coefs = {0, 0};
  s.effect_base = 0;
  s.effect_jump = 0;
  s.noise_sd = 0;
  WelfareSpec w;
  w.family = Family::Gini;
  CHECK(oracle_welfare(s, PolicyTree::constant(true), w, 10000).value == doctest::Approx(3.0));
}

TEST_CASE("independent parental outcome gives zero kendall") {
  DgpSpec s;
  s.parental_gamma0 = 0;
  s.parental_coef = 0;
  WelfareSpec w;
  w.family = Family::KendallTau;
  const auto v = oracle_welfare(s, PolicyTree::constant(true), w, 20000);
  CHECK(std::abs(v.mean) <= 3 * v.se + 1e-12);
}

TEST_CASE("dgp json round trip and presets") {
  const auto s = DgpSpec::preset("kendall");
  const auto t = DgpSpec::from_json(s.to_json());
  CHECK(t.to_json() == s.to_json());
  CHECK_THROWS(DgpSpec::preset("nope"));
}

TEST_CASE("probe with a zero direction has zero slopes") {
  ProbeOptions o;
  o.welfare.family = Family::AtkinsonIop;
  o.n = 200;
  o.replications = 2;
  const auto r = orthogonality_probe(DgpSpec::preset("positive"), o, [](const double*, std::size_t) { return 0.0; });
  for (const auto& p : r.replications) {
    CHECK(p.orthogonal_slope == 0.0);
    CHECK(p.plugin_slope == 0.0);
  }
}

TEST_CASE("depth zero regret is zero for the best constant") {
  RegretOptions o;
  o.depth = 0;
  o.n_list = {200};
  o.replications = 5;
  o.mc_draws = 20000;
  o.fit.learner.kind = LearnerKind::Knn;
  const auto c = regret_experiment(DgpSpec::preset("randomized"), o);
  REQUIRE(c.rows.size() == 1);
  for (double r : c.rows[0].regrets) CHECK(r >= 0.0);
}

TEST_CASE("report mean under treat-all recovers E[Y(1)]") {
  const auto smp = draw_sample(DgpSpec{}, 2000, 12);
  CrossFitOptions opt;
  const auto rs = report_scores(smp.data, opt, Identification::DR);
  const WelfareSpec spec;
  const auto r = policy_report(smp.data, rs, ScoreSet(rs.additive), spec, PolicyTree::constant(true));
  // E[x1 + x2 + 1 - 2 * 1(x1 > 0.7)] = 1.4
  CHECK(std::abs(r.mean - 1.4) < 3 * r.welfare_se);
  CHECK(r.share_treated == 1.0);
}
