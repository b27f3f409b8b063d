#include "doctest.h"
#include "orthopolicy/commands.hpp"
#include "orthopolicy/error.hpp"

using namespace orthopolicy;
using nlohmann::json;

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(RunConfig::from_json({{"famly", "gini"}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"depth", 3}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"theta", 0.0}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"family", "utilitarian"}}), ConfigError);
}

TEST_CASE("config hash ignores threads and output path") {
  const auto a = RunConfig::from_json({{"dgp", "reference"}, {"threads", 1}});
  const auto b = RunConfig::from_json({{"dgp", "reference"}, {"threads", 8}, {"out", "x.jsonl"}});
  const auto c = RunConfig::from_json({{"dgp", "reference"}, {"seed", 2}});
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
}

TEST_CASE("report embeds the resolved config") {
  const auto cfg = RunConfig::from_json({{"dgp", "reference"}, {"n", 300}, {"learner", "knn"}});
  const auto out = cmd_report(cfg);
  REQUIRE(out.records.size() >= 2);
  CHECK(out.records[0]["config"] == cfg.to_json());
  CHECK(out.records[0]["config_hash"] == cfg.hash());
  CHECK(out.records[1]["gini"].is_null());
}

TEST_CASE("report on a degenerate outcome") {
  json dgp = DgpSpec::preset("reference").to_json();
  dgp["outcome_intercept"] = 2.0;
  dgp["outcome_coefs"] = {0.0, 0.0};
  dgp["effect_base"] = 0.0;
  dgp["effect_jump"] = 0.0;
  dgp["noise_sd"] = 0.0;
  const auto out = cmd_report(RunConfig::from_json({{"dgp", dgp}, {"n", 200}}));
  const auto& r = out.records[1];
  CHECK(r["gini"].get<double>() == 0.0);
  CHECK(r["iop"].get<double>() == doctest::Approx(0.0));
  CHECK(r["ate"].get<double>() == doctest::Approx(0.0));
}

TEST_CASE("optimize compares against the constant rules") {
  for (const char* family : {"additive", "kendall_tau"}) {
    const auto cfg = RunConfig::from_json(
        {{"dgp", "reference"}, {"n", 200}, {"learner", "knn"}, {"family", family}, {"grid", "quantiles:4"}});
    const auto out = cmd_optimize(cfg);
    std::map<std::string, double> w;
    for (const auto& r : out.records)
      if (r["record"] == "policy") w[r["policy"].get<std::string>()] = r["welfare"].get<double>();
    REQUIRE(w.size() == 3);
    CHECK(w["optimal"] >= std::max(w["treat-none"], w["treat-all"]) - 1e-12);
    if (std::string(family) == "kendall_tau") CHECK(w["optimal"] <= 0.0);
    CHECK(out.table.find("CATE=") != std::string::npos);
  }
}

TEST_CASE("simulate emits one row per n") {
  const auto cfg = RunConfig::from_json({{"dgp", "reference"},
                                         {"n_list", {40, 80}},
                                         {"reps", 1},
                                         {"mc_draws", 2000},
                                         {"learner", "knn"},
                                         {"depth", 1}});
  const auto out = cmd_simulate(cfg);
  int rows = 0;
  for (const auto& r : out.records) rows += r["record"] == "regret";
  CHECK(rows == 2);
  CHECK(cmd_simulate(cfg).jsonl() == out.jsonl());
}
