#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "orthopolicy/data.hpp"
#include "orthopolicy/error.hpp"
#include "orthopolicy/folds.hpp"

using namespace orthopolicy;

TEST_CASE("dataset rejects a non-binary treatment") {
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 2;
  CHECK_THROWS_AS(Dataset({1, 2, 3}, {0, 2, 1}, x, {"x"}), DataError);
  CHECK_THROWS_AS(Dataset({1, 2}, {0, 1, 1}, x, {"x"}), DataError);
}

TEST_CASE("loading drops incomplete rows and counts them") {
  const auto path = std::filesystem::temp_directory_path() / "orthopolicy_load_test.csv";
  {
    std::ofstream f(path);
    f << "y,d,age,pinc\n1.5,1,30,2\n2.0,0,,3\n3.5,0,40,NA\n0.5,1,50,1\n";
  }
  ColumnMapping m;
  m.outcome = "y";
  m.treatment = "d";
  m.covariates = {"age"};
  m.parental_outcome = "pinc";
  const auto loaded = load_dataset(path, m);
  CHECK(loaded.dropped_rows == 2);
  CHECK(loaded.data.n() == 2);
  CHECK(loaded.data.outcome()[1] == 0.5);
  CHECK(loaded.data.parental_outcome()[0] == 2.0);
  m.covariates = {"missing"};
  CHECK_THROWS_AS(load_dataset(path, m), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("unit folds are balanced and seeded") {
  const auto a = make_unit_folds(103, 5, 9);
  const auto b = make_unit_folds(103, 5, 9);
  CHECK(a.group_labels() == b.group_labels());
  for (std::size_t g = 0; g < 5; ++g) {
    CHECK(a.members(g).size() >= 20);
    CHECK(a.members(g).size() <= 21);
  }
  CHECK_THROWS_AS(make_unit_folds(3, 5, 1), ArgumentError);
}

TEST_CASE("pair folds cover every pair once and train on outside units") {
  const auto units = make_unit_folds(40, 4, 2);
  const auto pf = make_pair_folds(units);
  CHECK(pf.fold_count() == 4 + 6);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t f = 0; f < pf.fold_count(); ++f) {
    const auto train = pf.training_units(f);
    const std::set<std::size_t> train_set(train.begin(), train.end());
    for (auto [i, j] : pf.pairs(f)) {
      CHECK(i < j);
      CHECK(pf.fold_of_pair(i, j) == f);
      CHECK(seen.insert({i, j}).second);
      CHECK(!train_set.count(i));
      CHECK(!train_set.count(j));
    }
  }
  CHECK(seen.size() == 40 * 39 / 2);
}
