#include <doctest.h>

#include <algorithm>

#include "gramridge/folds.hpp"
#include "gramridge/rng.hpp"
#include "oracles.hpp"

using namespace gramridge;

TEST_CASE("n = k gives a leave-one-out permutation") {
  Vector y(4);
  y << 0.1, 0.2, 0.3, 0.4;
  const FoldPlan plan = make_folds(ResponseSpec::linear(y), 4, 1, 11);
  std::vector<int> folds = plan.assignments[0];
  std::sort(folds.begin(), folds.end());
  for (int f = 0; f < 4; ++f) CHECK(folds[static_cast<std::size_t>(f)] == f);
}

TEST_CASE("balanced binary labels land one per fold") {
  Vector y(10);
  y << 1, 1, 1, 1, 1, 0, 0, 0, 0, 0;
  const FoldPlan plan = make_folds(ResponseSpec::logistic(y), 5, 1, 3);
  for (int f = 0; f < 5; ++f) {
    const IndexList out = plan.out_indices(0, f);
    REQUIRE(out.size() == 2);
    CHECK(y(out[0]) + y(out[1]) == 1.0);  // one of each label
  }
}

TEST_CASE("cox folds spread events evenly") {
  Vector t(9), d(9);
  for (Index i = 0; i < 9; ++i) {
    t(i) = 1.0 + static_cast<double>(i);
    d(i) = i < 3 ? 1.0 : 0.0;
  }
  const FoldPlan plan = make_folds(ResponseSpec::cox(t, d), 3, 1, 7);
  for (int f = 0; f < 3; ++f) {
    const IndexList out = plan.out_indices(0, f);
    double events = 0.0;
    for (Index i : out) events += d(i);
    CHECK(events == 1.0);
    CHECK(out.size() == 3);
  }
}

TEST_CASE("fold sizes differ by at most one") {
  Rng rng(5);
  Vector y(23);
  for (Index i = 0; i < 23; ++i) y(i) = rng.uniform01() < 0.3 ? 1.0 : 0.0;
  const FoldPlan plan = make_folds(ResponseSpec::logistic(y), 4, 3, 19);
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<int> counts(4, 0);
    for (int f : plan.assignments[static_cast<std::size_t>(rep)]) ++counts[static_cast<std::size_t>(f)];
    const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*mx - *mn <= 1);
  }
}

TEST_CASE("plans are deterministic given the seed") {
  Vector y(12);
  for (Index i = 0; i < 12; ++i) y(i) = i % 3 == 0 ? 1.0 : 0.0;
  const ResponseSpec r = ResponseSpec::logistic(y);
  const FoldPlan a = make_folds(r, 4, 2, 99);
  const FoldPlan b = make_folds(r, 4, 2, 99);
  CHECK(a.assignments == b.assignments);
  const FoldPlan c = make_folds(r, 4, 2, 100);
  CHECK(a.assignments != c.assignments);
}

TEST_CASE("invalid fold counts throw") {
  Vector y(3);
  y << 1, 2, 3;
  CHECK_THROWS_AS(make_folds(ResponseSpec::linear(y), 4, 1, 1), ConfigError);
  CHECK_THROWS_AS(make_folds(ResponseSpec::linear(y), 1, 1, 1), ConfigError);
}

TEST_CASE("a stratum smaller than the fold count warns") {
  Vector y(8);
  y << 1, 0, 0, 0, 0, 0, 0, 0;
  const FoldPlan plan = make_folds(ResponseSpec::logistic(y), 4, 1, 2);
  CHECK_FALSE(plan.warnings.empty());
}
