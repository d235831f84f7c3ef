#include <doctest.h>

#include <cmath>

#include "gramridge/sim.hpp"
#include "gramridge/rng.hpp"
#include "oracles.hpp"

using namespace gramridge;

TEST_CASE("simulation is bit-reproducible given the seed") {
  SimSpec spec;
  spec.n = 20;
  spec.block_cols = {6, 4};
  spec.family = Family::cox;
  spec.true_lambdas = Vector::Constant(2, 10.0);
  spec.censoring_rate = 0.3;
  spec.seed = 123;
  const SimData a = simulate(spec);
  const SimData b = simulate(spec);
  CHECK((a.design.block(0) - b.design.block(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.beta_true - b.beta_true).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.response.time() - b.response.time()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.response.event() - b.response.event()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a huge penalty shrinks the truth to zero and labels to coin flips") {
  SimSpec spec;
  spec.n = 4000;
  spec.block_cols = {5};
  spec.family = Family::logistic;
  spec.true_lambdas = Vector::Constant(1, 1e12);
  spec.seed = 5;
  const SimData d = simulate(spec);
  CHECK(d.beta_true.cwiseAbs().maxCoeff() <= 1e-5);
  const double mean = d.response.y().mean();
  CHECK(mean > 0.45);
  CHECK(mean < 0.55);
}

TEST_CASE("coefficient variance follows one over lambda") {
  SimSpec spec;
  spec.n = 3;
  spec.block_cols = {2000};
  spec.family = Family::linear;
  spec.true_lambdas = Vector::Constant(1, 25.0);
  spec.seed = 9;
  const SimData d = simulate(spec);
  const double var =
      d.beta_true.squaredNorm() / static_cast<double>(d.beta_true.size());
  CHECK(var == doctest::Approx(1.0 / 25.0).epsilon(0.2));
}

TEST_CASE("censoring rate is honored in expectation") {
  SimSpec spec;
  spec.n = 5000;
  spec.block_cols = {3};
  spec.family = Family::cox;
  spec.true_lambdas = Vector::Constant(1, 50.0);
  spec.censoring_rate = 0.4;
  spec.seed = 77;
  const SimData d = simulate(spec);
  const double censored =
      1.0 - d.response.event().sum() / static_cast<double>(spec.n);
  CHECK(censored == doctest::Approx(0.4).epsilon(0.05));
}

TEST_CASE("top-k overlap counts matching index sets") {
  Vector truth(6);
  truth << 0.1, -3.0, 0.2, 2.0, -0.05, 1.0;
  SUBCASE("identical vectors overlap completely") {
    CHECK(topk_overlap(truth, truth, 3) == 3);
  }
  SUBCASE("negation is invisible to absolute ranking") {
    CHECK(topk_overlap(Vector(-truth), truth, 3) == 3);
  }
  SUBCASE("k out of range throws") {
    CHECK_THROWS_AS(topk_overlap(truth, truth, 7), ConfigError);
    CHECK_THROWS_AS(topk_overlap(truth, truth, 0), ConfigError);
  }
  SUBCASE("disjoint supports overlap nowhere") {
    Vector other(6);
    other << 5.0, 0.0, 4.0, 0.0, 3.0, 0.0;
    Vector target(6);
    target << 0.0, 5.0, 0.0, 4.0, 0.0, 3.0;
    CHECK(topk_overlap(other, target, 3) == 0);
  }
}

TEST_CASE("random rankings match the hypergeometric null") {
  const Index p = 200, k = 20;
  Rng rng(2024);
  Vector truth(p);
  for (Index j = 0; j < p; ++j) truth(j) = rng.normal();
  double total = 0.0;
  const int draws = 100;
  for (int rep = 0; rep < draws; ++rep) {
    Vector hat(p);
    for (Index j = 0; j < p; ++j) hat(j) = rng.normal();
    total += topk_overlap(hat, truth, k);
  }
  const double mean = total / draws;
  const double expect = static_cast<double>(k) * k / p;
  const double kf = static_cast<double>(k), pf = static_cast<double>(p);
  const double var_one =
      kf * (kf / pf) * (1.0 - kf / pf) * (pf - kf) / (pf - 1.0);
  const double se_mean = std::sqrt(var_one / draws);
  CHECK(std::abs(mean - expect) <= 3.0 * se_mean);
}
