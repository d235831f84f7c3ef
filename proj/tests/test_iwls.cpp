#include <doctest.h>

#include <cmath>

#include "gramridge/iwls.hpp"
#include "gramridge/numeric.hpp"
#include "gramridge/rng.hpp"
#include "oracles.hpp"

using namespace gramridge;

namespace {

struct Problem {
  BlockedDesign design;
  GramSet grams;
  PenaltyConfig penalties;
  Matrix x;
  Vector penalty_diag;
};

Problem make_problem(Rng& rng, Index n, const std::vector<Index>& widths,
                     double lam_lo = 0.5, double lam_hi = 20.0) {
  std::vector<Matrix> blocks;
  Vector lambdas(static_cast<Index>(widths.size()));
  Index p = 0;
  for (auto w : widths) p += w;
  Matrix x(n, p);
  Vector diag(p);
  Index at = 0;
  for (std::size_t b = 0; b < widths.size(); ++b) {
    blocks.push_back(oracles::random_matrix(rng, n, widths[b]));
    lambdas(static_cast<Index>(b)) = rng.uniform(lam_lo, lam_hi);
    x.middleCols(at, widths[b]) = blocks.back();
    diag.segment(at, widths[b]).setConstant(lambdas(static_cast<Index>(b)));
    at += widths[b];
  }
  BlockedDesign design(blocks);
  GramSet grams = precompute_grams(design);
  return Problem{std::move(design), std::move(grams), PenaltyConfig(lambdas),
                 std::move(x), std::move(diag)};
}

}  // namespace

TEST_CASE("linear family with zero response fits to zero in one pass") {
  Rng rng(1);
  const Problem pb = make_problem(rng, 5, {4, 3});
  const ResponseSpec r = ResponseSpec::linear(Vector::Zero(5));
  const FitState fit = fit_ridge(pb.design, pb.grams, pb.penalties, r);
  CHECK(fit.iterations == 1);
  CHECK(fit.converged);
  CHECK(fit.eta.cwiseAbs().maxCoeff() == 0.0);
  const Vector beta = recover_coefficients(fit, pb.design, pb.penalties);
  CHECK(beta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear one-pass fit equals the direct generalized ridge solution") {
  Rng rng(2);
  const Problem pb = make_problem(rng, 5, {5, 3});
  const Vector y = oracles::random_vector(rng, 5);
  const FitState fit =
      fit_ridge(pb.design, pb.grams, pb.penalties, ResponseSpec::linear(y));
  const Vector beta = recover_coefficients(fit, pb.design, pb.penalties);
  const Vector oracle = oracles::direct_ridge(pb.x, pb.penalty_diag, y);
  CHECK((beta - oracle).cwiseAbs().maxCoeff() <=
        1e-8 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
  CHECK((pb.x * beta - fit.eta).cwiseAbs().maxCoeff() <=
        1e-8 * std::max(1.0, fit.eta.cwiseAbs().maxCoeff()));
}

TEST_CASE("logistic intercept-only fit reaches the closed-form mean") {
  const Index n = 10;
  Vector y(n);
  y << 1, 0, 0, 1, 0, 0, 1, 0, 0, 0;  // mean 0.3
  const Matrix intercept = Matrix::Ones(n, 1);
  const FitState fit = iwls_fit(Matrix::Zero(n, n), &intercept,
                                ResponseSpec::logistic(y));
  CHECK(fit.converged);
  for (Index i = 0; i < n; ++i)
    CHECK(fit.eta(i) == doctest::Approx(logit(0.3)).epsilon(1e-6));
  // Weighted-mean identity for the recovered intercept.
  const double b0 = fit.beta_unpen(0);
  CHECK(b0 == doctest::Approx(fit.linearized.sum() / fit.weights.sum())
                  .epsilon(1e-8));
}

TEST_CASE("logistic fit zeroes the penalized log-likelihood gradient") {
  Rng rng(3);
  const Problem pb = make_problem(rng, 6, {5, 5}, 5.0, 5.0);
  Vector y(6);
  y << 1, 0, 1, 1, 0, 0;
  const ResponseSpec r = ResponseSpec::logistic(y);
  const FitState fit = fit_ridge(pb.design, pb.grams, pb.penalties, r);
  REQUIRE(fit.converged);
  const Vector beta = recover_coefficients(fit, pb.design, pb.penalties);
  Vector mean(6);
  for (Index i = 0; i < 6; ++i) mean(i) = oracles::expit((pb.x * beta)(i));
  const Vector grad =
      pb.x.transpose() * (y - mean) - pb.penalty_diag.cwiseProduct(beta);
  CHECK(grad.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("cox fit zeroes the penalized full-likelihood gradient") {
  Rng rng(4);
  const Problem pb = make_problem(rng, 12, {6}, 2.0, 8.0);
  Vector t(12), d(12);
  for (Index i = 0; i < 12; ++i) {
    t(i) = 0.2 + rng.uniform01() * 4.0;
    d(i) = rng.uniform01() < 0.6 ? 1.0 : 0.0;
  }
  d(0) = 1.0;
  const ResponseSpec r = ResponseSpec::cox(t, d);
  const FitState fit = fit_ridge(pb.design, pb.grams, pb.penalties, r);
  REQUIRE(fit.converged);
  const Vector beta = recover_coefficients(fit, pb.design, pb.penalties);
  const Vector eta = pb.x * beta;
  const oracles::BreslowOracle h = oracles::breslow_oracle(eta, t, d);
  Vector c(12);
  for (Index i = 0; i < 12; ++i)
    c(i) = d(i) - h.cumulative_at(t(i)) * std::exp(eta(i));
  const Vector grad = pb.x.transpose() * c - pb.penalty_diag.cwiseProduct(beta);
  CHECK(grad.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("dual IWLS reproduces the coefficient-space iterate sequence") {
  Rng rng(5);
  SUBCASE("logistic") {
    const Problem pb = make_problem(rng, 8, {6, 4}, 1.0, 6.0);
    Vector y(8);
    y << 1, 0, 1, 0, 0, 1, 1, 0;
    const ResponseSpec r = ResponseSpec::logistic(y);
    const auto oracle_etas =
        oracles::beta_space_iwls_etas(pb.x, pb.penalty_diag, r, 4);
    for (int iters = 1; iters <= 4; ++iters) {
      IwlsControls ctrl;
      ctrl.tol = 0.0;  // run exactly max_iter cycles
      ctrl.max_iter = iters;
      const FitState fit = fit_ridge(pb.design, pb.grams, pb.penalties, r, ctrl);
      CHECK((fit.eta - oracle_etas[static_cast<std::size_t>(iters - 1)])
                .cwiseAbs()
                .maxCoeff() <= 1e-8);
    }
  }
  SUBCASE("cox") {
    const Problem pb = make_problem(rng, 10, {7}, 2.0, 8.0);
    Vector t(10), d(10);
    for (Index i = 0; i < 10; ++i) {
      t(i) = 0.2 + rng.uniform01() * 3.0;
      d(i) = i % 2 == 0 ? 1.0 : 0.0;
    }
    const ResponseSpec r = ResponseSpec::cox(t, d);
    const auto oracle_etas =
        oracles::beta_space_iwls_etas(pb.x, pb.penalty_diag, r, 3);
    for (int iters = 1; iters <= 3; ++iters) {
      IwlsControls ctrl;
      ctrl.tol = 0.0;
      ctrl.max_iter = iters;
      const FitState fit = fit_ridge(pb.design, pb.grams, pb.penalties, r, ctrl);
      CHECK((fit.eta - oracle_etas[static_cast<std::size_t>(iters - 1)])
                .cwiseAbs()
                .maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("penalized log-likelihood never decreases across accepted steps") {
  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const Problem pb = make_problem(rng, 9, {5, 4}, 0.5, 10.0);
    Vector y(9);
    for (Index i = 0; i < 9; ++i) y(i) = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    const FitState fit =
        fit_ridge(pb.design, pb.grams, pb.penalties, ResponseSpec::logistic(y));
    for (std::size_t i = 1; i < fit.objective_history.size(); ++i)
      CHECK(fit.objective_history[i] >= fit.objective_history[i - 1] - 1e-10);
  }
}

TEST_CASE("constant offsets flow through the mean map") {
  Rng rng(7);
  const Problem pb = make_problem(rng, 7, {5});
  Vector y(7);
  y << 1, 0, 1, 0, 1, 1, 0;
  const Vector offset = Vector::Constant(7, 0.4);
  const FitState fit = fit_ridge(pb.design, pb.grams, pb.penalties,
                                 ResponseSpec::logistic(y, offset));
  REQUIRE(fit.converged);
  // Stationarity of the offset-aware objective.
  const Vector beta = recover_coefficients(fit, pb.design, pb.penalties);
  Vector mean(7);
  for (Index i = 0; i < 7; ++i)
    mean(i) = oracles::expit(offset(i) + (pb.x * beta)(i));
  const Vector grad = pb.x.transpose() * (y - mean) -
                      pb.penalty_diag.cwiseProduct(beta);
  CHECK(grad.cwiseAbs().maxCoeff() <= 1e-6);

  // Linear family: offset is residualized before the one-pass solve.
  const Vector ylin = oracles::random_vector(rng, 7);
  const FitState flin = fit_ridge(pb.design, pb.grams, pb.penalties,
                                  ResponseSpec::linear(ylin, offset));
  const FitState fshift = fit_ridge(pb.design, pb.grams, pb.penalties,
                                    ResponseSpec::linear(ylin - offset));
  CHECK((flin.eta - fshift.eta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("coefficient recovery refuses a non-converged fit") {
  Rng rng(8);
  const Problem pb = make_problem(rng, 8, {40}, 1e-6, 1e-6);
  Vector y(8);
  y << 1, 0, 1, 0, 1, 0, 1, 0;
  IwlsControls ctrl;
  ctrl.max_iter = 1;
  ctrl.tol = 1e-14;
  const FitState fit =
      fit_ridge(pb.design, pb.grams, pb.penalties, ResponseSpec::logistic(y), ctrl);
  CHECK_FALSE(fit.converged);
  CHECK_THROWS_AS(recover_coefficients(fit, pb.design, pb.penalties),
                  NumericError);
}

TEST_CASE("paired fits recover coefficients consistent with the fitted eta") {
  Rng rng(9);
  const Index n = 6, p = 4;
  const Matrix xa = oracles::random_matrix(rng, n, p);
  const Matrix xb = oracles::random_matrix(rng, n, p);
  const BlockedDesign design({xa, xb}, {}, std::nullopt, PairedSpec{0, 1});
  const GramSet grams = precompute_grams(design);
  const PairedTriple triple =
      paired_param_transform(2.0, 3.0, 0.8, PairedParametrization::additive);
  Vector l(2);
  l << triple.lambda1, triple.lambda2;
  const PenaltyConfig pc(l, {}, triple, PairedSpec{0, 1});
  const Vector y = oracles::random_vector(rng, n);
  const FitState fit = fit_ridge(design, grams, pc, ResponseSpec::linear(y));
  const Vector beta = recover_coefficients(fit, design, pc);
  Matrix x(n, 2 * p);
  x << xa, xb;
  CHECK((x * beta - fit.eta).cwiseAbs().maxCoeff() <=
        1e-8 * std::max(1.0, fit.eta.cwiseAbs().maxCoeff()));

  // Direct oracle with the interleaved block penalty.
  Matrix x_int(n, 2 * p);
  Matrix pen = Matrix::Zero(2 * p, 2 * p);
  for (Index j = 0; j < p; ++j) {
    x_int.col(2 * j) = xa.col(j);
    x_int.col(2 * j + 1) = xb.col(j);
    pen.block(2 * j, 2 * j, 2, 2) = pc.lambda_s();
  }
  const Vector beta_int =
      (x_int.transpose() * x_int + pen).inverse() * x_int.transpose() * y;
  for (Index j = 0; j < p; ++j) {
    CHECK(beta(j) == doctest::Approx(beta_int(2 * j)).epsilon(1e-7));
    CHECK(beta(p + j) == doctest::Approx(beta_int(2 * j + 1)).epsilon(1e-7));
  }
}

TEST_CASE("prediction reproduces training rows and matches coefficients") {
  Rng rng(10);
  const Index n = 6;
  const Matrix x1 = Matrix::Ones(n, 1);
  const Matrix xa = oracles::random_matrix(rng, n, 5);
  const Matrix xb = oracles::random_matrix(rng, n, 3);
  const BlockedDesign design({xa, xb}, {}, x1);
  const GramSet grams = precompute_grams(design);
  Vector l(2);
  l << 2.0, 5.0;
  const PenaltyConfig pc(l);
  const Vector y = oracles::random_vector(rng, n);
  const FitState fit = fit_ridge(design, grams, pc, ResponseSpec::linear(y));

  SUBCASE("training rows reproduce the fitted eta") {
    const Vector eta_new =
        predict_new(fit, design, pc, {xa, xb}, &x1);
    CHECK((eta_new - fit.eta).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("fresh rows match the coefficient path") {
    const Matrix na = oracles::random_matrix(rng, 3, 5);
    const Matrix nb = oracles::random_matrix(rng, 3, 3);
    const Matrix n1 = Matrix::Ones(3, 1);
    const Vector eta_new = predict_new(fit, design, pc, {na, nb}, &n1);
    const Vector beta = recover_coefficients(fit, design, pc);
    Matrix xnew(3, 1 + 5 + 3);
    xnew << n1, na, nb;
    CHECK((eta_new - xnew * beta).cwiseAbs().maxCoeff() <=
          1e-8 * std::max(1.0, eta_new.cwiseAbs().maxCoeff()));
  }
  SUBCASE("zero blocks with no unpenalized part predict zero") {
    const BlockedDesign d2({xa, xb});
    const FitState f2 = fit_ridge(d2, precompute_grams(d2), pc,
                                  ResponseSpec::linear(y));
    const Vector eta_new = predict_new(f2, d2, pc,
                                       {Matrix::Zero(2, 5), Matrix::Zero(2, 3)});
    CHECK(eta_new.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("column mismatch is an error") {
    CHECK_THROWS_AS(
        predict_new(fit, design, pc,
                    {oracles::random_matrix(rng, 2, 4),
                     oracles::random_matrix(rng, 2, 3)},
                    &x1),
        ConfigError);
  }
}
