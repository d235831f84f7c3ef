#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "gramridge/marglik.hpp"
#include "gramridge/rng.hpp"
#include "oracles.hpp"

using namespace gramridge;

TEST_CASE("linear-family Laplace evidence is exact") {
  Rng rng(81);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 3 + static_cast<Index>(rng.below(8));
    const Matrix x = oracles::random_matrix(rng, n, n + 5);
    const double lambda = std::exp(rng.uniform(-1, 3));
    const Matrix gamma = x * x.transpose() / lambda;
    const Vector y = oracles::random_vector(rng, n);
    const LaplaceMlState st = laplace_log_ml(gamma, ResponseSpec::linear(y));
    const double oracle = oracles::gaussian_evidence(y, gamma);
    CHECK(st.log_ml ==
          doctest::Approx(oracle).epsilon(1e-8));
  }
}

TEST_CASE("the evidence mode zeroes the eta-space penalized gradient") {
  Rng rng(89);
  for (int rep = 0; rep < 10; ++rep) {
    const Index n = 6 + static_cast<Index>(rng.below(6));
    const Matrix x = oracles::random_matrix(rng, n, n + 4);
    const Matrix gamma = x * x.transpose() / std::exp(rng.uniform(-1, 2));
    Vector y(n);
    for (Index i = 0; i < n; ++i) y(i) = rng.uniform01() < 0.5 ? 1.0 : 0.0;
    const ResponseSpec r = ResponseSpec::logistic(y);
    const LaplaceMlState st = laplace_log_ml(gamma, r);
    // Gradient of l(eta) - eta' Gamma^{-1} eta / 2 at the mode is C - m.
    const FamilyMoments mom = family_moments(st.eta_mode, r);
    CHECK((mom.centered - st.fit.mvec).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("the zero-Gamma limit returns the null-model likelihood") {
  Vector y(4);
  y << 1, 0, 0, 1;
  const ResponseSpec r = ResponseSpec::logistic(y);
  const LaplaceMlState st = laplace_log_ml(Matrix::Zero(4, 4), r);
  CHECK(st.log_ml == doctest::Approx(loglik(Vector::Zero(4), r)).epsilon(1e-12));
  CHECK(st.eta_mode.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("logistic evidence matches tensor-grid quadrature on a 2-sample toy") {
  Rng rng(82);
  Matrix x(2, 2);
  x << 1.1, -0.4, 0.3, 0.9;
  const Matrix gamma = x * x.transpose() / 1.5;
  Vector y(2);
  y << 1, 0;
  const LaplaceMlState st = laplace_log_ml(gamma, ResponseSpec::logistic(y));

  // Direct 2-d quadrature of E_{N(0, Gamma)}[ L(y; eta) ].
  const Eigen::LLT<Matrix> llt(gamma);
  const Matrix chol = llt.matrixL();
  const int grid = 400;
  const double span = 8.0, h = 2.0 * span / grid;
  double total = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double z1 = -span + (i + 0.5) * h;
    for (int j = 0; j < grid; ++j) {
      const double z2 = -span + (j + 0.5) * h;
      Vector eta = chol * Eigen::Vector2d(z1, z2);
      const double lik = oracles::expit(eta(0)) * (1.0 - oracles::expit(eta(1)));
      total += lik * oracles::norm_pdf(z1) * oracles::norm_pdf(z2) * h * h;
    }
  }
  const double quadrature = std::log(total);
  CHECK(std::abs(st.log_ml - quadrature) / std::abs(quadrature) <= 0.05);
}

TEST_CASE("n-space and p-space log-determinants agree") {
  Rng rng(83);
  for (int rep = 0; rep < 15; ++rep) {
    const Index n = 4 + static_cast<Index>(rng.below(5));
    const Index p = 2 + static_cast<Index>(rng.below(28));
    const Matrix x = oracles::random_matrix(rng, n, p);
    const double lambda = std::exp(rng.uniform(-1, 2));
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = rng.uniform(0.05, 1.0);

    // n-space: log det(I + W^{1/2} Gamma W^{1/2}).
    const Matrix gamma = x * x.transpose() / lambda;
    Matrix s = w.cwiseSqrt().asDiagonal() * gamma * w.cwiseSqrt().asDiagonal();
    s.diagonal().array() += 1.0;
    const double nspace =
        2.0 * Eigen::LLT<Matrix>(s).matrixLLT().diagonal().array().log().sum();
    const double pspace =
        oracles::pspace_logdet(x, Vector::Constant(p, lambda), w);
    CHECK(nspace == doctest::Approx(pspace).epsilon(1e-8));
  }
}

TEST_CASE("scaling every penalty toward infinity degrades to the null model") {
  Rng rng(84);
  const Index n = 8;
  const Matrix x = oracles::random_matrix(rng, n, 20);
  const Matrix gamma0 = x * x.transpose() / 2.0;
  // A response loud in every eigendirection of Gamma keeps the evidence
  // decreasing along the entire shrinkage path.
  const Eigen::SelfAdjointEigenSolver<Matrix> es(gamma0);
  const Vector y =
      es.eigenvectors() *
      (3.0 * (es.eigenvalues().array() + 1.0).sqrt()).matrix();
  const ResponseSpec r = ResponseSpec::linear(y);
  const double null_ll = loglik(Vector::Zero(n), r);
  std::vector<double> values;
  for (double t = 1.0; t <= 1e9; t *= 10.0)
    values.push_back(laplace_log_ml(Matrix(gamma0 / t), r).log_ml);
  for (std::size_t i = 1; i < values.size(); ++i)
    CHECK(values[i] <= values[i - 1] + 1e-9);
  CHECK(std::abs(values.back() - null_ll) <= 1e-3 * std::abs(null_ll));
}

TEST_CASE("evidence tuning recovers the known single-block penalty") {
  Rng rng(85);
  const Index n = 40, p = 60;
  const double true_lambda = 8.0;
  const Matrix x = oracles::random_matrix(rng, n, p);
  Vector beta(p);
  for (Index j = 0; j < p; ++j) beta(j) = rng.normal() / std::sqrt(true_lambda);
  Vector y = x * beta;
  for (Index i = 0; i < n; ++i) y(i) += rng.normal();
  const BlockedDesign design({x});
  const GramSet grams = precompute_grams(design);
  const ResponseSpec r = ResponseSpec::linear(y);

  TunerConfig cfg;
  cfg.global_iters = 6;
  cfg.local_iters = 40;
  const TuneResult res = tune_ml(design, grams, r, cfg);

  // Dense evidence grid oracle.
  double best_u = -1e300, best_lambda = 0.0;
  for (double lx = -6.0; lx <= 12.0; lx += 0.01) {
    const double lam = std::exp(lx);
    const double u =
        oracles::gaussian_evidence(y, Matrix(x * x.transpose() / lam));
    if (u > best_u) {
      best_u = u;
      best_lambda = lam;
    }
  }
  CHECK(std::abs(std::log(res.penalties.lambda(0)) - std::log(best_lambda)) <=
        0.011);
}

TEST_CASE("an all-fixed mask returns the initializer untouched") {
  Rng rng(86);
  const Matrix x = oracles::random_matrix(rng, 10, 12);
  const BlockedDesign design({x});
  const GramSet grams = precompute_grams(design);
  const Vector y = oracles::random_vector(rng, 10);
  TunerConfig cfg;
  cfg.init_lambdas = Vector::Constant(1, 7.7);
  const TuneResult res = tune_ml(design, grams, ResponseSpec::linear(y), cfg, {},
                                 {true});
  CHECK(res.penalties.lambda(0) == 7.7);
  CHECK(res.evaluations == 0);
}

TEST_CASE("unpenalized blocks are rejected for evidence tuning") {
  Rng rng(87);
  const Matrix x = oracles::random_matrix(rng, 8, 6);
  const BlockedDesign design({x}, {}, Matrix::Ones(8, 1));
  const GramSet grams = precompute_grams(design);
  const Vector y = oracles::random_vector(rng, 8);
  TunerConfig cfg;
  CHECK_THROWS_AS(tune_ml(design, grams, ResponseSpec::linear(y), cfg),
                  ConfigError);
}

TEST_CASE("jitter reports when Gamma is numerically singular") {
  Rng rng(88);
  const Index n = 6;
  Matrix x(n, 1);
  x.col(0) = oracles::random_vector(rng, n);  // rank-1 Gamma
  const Matrix gamma = x * x.transpose();
  const Vector y = oracles::random_vector(rng, n);
  const LaplaceMlState st = laplace_log_ml(gamma, ResponseSpec::linear(y));
  CHECK(st.jitter > 0.0);
  CHECK(std::isfinite(st.log_ml));
}
