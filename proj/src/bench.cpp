#include "gramridge/bench.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "gramridge/folds.hpp"
#include "gramridge/gram.hpp"
#include "gramridge/rng.hpp"

namespace gramridge {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct EvalTriple {
  Vector lambdas;  // one per block
  Vector weights;  // on the in-rows
  Vector lvec;     // linearized response on the in-rows
  IndexList in;
};

// eta = (Gamma - Gamma S^{-1} Gamma) L with S = 1/W + Gamma.
Vector dual_eta(const Matrix& gamma_in, const EvalTriple& t) {
  Matrix s = gamma_in;
  s.diagonal() += t.weights.cwiseInverse();
  const Vector g_l = gamma_in * t.lvec;
  return g_l - gamma_in * s.llt().solve(g_l);
}

Vector eval_gram(const GramSet& grams, const EvalTriple& t) {
  const Index m = static_cast<Index>(t.in.size());
  Matrix gamma_in = Matrix::Zero(m, m);
  for (Index b = 0; b < grams.num_blocks(); ++b)
    gamma_in.noalias() +=
        submatrix_gamma(grams.sigma(b), t.in, t.in) / t.lambdas(b);
  return dual_eta(gamma_in, t);
}

Vector eval_woodbury(const BlockedDesign& design, const EvalTriple& t) {
  const Index m = static_cast<Index>(t.in.size());
  Matrix gamma_in = Matrix::Zero(m, m);
  for (Index b = 0; b < design.num_blocks(); ++b) {
    const Matrix x_in = design.block(b)(t.in, Eigen::all);
    gamma_in.noalias() += x_in * x_in.transpose() / t.lambdas(b);
  }
  return dual_eta(gamma_in, t);
}

Vector eval_naive(const BlockedDesign& design, const EvalTriple& t) {
  const Index p = design.total_penalized_cols();
  Matrix x_in(t.in.size(), p);
  Index at = 0;
  Vector penalty(p);
  for (Index b = 0; b < design.num_blocks(); ++b) {
    const Index cols = design.block(b).cols();
    x_in.middleCols(at, cols) = design.block(b)(t.in, Eigen::all);
    penalty.segment(at, cols).setConstant(t.lambdas(b));
    at += cols;
  }
  Matrix a = x_in.transpose() * t.weights.asDiagonal() * x_in;
  a.diagonal() += penalty;
  const Vector rhs = x_in.transpose() * t.lvec;
  return x_in * a.llt().solve(rhs);
}

}  // namespace

const BenchBackendResult& BenchReport::backend(const std::string& name) const {
  for (const auto& b : backends)
    if (b.name == name) return b;
  throw ConfigError("backend not present in report: " + name);
}

double BenchReport::speedup(const std::string& baseline) const {
  return backend(baseline).total_seconds / backend("gram").total_seconds;
}

BenchReport benchmark(const SimSpec& spec, int budget,
                      const std::vector<std::string>& names,
                      const BenchOptions& opts) {
  if (budget < 1) throw ConfigError("evaluation budget must be positive");
  bool has_gram = false, has_baseline = false;
  for (const auto& n : names) {
    if (n == "gram") has_gram = true;
    else if (n == "naive" || n == "woodbury") has_baseline = true;
    else throw ConfigError("unknown backend: " + n);
  }
  if (!has_gram || !has_baseline)
    throw ConfigError("benchmark needs the gram backend and one baseline");

  const SimData data = simulate(spec);
  const BlockedDesign& design = data.design;
  const Index n = design.n();
  const Index B = design.num_blocks();

  // The same deterministic triple sequence drives every backend.
  Rng rng(opts.seed);
  const int k = std::min<int>(opts.folds_k, static_cast<int>(n));
  std::vector<EvalTriple> triples;
  triples.reserve(static_cast<std::size_t>(budget));
  for (int e = 0; e < budget; ++e) {
    EvalTriple t;
    t.lambdas.resize(B);
    for (Index b = 0; b < B; ++b)
      t.lambdas(b) = std::exp(rng.uniform(0.0, std::log(1e4)));
    IndexList in;
    const int fold = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    for (Index i = 0; i < n; ++i)
      if (static_cast<int>(i) % k != fold) in.push_back(i);
    t.in = std::move(in);
    const Index m = static_cast<Index>(t.in.size());
    t.weights.resize(m);
    t.lvec.resize(m);
    for (Index i = 0; i < m; ++i) t.weights(i) = rng.uniform(0.1, 1.0);
    for (Index i = 0; i < m; ++i) t.lvec(i) = rng.normal();
    triples.push_back(std::move(t));
  }

  BenchReport report;
  report.n = n;
  report.p = design.total_penalized_cols();
  report.budget = budget;

  // Correctness gate: every backend must reproduce the same eta on the first
  // triple before any timing is recorded.
  const GramSet grams = precompute_grams(design);
  {
    std::vector<Vector> etas;
    for (const auto& name : names) {
      if (name == "gram") etas.push_back(eval_gram(grams, triples.front()));
      if (name == "woodbury")
        etas.push_back(eval_woodbury(design, triples.front()));
      if (name == "naive") etas.push_back(eval_naive(design, triples.front()));
    }
    const double scale = std::max(1.0, etas.front().cwiseAbs().maxCoeff());
    for (const auto& e : etas)
      report.max_eta_residual =
          std::max(report.max_eta_residual,
                   (e - etas.front()).cwiseAbs().maxCoeff() / scale);
    if (report.max_eta_residual > 1e-6) {
      std::ostringstream msg;
      msg << "backend cross-check failed: max eta residual "
          << report.max_eta_residual;
      throw NumericError(msg.str());
    }
  }

  for (const auto& name : names) {
    BenchBackendResult r;
    r.name = name;
    int cap = budget;
    if (name == "naive") cap = std::min(budget, opts.naive_cap);
    if (name == "woodbury") cap = std::min(budget, opts.woodbury_cap);
    if (name == "gram") cap = std::min(budget, opts.gram_cap);

    if (name == "gram") {
      const auto t0 = Clock::now();
      const GramSet timed_grams = precompute_grams(design);
      r.precompute_seconds = seconds_since(t0);
      const auto t1 = Clock::now();
      for (int e = 0; e < cap; ++e)
        eval_gram(timed_grams, triples[static_cast<std::size_t>(e)]);
      r.measured_seconds = seconds_since(t1);
    } else if (name == "woodbury") {
      const auto t1 = Clock::now();
      for (int e = 0; e < cap; ++e)
        eval_woodbury(design, triples[static_cast<std::size_t>(e)]);
      r.measured_seconds = seconds_since(t1);
    } else {
      const auto t1 = Clock::now();
      for (int e = 0; e < cap; ++e)
        eval_naive(design, triples[static_cast<std::size_t>(e)]);
      r.measured_seconds = seconds_since(t1);
    }
    r.measured_evals = cap;
    r.per_eval_seconds = r.measured_seconds / static_cast<double>(cap);
    r.total_seconds =
        r.precompute_seconds + r.per_eval_seconds * static_cast<double>(budget);
    report.backends.push_back(std::move(r));
  }
  return report;
}

}  // namespace gramridge
