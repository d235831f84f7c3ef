#include "gramridge/vb.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

#include "gramridge/hat.hpp"
#include "gramridge/numeric.hpp"
#include "gramridge/parallel.hpp"

namespace gramridge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_binary(const Vector& y) {
  for (Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0)
      throw ConfigError("probit response must be 0/1");
}

double log_det_gamma_plus_i(const Matrix& gamma) {
  Matrix s = gamma;
  s.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericError("Gamma + I factorization failed");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// mu_a update; the y = 0 branch mirrors the y = 1 branch exactly so that
// flipping every label negates the iterates bit for bit.
double auxiliary_mean(double mu, double y) {
  return y == 1.0 ? mu + mills_ratio(mu) : -(-mu + mills_ratio(-mu));
}

double elbo_terms(const Vector& mu_a, const Vector& mu_eta, const Matrix& hat,
                  const Vector& y, double logdet) {
  double ll = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    // Phi(-x) equals 1 - Phi(x) without cancellation.
    const double p = clamp_prob(norm_cdf(y(i) == 1.0 ? mu_eta(i) : -mu_eta(i)));
    ll += std::log(p);
  }
  const Vector t = hat * mu_a;  // mu_a' H (I - H) mu_a = t.mu_a - t.t
  return ll - 0.5 * (t.dot(mu_a) - t.dot(t)) - 0.5 * logdet;
}

// Integrand of CPO_i^{-1}: Gaussian predictive density over the probit
// likelihood of the observed label.
double cpo_integrand(double eta, double mu, double sd, double y) {
  const double z = (eta - mu) / sd;
  const double dens = norm_pdf(z) / sd;
  const double lik = clamp_prob(norm_cdf(y == 1.0 ? eta : -eta));
  return dens / lik;
}

struct QuadResult {
  double value = 0.0;
  bool converged = true;
};

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

void adaptive_step(const std::function<double(double)>& f, double a, double fa,
                   double b, double fb, double m, double fm, double whole,
                   double tol, int depth, QuadResult& out) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) {
    out.value += left + right + delta / 15.0;
    return;
  }
  if (depth <= 0) {
    out.value += left + right;
    out.converged = false;
    return;
  }
  adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, out);
  adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, out);
}

// Embedded-pair adaptive refinement with an absolute tolerance.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double tol) {
  QuadResult out;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = simpson(a, fa, b, fb, fm);
  adaptive_step(f, a, fa, b, fb, m, fm, whole, tol, 40, out);
  return out;
}

}  // namespace

VbState vb_fit(const Matrix& gamma, const Vector& y, const VbControls& ctrl) {
  const Index n = y.size();
  if (gamma.rows() != n || gamma.cols() != n)
    throw ConfigError("Gamma dimensions do not match response length");
  check_binary(y);

  VbState st;
  st.hat = hat_matrix(gamma, Vector::Ones(n)).H;
  const double logdet = log_det_gamma_plus_i(gamma);

  // Sign-consistent start: mu_a = 2y - 1.
  st.mu_a = 2.0 * y.array() - 1.0;
  for (int iter = 1; iter <= ctrl.max_iter; ++iter) {
    st.mu_eta = st.hat * st.mu_a;
    st.elbo_history.push_back(
        elbo_terms(st.mu_a, st.mu_eta, st.hat, y, logdet));
    Vector mu_a_new(n);
    for (Index i = 0; i < n; ++i)
      mu_a_new(i) = auxiliary_mean(st.mu_eta(i), y(i));
    const double delta = (mu_a_new - st.mu_a).lpNorm<Eigen::Infinity>();
    st.mu_a = mu_a_new;
    st.iterations = iter;
    if (delta < ctrl.tol) {
      st.converged = true;
      break;
    }
  }
  st.mu_eta = st.hat * st.mu_a;
  st.elbo = elbo_terms(st.mu_a, st.mu_eta, st.hat, y, logdet);
  return st;
}

double elbo(const VbState& state, const Matrix& gamma, const Vector& y) {
  check_binary(y);
  return elbo_terms(state.mu_a, state.mu_eta, state.hat, y,
                    log_det_gamma_plus_i(gamma));
}

TuneResult tune_elbo(const GramSet& grams, const Vector& y,
                     const TunerConfig& cfg, const std::vector<bool>& fixed_mask,
                     const VbControls& ctrl) {
  check_binary(y);
  Vector init;
  if (cfg.init_lambdas) {
    init = *cfg.init_lambdas;
  } else {
    // Per-block elbo grid.
    init.resize(grams.num_blocks());
    const int grid = std::max(2, cfg.init_grid_points);
    const double step = (cfg.log_upper - cfg.log_lower) / (grid - 1);
    for (Index b = 0; b < grams.num_blocks(); ++b) {
      double best_u = kNegInf, best_x = 0.0;
      for (int i = 0; i < grid; ++i) {
        const double x = cfg.log_lower + step * i;
        const VbState st = vb_fit(grams.sigma(b) / std::exp(x), y, ctrl);
        if (st.converged && st.elbo > best_u) {
          best_u = st.elbo;
          best_x = x;
        }
      }
      if (best_u == kNegInf)
        throw NumericError("elbo initialization failed for a block");
      init(b) = std::exp(best_x);
    }
  }

  const PenaltyEncoding enc(grams.num_blocks(), grams.paired());
  std::vector<EvalRecord> trace;
  auto objective = [&](const Vector& x) {
    const PenaltyConfig cand = enc.decode(x, fixed_mask);
    double value = kNegInf;
    try {
      const VbState st = vb_fit(assemble_gamma(grams, cand), y, ctrl);
      if (st.converged) value = st.elbo;
    } catch (const NumericError&) {
    }
    EvalRecord rec;
    rec.lambdas = cand.lambdas();
    if (cand.has_paired()) rec.lambda3 = cand.paired().lambda3;
    rec.utility = value;
    trace.push_back(std::move(rec));
    return value;
  };
  const CoreResult core = optimize_log_penalties(
      objective, enc.encode(init, cfg.paired_init_coupling), cfg,
      enc.expand_mask(fixed_mask));
  return TuneResult{enc.decode(core.x, fixed_mask), std::move(trace),
                    core.evaluations, core.utility};
}

CpoResult cpo(const GramSet& grams, const Vector& y, const FoldPlan& plan,
              const TunerConfig& cfg, const VbControls& ctrl, int workers) {
  check_binary(y);
  const Index n = y.size();
  if (plan.n() != n) throw ConfigError("fold plan does not match response");

  CpoResult out;
  out.cpo = Vector::Zero(n);
  out.fold_lambdas.resize(static_cast<std::size_t>(plan.k));
  std::vector<std::vector<int>> flagged_per_fold(
      static_cast<std::size_t>(plan.k));

  parallel_for(plan.k, workers, [&](int f) {
    const IndexList in = plan.in_indices(0, f);
    const IndexList out_idx = plan.out_indices(0, f);
    const Vector y_in = y(in);

    // Hyperparameters re-estimated without this fold, as held-out
    // prediction requires.
    const GramSet grams_in = grams.subset(in);
    TunerConfig fold_cfg = cfg;
    fold_cfg.seed = cfg.seed + static_cast<std::uint64_t>(f) + 1;
    const TuneResult tuned = tune_elbo(grams_in, y_in, fold_cfg, {}, ctrl);
    out.fold_lambdas[static_cast<std::size_t>(f)] = tuned.penalties.lambdas();

    const Matrix gamma = assemble_gamma(grams, tuned.penalties);
    const Matrix g_ii = submatrix_gamma(gamma, in, in);
    const VbState st = vb_fit(g_ii, y_in, ctrl);

    // Gaussian predictive of held-out eta from sliced H and Gamma.
    Matrix s = g_ii;
    s.diagonal().array() += 1.0;
    const Eigen::LLT<Matrix> llt(s);
    const Matrix g_oi = submatrix_gamma(gamma, out_idx, in);
    const Matrix g_oo = submatrix_gamma(gamma, out_idx, out_idx);
    const Vector mu = (g_oi - g_oi * llt.solve(g_ii)) * st.mu_a;
    const Matrix cov = g_oo - g_oi * llt.solve(g_oi.transpose());

    for (std::size_t j = 0; j < out_idx.size(); ++j) {
      const Index i = out_idx[j];
      const double m = mu(static_cast<Index>(j));
      const double var = std::max(cov(static_cast<Index>(j),
                                      static_cast<Index>(j)), 0.0);
      const double sd = std::sqrt(var);
      double inv_cpo;
      if (sd < 1e-12) {
        // Degenerate predictive: point mass at m.
        const double lik = clamp_prob(norm_cdf(y(i) == 1.0 ? m : -m));
        inv_cpo = 1.0 / lik;
      } else {
        auto f1 = [&](double eta) { return cpo_integrand(eta, m, sd, y(i)); };
        const QuadResult q = integrate(f1, m - 8.0 * sd, m + 8.0 * sd, 1e-10);
        if (!q.converged)
          flagged_per_fold[static_cast<std::size_t>(f)].push_back(
              static_cast<int>(i));
        inv_cpo = q.value;
      }
      out.cpo(i) = 1.0 / inv_cpo;
    }
  });

  for (const auto& v : flagged_per_fold)
    out.flagged.insert(out.flagged.end(), v.begin(), v.end());
  std::sort(out.flagged.begin(), out.flagged.end());
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) acc += std::log(out.cpo(i));
  out.cpo_log = acc / static_cast<double>(n);
  return out;
}

}  // namespace gramridge
