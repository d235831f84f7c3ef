#include "gramridge/marglik.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gramridge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log det(I + Gamma W) through the symmetric congruence
// I + W^{1/2} Gamma W^{1/2}, which shares the determinant.
double log_det_i_plus_gamma_w(const Matrix& gamma, const Vector& w) {
  const Vector ws = w.cwiseMax(0.0).cwiseSqrt();
  Matrix s = ws.asDiagonal() * gamma * ws.asDiagonal();
  s.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericError("log-determinant factorization failed");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double near_singular_jitter(const Matrix& gamma) {
  const Index n = gamma.rows();
  const double scale = gamma.trace() / static_cast<double>(n);
  if (scale <= 0.0) return 0.0;
  Eigen::LDLT<Matrix> ldlt(gamma);
  const Vector d = ldlt.vectorD();
  const double dmin = d.minCoeff();
  if (ldlt.info() != Eigen::Success || dmin <= 1e-10 * scale)
    return 1e-8 * scale;
  return 0.0;
}

double evaluate_log_ml(const Matrix& gamma, const ResponseSpec& response,
                       const IwlsControls& ctrl, LaplaceMlState* state) {
  const double jitter = near_singular_jitter(gamma);
  Matrix gamma_eps = gamma;
  if (jitter > 0.0) gamma_eps.diagonal().array() += jitter;

  FitState fit = iwls_fit(gamma_eps, nullptr, response, ctrl);
  if (!fit.converged)
    throw NumericError("evidence mode search did not converge");

  const Vector offset = response.offset_or_zero();
  const Vector lp = offset + fit.eta;
  const BaselineHazard* bl = fit.baseline ? &*fit.baseline : nullptr;
  // eta' Gamma^{-1} eta = eta' m because eta = Gamma m at the fixed point.
  const double quad = fit.eta.dot(fit.mvec);
  const FamilyMoments mom = family_moments(lp, response, bl);
  const double logdet = log_det_i_plus_gamma_w(gamma_eps, mom.weight);
  const double value = loglik(lp, response, bl) - 0.5 * quad - 0.5 * logdet;

  if (state != nullptr) {
    state->eta_mode = fit.eta;
    state->log_ml = value;
    state->jitter = jitter;
    state->fit = std::move(fit);
  }
  return value;
}

// Per-block starting penalties: evidence grid over one block at a time.
Vector ml_init_lambdas(const GramSet& grams, const ResponseSpec& response,
                       const TunerConfig& cfg, const IwlsControls& ctrl) {
  Vector init(grams.num_blocks());
  const int grid = std::max(2, cfg.init_grid_points);
  const double step = (cfg.log_upper - cfg.log_lower) / (grid - 1);
  for (Index b = 0; b < grams.num_blocks(); ++b) {
    double best_u = kNegInf;
    double best_x = 0.0;
    for (int i = 0; i < grid; ++i) {
      const double x = cfg.log_lower + step * i;
      const Matrix gamma = grams.sigma(b) / std::exp(x);
      double u;
      try {
        u = evaluate_log_ml(gamma, response, ctrl, nullptr);
      } catch (const NumericError&) {
        continue;
      }
      if (u > best_u) {
        best_u = u;
        best_x = x;
      }
    }
    if (best_u == kNegInf)
      throw NumericError("evidence initialization failed for a block");
    init(b) = std::exp(best_x);
  }
  return init;
}

}  // namespace

LaplaceMlState laplace_log_ml(const Matrix& gamma, const ResponseSpec& response,
                              const IwlsControls& ctrl) {
  if (gamma.rows() != response.n() || gamma.cols() != response.n())
    throw ConfigError("Gamma dimensions do not match response length");
  LaplaceMlState state;
  evaluate_log_ml(gamma, response, ctrl, &state);
  return state;
}

TuneResult tune_ml(const BlockedDesign& design, const GramSet& grams,
                   const ResponseSpec& response, const TunerConfig& cfg,
                   const MlOptions& opts, const std::vector<bool>& fixed_mask) {
  if (design.has_unpenalized())
    throw ConfigError(
        "marginal-likelihood tuning does not support an unpenalized block");

  if (opts.preferred && !opts.preferred->empty()) {
    // Stage one on the preferred blocks alone, then fix and tune the rest.
    const std::vector<Index>& preferred = *opts.preferred;
    std::vector<bool> is_preferred(static_cast<std::size_t>(design.num_blocks()),
                                   false);
    for (Index b : preferred) is_preferred[static_cast<std::size_t>(b)] = true;
    if (std::count(is_preferred.begin(), is_preferred.end(), true) ==
        design.num_blocks())
      throw ConfigError(
          "every block is preferred; nothing remains for the second stage");
    std::vector<Index> keep;
    for (Index b = 0; b < design.num_blocks(); ++b)
      if (is_preferred[static_cast<std::size_t>(b)]) keep.push_back(b);
    MlOptions stage_opts = opts;
    stage_opts.preferred.reset();
    const TuneResult stage1 = tune_ml(design.select_blocks(keep),
                                      grams.select_blocks(keep), response, cfg,
                                      stage_opts, {});
    const PenaltyEncoding enc_p(static_cast<Index>(keep.size()),
                                design.select_blocks(keep).paired());
    const Vector x_stage1 = enc_p.encode_config(stage1.penalties);

    TunerConfig cfg2 = cfg;
    Vector init(design.num_blocks());
    Vector defaults;
    for (Index b = 0, j = 0; b < design.num_blocks(); ++b) {
      if (is_preferred[static_cast<std::size_t>(b)]) {
        init(b) = std::exp(x_stage1(j++));
      } else if (cfg.init_lambdas) {
        init(b) = (*cfg.init_lambdas)(b);
      } else {
        if (defaults.size() == 0)
          defaults = ml_init_lambdas(grams, response, cfg, opts.iwls);
        init(b) = defaults(b);
      }
    }
    cfg2.init_lambdas = init;
    if (design.select_blocks(keep).paired())
      cfg2.paired_init_coupling = std::exp(x_stage1(enc_p.dim() - 1));
    MlOptions opts2 = opts;
    opts2.preferred.reset();
    TuneResult stage2 = tune_ml(design, grams, response, cfg2, opts2,
                                is_preferred);
    stage2.evaluations += stage1.evaluations;
    return stage2;
  }

  const Vector init = cfg.init_lambdas
                          ? *cfg.init_lambdas
                          : ml_init_lambdas(grams, response, cfg, opts.iwls);
  const PenaltyEncoding enc(design.num_blocks(), design.paired());
  std::vector<EvalRecord> trace;
  auto objective = [&](const Vector& x) {
    const PenaltyConfig cand = enc.decode(x, fixed_mask);
    double value;
    try {
      value = evaluate_log_ml(assemble_gamma(grams, cand), response, opts.iwls,
                              nullptr);
    } catch (const NumericError&) {
      value = kNegInf;
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

}  // namespace gramridge
