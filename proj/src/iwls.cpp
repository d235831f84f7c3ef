#include "gramridge/iwls.hpp"

#include <Eigen/Cholesky>

#include <cmath>

#include "gramridge/numeric.hpp"

namespace gramridge {

namespace {

HatFactors build_hat(const Matrix& gamma_pen, const Matrix* unpen,
                     const Vector& w) {
  if (unpen != nullptr && unpen->cols() > 0)
    return hat_matrix_unpenalized(gamma_pen, w, *unpen);
  return hat_matrix(gamma_pen, w);
}

// Penalty term of the objective, beta' Lambda beta = m' Gamma m, evaluated
// without leaving n-space.
double penalty_quadratic(const Matrix& gamma_pen, const Vector& mvec) {
  return mvec.dot(gamma_pen * mvec);
}

// Warm start for logistic fits with an unpenalized block: the label-mean
// intercept projected onto the block's column space, so the starting state
// is exactly representable as eta = X1 beta1 (keeps the running identity
// eta = X1 beta1 + Gamma m intact from the first iterate on).
void warm_start(const ResponseSpec& response, const Matrix* unpen, Vector& eta,
                Vector& beta1) {
  if (response.family() != Family::logistic || unpen == nullptr ||
      unpen->cols() == 0)
    return;
  const double c = logit(clamp_prob(response.y().mean()));
  const Vector target = Vector::Constant(response.n(), c);
  beta1 = (unpen->transpose() * *unpen)
              .llt()
              .solve(unpen->transpose() * target);
  eta = *unpen * beta1;
}

}  // namespace

FitState iwls_fit(const Matrix& gamma_pen, const Matrix* unpen,
                  const ResponseSpec& response, const IwlsControls& ctrl) {
  const Index n = response.n();
  if (gamma_pen.rows() != n || gamma_pen.cols() != n)
    throw ConfigError("Gamma dimensions do not match response length");
  const Vector offset = response.offset_or_zero();

  FitState fit;

  if (response.family() == Family::linear) {
    // One pass: eta = H (Y - offset), W = I.
    const Vector w = Vector::Ones(n);
    fit.hat = build_hat(gamma_pen, unpen, w);
    fit.linearized = response.y() - offset;
    fit.eta = fit.hat.H * fit.linearized;
    fit.mvec = fit.hat.M * fit.linearized;
    fit.beta_unpen = fit.hat.K * fit.linearized;
    fit.weights = w;
    fit.converged = true;
    fit.iterations = 1;
    fit.penalized_loglik = loglik(offset + fit.eta, response) -
                           0.5 * penalty_quadratic(gamma_pen, fit.mvec);
    return fit;
  }

  Vector eta = Vector::Zero(n);
  Vector mvec = Vector::Zero(n);
  Vector beta1 = Vector::Zero(unpen ? unpen->cols() : 0);
  warm_start(response, unpen, eta, beta1);

  for (int iter = 1; iter <= ctrl.max_iter; ++iter) {
    const Vector lp = offset + eta;
    std::optional<BaselineHazard> baseline;
    if (response.family() == Family::cox) baseline = breslow(lp, response);
    const BaselineHazard* bl = baseline ? &*baseline : nullptr;

    const FamilyMoments mom = family_moments(lp, response, bl);
    const Vector w = mom.weight.cwiseMax(kWeightFloor);
    const HatFactors hat = build_hat(gamma_pen, unpen, w);
    const Vector lvec = mom.centered + w.cwiseProduct(eta);

    Vector eta_new = hat.H * lvec;
    Vector mvec_new = hat.M * lvec;
    Vector beta1_new = hat.K * lvec;

    // Objective at the current iterate under this cycle's baseline; the
    // baseline refresh itself never decreases the full likelihood.
    const double obj_current =
        loglik(lp, response, bl) - 0.5 * penalty_quadratic(gamma_pen, mvec);

    double step = 1.0;
    Vector eta_try = eta_new;
    Vector mvec_try = mvec_new;
    Vector beta1_try = beta1_new;
    double obj_try = loglik(offset + eta_try, response, bl) -
                     0.5 * penalty_quadratic(gamma_pen, mvec_try);
    int halvings = 0;
    while (obj_try < obj_current - 1e-10 &&
           halvings < ctrl.max_step_halvings) {
      step *= 0.5;
      eta_try = eta + step * (eta_new - eta);
      mvec_try = mvec + step * (mvec_new - mvec);
      beta1_try = beta1 + step * (beta1_new - beta1);
      obj_try = loglik(offset + eta_try, response, bl) -
                0.5 * penalty_quadratic(gamma_pen, mvec_try);
      ++halvings;
    }

    const double delta = (eta_try - eta).lpNorm<Eigen::Infinity>();
    eta = eta_try;
    mvec = mvec_try;
    beta1 = beta1_try;
    if (fit.objective_history.empty())
      fit.objective_history.push_back(obj_current);
    fit.objective_history.push_back(obj_try);

    if (eta.lpNorm<Eigen::Infinity>() > ctrl.divergence_bound)
      throw NumericError("IWLS diverged: |eta| exceeded " +
                         std::to_string(ctrl.divergence_bound));

    fit.iterations = iter;
    fit.last_step = delta;
    if (delta < ctrl.tol) {
      fit.converged = true;
      fit.hat = hat;
      fit.weights = w;
      fit.linearized = lvec;
      break;
    }
    if (iter == ctrl.max_iter) {
      fit.hat = hat;
      fit.weights = w;
      fit.linearized = lvec;
    }
  }

  fit.eta = eta;
  fit.mvec = mvec;
  fit.beta_unpen = beta1;
  if (response.family() == Family::cox)
    fit.baseline = breslow(offset + eta, response);
  const BaselineHazard* bl = fit.baseline ? &*fit.baseline : nullptr;
  fit.penalized_loglik = loglik(offset + eta, response, bl) -
                         0.5 * penalty_quadratic(gamma_pen, mvec);
  return fit;
}

FitState fit_ridge(const BlockedDesign& design, const GramSet& grams,
                   const PenaltyConfig& penalties, const ResponseSpec& response,
                   const IwlsControls& ctrl) {
  if (design.n() != response.n())
    throw ConfigError("design and response disagree on sample count");
  const Matrix gamma = assemble_gamma(grams, penalties);
  return iwls_fit(gamma, design.unpenalized_ptr(), response, ctrl);
}

Vector recover_coefficients(const FitState& fit, const BlockedDesign& design,
                            const PenaltyConfig& penalties) {
  if (!fit.converged)
    throw NumericError("cannot recover coefficients from a non-converged fit");
  if (penalties.num_blocks() != design.num_blocks())
    throw ConfigError("penalty count does not match design block count");

  const Index p1 = design.unpenalized_cols();
  Vector beta(p1 + design.total_penalized_cols());
  beta.head(p1) = fit.beta_unpen;

  Index pa = -1, pb = -1;
  Eigen::Matrix2d omega;
  if (penalties.has_paired()) {
    pa = penalties.paired_blocks()->block_a;
    pb = penalties.paired_blocks()->block_b;
    omega = penalties.omega_s();
  }

  Index at = p1;
  std::vector<Index> offsets(static_cast<std::size_t>(design.num_blocks()));
  for (Index b = 0; b < design.num_blocks(); ++b) {
    offsets[static_cast<std::size_t>(b)] = at;
    at += design.block(b).cols();
  }
  for (Index b = 0; b < design.num_blocks(); ++b) {
    const Index off = offsets[static_cast<std::size_t>(b)];
    const Index pb_cols = design.block(b).cols();
    if (b == pa || b == pb) continue;
    beta.segment(off, pb_cols) =
        design.block(b).transpose() * fit.mvec / penalties.lambda(b);
  }
  if (pa >= 0) {
    const Vector xa = design.block(pa).transpose() * fit.mvec;
    const Vector xb = design.block(pb).transpose() * fit.mvec;
    beta.segment(offsets[static_cast<std::size_t>(pa)], xa.size()) =
        omega(0, 0) * xa + omega(0, 1) * xb;
    beta.segment(offsets[static_cast<std::size_t>(pb)], xb.size()) =
        omega(0, 1) * xa + omega(1, 1) * xb;
  }
  return beta;
}

Vector predict_new(const FitState& fit, const BlockedDesign& train,
                   const PenaltyConfig& penalties,
                   const std::vector<Matrix>& new_blocks,
                   const Matrix* new_unpen,
                   const std::vector<GramKernel>& kernels) {
  const Matrix gamma_new =
      assemble_gamma_cross(train, new_blocks, penalties, kernels);
  Vector eta = gamma_new * fit.mvec;
  if (train.has_unpenalized()) {
    if (new_unpen == nullptr)
      throw ConfigError("training design has an unpenalized block; new data must too");
    if (new_unpen->cols() != train.unpenalized_cols())
      throw ConfigError("new unpenalized block column count mismatch");
    if (new_unpen->rows() != eta.size())
      throw ConfigError("new data blocks disagree on row count");
    eta += *new_unpen * fit.beta_unpen;
  } else if (new_unpen != nullptr && new_unpen->cols() > 0) {
    throw ConfigError("training design has no unpenalized block");
  }
  return eta;
}

DenseFit dense_iwls(const Matrix& x, const Vector& penalty_diag,
                    const ResponseSpec& response, const IwlsControls& ctrl) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (penalty_diag.size() != p)
    throw ConfigError("penalty diagonal length does not match column count");
  if (response.n() != n)
    throw ConfigError("design and response disagree on sample count");
  const Vector offset = response.offset_or_zero();

  DenseFit fit;
  if (response.family() == Family::linear) {
    Matrix a = x.transpose() * x;
    a.diagonal() += penalty_diag;
    fit.beta = a.llt().solve(x.transpose() * (response.y() - offset));
    fit.eta = x * fit.beta;
    fit.converged = true;
    fit.iterations = 1;
    return fit;
  }

  Vector beta = Vector::Zero(p);
  Vector eta = Vector::Zero(n);
  for (int iter = 1; iter <= ctrl.max_iter; ++iter) {
    const Vector lp = offset + eta;
    std::optional<BaselineHazard> baseline;
    if (response.family() == Family::cox) baseline = breslow(lp, response);
    const BaselineHazard* bl = baseline ? &*baseline : nullptr;
    const FamilyMoments mom = family_moments(lp, response, bl);
    const Vector w = mom.weight.cwiseMax(kWeightFloor);

    Matrix a = x.transpose() * w.asDiagonal() * x;
    a.diagonal() += penalty_diag;
    const Vector rhs =
        x.transpose() * (mom.centered + w.cwiseProduct(eta));
    Vector beta_new = a.llt().solve(rhs);
    Vector eta_new = x * beta_new;

    const double obj_current = loglik(lp, response, bl) -
                               0.5 * beta.dot(penalty_diag.cwiseProduct(beta));
    double step = 1.0;
    Vector beta_try = beta_new;
    Vector eta_try = eta_new;
    double obj_try =
        loglik(offset + eta_try, response, bl) -
        0.5 * beta_try.dot(penalty_diag.cwiseProduct(beta_try));
    int halvings = 0;
    while (obj_try < obj_current - 1e-10 &&
           halvings < ctrl.max_step_halvings) {
      step *= 0.5;
      beta_try = beta + step * (beta_new - beta);
      eta_try = x * beta_try;
      obj_try = loglik(offset + eta_try, response, bl) -
                0.5 * beta_try.dot(penalty_diag.cwiseProduct(beta_try));
      ++halvings;
    }

    const double delta = (eta_try - eta).lpNorm<Eigen::Infinity>();
    beta = beta_try;
    eta = eta_try;
    fit.iterations = iter;
    if (eta.lpNorm<Eigen::Infinity>() > ctrl.divergence_bound)
      throw NumericError("IWLS diverged");
    if (delta < ctrl.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.beta = beta;
  fit.eta = eta;
  if (response.family() == Family::cox)
    fit.baseline = breslow(offset + eta, response);
  return fit;
}

}  // namespace gramridge
