#pragma once

#include <vector>

#include "gramridge/folds.hpp"
#include "gramridge/gram.hpp"
#include "gramridge/optimize.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

struct VbControls {
  double tol = 1e-8;  // on max |delta mu_a|
  int max_iter = 500;
};

// Variational posterior summary for probit ridge. The approximate posterior
// of eta is N(mu_eta, H); everything lives in n-dimensional space.
struct VbState {
  Vector mu_a;
  Vector mu_eta;
  Matrix hat;  // H = Gamma - Gamma (I + Gamma)^{-1} Gamma
  double elbo = 0.0;
  std::vector<double> elbo_history;
  int iterations = 0;
  bool converged = false;
};

// Mean-field updates, alternating
//   mu_eta <- H mu_a
//   mu_a   <- mu_eta + phi(mu_eta) / (Phi(mu_eta) or Phi(mu_eta) - 1)
// elementwise by label, until mu_a settles.
VbState vb_fit(const Matrix& gamma, const Vector& y, const VbControls& ctrl = {});

// Evidence lower bound of the state:
//   y' log Phi(mu_eta) + (1-y)' log(1 - Phi(mu_eta))
//   - mu_a' H (I - H) mu_a / 2 - log det(Gamma + I) / 2.
double elbo(const VbState& state, const Matrix& gamma, const Vector& y);

// Empirical-Bayes penalty tuning with the converged elbo as utility.
TuneResult tune_elbo(const GramSet& grams, const Vector& y,
                     const TunerConfig& cfg,
                     const std::vector<bool>& fixed_mask = {},
                     const VbControls& ctrl = {});

struct CpoResult {
  Vector cpo;            // per-sample conditional predictive ordinate
  double cpo_log = 0.0;  // mean log CPO
  std::vector<int> flagged;  // samples whose quadrature failed to settle
  std::vector<Vector> fold_lambdas;
};

// Held-out predictive evaluation: per fold, re-tune and re-fit without the
// fold, form the Gaussian predictive of each held-out eta from sliced H and
// Gamma, and evaluate CPO_i^{-1} by one-dimensional quadrature.
CpoResult cpo(const GramSet& grams, const Vector& y, const FoldPlan& plan,
              const TunerConfig& cfg, const VbControls& ctrl = {},
              int workers = 1);

}  // namespace gramridge
