#pragma once

#include <optional>

#include "gramridge/design.hpp"
#include "gramridge/family.hpp"
#include "gramridge/gram.hpp"
#include "gramridge/hat.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

struct IwlsControls {
  double tol = 1e-8;              // max |delta eta|
  int max_iter = 100;
  int max_step_halvings = 10;     // safeguard against Newton overshoot
  double divergence_bound = 1e10; // on max |eta|
};

// Converged fit expressed entirely through n-dimensional quantities.
// eta excludes the offset. beta_unpen = K L and mvec = M L are the pieces a
// prediction needs: eta_new = X1_new beta_unpen + Gamma_new mvec.
struct FitState {
  Vector eta;
  Vector weights;
  Vector linearized;  // L = C + W eta at the accepted iterate
  HatFactors hat;
  Vector beta_unpen;
  Vector mvec;
  std::optional<BaselineHazard> baseline;  // cox only
  bool converged = false;
  int iterations = 0;
  double last_step = 0.0;  // max |delta eta| at the final iteration
  double penalized_loglik = 0.0;
  std::vector<double> objective_history;  // penalized loglik per accepted step
};

// Iterative weighted least squares in linear-predictor space:
//   eta <- H_{Lambda,W} (C + W eta)
// with the hat matrix rebuilt from gamma_pen each cycle. The linear family
// solves in a single pass. Cox refreshes the Breslow baseline every cycle.
FitState iwls_fit(const Matrix& gamma_pen, const Matrix* unpen,
                  const ResponseSpec& response, const IwlsControls& ctrl = {});

// Convenience wrapper: assembles Gamma from the Gram set and fits.
FitState fit_ridge(const BlockedDesign& design, const GramSet& grams,
                   const PenaltyConfig& penalties, const ResponseSpec& response,
                   const IwlsControls& ctrl = {});

// Back-maps the converged fit onto coefficients:
// beta = [K L ; Omega X2' M L], unpenalized coefficients stacked first.
// The single permitted p x n multiplication after fitting. Requires linear
// Grams (kernel fits have no coefficient representation).
Vector recover_coefficients(const FitState& fit, const BlockedDesign& design,
                            const PenaltyConfig& penalties);

// Linear predictors for new samples through the prediction hat matrix;
// identical to X_new * recover_coefficients(...) up to roundoff.
Vector predict_new(const FitState& fit, const BlockedDesign& train,
                   const PenaltyConfig& penalties,
                   const std::vector<Matrix>& new_blocks,
                   const Matrix* new_unpen = nullptr,
                   const std::vector<GramKernel>& kernels = {});

struct DenseFit {
  Vector beta;
  Vector eta;
  std::optional<BaselineHazard> baseline;
  bool converged = false;
  int iterations = 0;
};

// Coefficient-space IWLS for a small dense design with a diagonal penalty.
// Used where the design has already been reduced to few columns (the
// SVD-reduced single-block fits); the dual path above is the production
// solver.
DenseFit dense_iwls(const Matrix& x, const Vector& penalty_diag,
                    const ResponseSpec& response, const IwlsControls& ctrl = {});

}  // namespace gramridge
