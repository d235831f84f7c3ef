#pragma once

#include <optional>
#include <vector>

#include "gramridge/gram.hpp"
#include "gramridge/iwls.hpp"
#include "gramridge/optimize.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

// Laplace evidence in linear-predictor space. The prior of eta = X beta is
// centered Gaussian with covariance Gamma, so the evidence mode is the same
// IWLS fixed point the main solver finds, and
//   log ML ~= l(eta_hat) - eta_hat' Gamma^{-1} eta_hat / 2
//             - log det(I + Gamma W(eta_hat)) / 2,
// all of it n-dimensional. Exact for the linear family.
struct LaplaceMlState {
  Vector eta_mode;
  double log_ml = 0.0;
  double jitter = 0.0;  // ridge added to Gamma when it was near singular
  FitState fit;
};

LaplaceMlState laplace_log_ml(const Matrix& gamma, const ResponseSpec& response,
                              const IwlsControls& ctrl = {});

struct MlOptions {
  IwlsControls iwls;
  std::optional<std::vector<Index>> preferred;  // two-stage preferential run
};

// Penalty tuning by marginal likelihood: same annealing + Nelder-Mead/Brent
// strategy, evidence instead of CV utility. Supports paired Grams and
// preferential staging; unpenalized blocks are not supported.
TuneResult tune_ml(const BlockedDesign& design, const GramSet& grams,
                   const ResponseSpec& response, const TunerConfig& cfg,
                   const MlOptions& opts = {},
                   const std::vector<bool>& fixed_mask = {});

}  // namespace gramridge
