#pragma once

#include "gramridge/cv.hpp"
#include "gramridge/family.hpp"
#include "gramridge/folds.hpp"
#include "gramridge/optimize.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

// Thin SVD of one block, X = R V' with R = U D (n x r). Ridge fits against R
// with penalty lambda I_r reproduce the block's linear predictors exactly, so
// one decomposition serves every fold and every candidate lambda.
struct SvdCache {
  Matrix R;  // n x r
  Matrix V;  // p x r, orthonormal columns
  Vector D;  // singular values, length r
  Index rank = 0;

  static SvdCache compute(const Matrix& x);
};

// Single-block cross-validated log-likelihood as a function of lambda,
// evaluated through the cached SVD.
double uni_penalty_cvl(const SvdCache& svd, const ResponseSpec& response,
                       const FoldPlan& plan, double lambda,
                       const IwlsControls& ctrl = {});

// Starting penalty for one block: the lambda maximizing single-block CVL over
// a log grid refined by Brent.
double init_uni_penalty(const Matrix& block, const ResponseSpec& response,
                        const FoldPlan& plan, const TunerConfig& cfg = {},
                        const IwlsControls& ctrl = {});

}  // namespace gramridge
