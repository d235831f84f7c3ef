#pragma once

#include "gramridge/types.hpp"

namespace gramridge {

// Weights below this floor are clamped before forming 1/w; keeps the dual-form
// solve conditioned when logistic weights collapse near 0/1.
inline constexpr double kWeightFloor = 1e-10;

// Factors of the sample-weighted hat matrix. For any new-sample cross Gram
// Gamma_new and unpenalized rows X1_new, the prediction hat matrix is
//   H_new = X1_new * K + Gamma_new * M,
// so eta_new = X1_new * (K L) + Gamma_new * (M L) for the linearized
// response L. With no unpenalized block K is 0 x n and H = Gamma * M.
struct HatFactors {
  Matrix H;      // n x n hat matrix
  Matrix K;      // p1 x n (0 x n when no unpenalized block)
  Matrix M;      // n x n
  Matrix gamma;  // the penalized-block Gamma the factors were built from
};

// Dual-form hat matrix H = Gamma - Gamma (W^{-1} + Gamma)^{-1} Gamma,
// equal to X (Lambda + X' W X)^{-1} X' by the Woodbury identity. All work is
// in n-dimensional space.
HatFactors hat_matrix(const Matrix& gamma, const Vector& weights);

// Hat matrix when an unpenalized block X1 (full column rank) sits alongside
// the penalized blocks whose Gamma is gamma_pen. Splits the fit through the
// weighted projector onto the complement of X1's column space, so the
// rank-deficient full penalty matrix is never inverted.
HatFactors hat_matrix_unpenalized(const Matrix& gamma_pen,
                                  const Vector& weights, const Matrix& unpen);

// Held-out hat matrix H_out = Gamma[out,in] -
// Gamma[out,in] (W_in^{-1} + Gamma[in,in])^{-1} Gamma[in,in], built purely
// from slices of the full-data Gamma.
Matrix cv_hat_matrix(const Matrix& gamma, const Vector& weights_in,
                     const IndexList& in_idx, const IndexList& out_idx);

}  // namespace gramridge
