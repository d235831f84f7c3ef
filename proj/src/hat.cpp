#include "gramridge/hat.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <iostream>
#include <sstream>

#include "gramridge/gram.hpp"

namespace gramridge {

namespace {

Vector clamped(const Vector& w) { return w.cwiseMax(kWeightFloor); }

std::string condition_estimate(const Matrix& s) {
  Eigen::JacobiSVD<Matrix> svd(s);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  std::ostringstream msg;
  msg << "condition estimate "
      << (smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity());
  return msg.str();
}

// Solves S T = B for symmetric positive definite S, falling back to a pivoted
// general factorization with a warning if the SPD factorization fails.
Matrix solve_sym(const Matrix& s, const Matrix& b) {
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  std::cerr << "gramridge: SPD factorization of (1/W + Gamma) failed; "
               "falling back to pivoted LU\n";
  Eigen::FullPivLU<Matrix> lu(s);
  if (!lu.isInvertible())
    throw NumericError("(1/W + Gamma) numerically singular; " +
                       condition_estimate(s));
  return lu.solve(b);
}

}  // namespace

HatFactors hat_matrix(const Matrix& gamma, const Vector& weights) {
  const Index n = gamma.rows();
  if (gamma.cols() != n) throw ConfigError("Gamma must be square");
  if (weights.size() != n)
    throw ConfigError("weight vector length does not match Gamma");

  const Vector w = clamped(weights);
  Matrix s = gamma;
  s.diagonal() += w.cwiseInverse();
  const Matrix t = solve_sym(s, gamma);  // (1/W + Gamma)^{-1} Gamma

  HatFactors out;
  out.M = Matrix::Identity(n, n) - t;
  out.H = gamma * out.M;
  out.H = ((out.H + out.H.transpose()) * 0.5).eval();
  out.K = Matrix(0, n);
  out.gamma = gamma;
  return out;
}

HatFactors hat_matrix_unpenalized(const Matrix& gamma_pen,
                                  const Vector& weights, const Matrix& unpen) {
  if (unpen.cols() == 0) return hat_matrix(gamma_pen, weights);
  const Index n = gamma_pen.rows();
  const Index p1 = unpen.cols();
  if (gamma_pen.cols() != n) throw ConfigError("Gamma must be square");
  if (unpen.rows() != n)
    throw ConfigError("unpenalized block row count does not match Gamma");
  if (weights.size() != n)
    throw ConfigError("weight vector length does not match Gamma");

  const Vector w = clamped(weights);
  const Vector ws = w.cwiseSqrt();
  const Vector wis = ws.cwiseInverse();

  const Matrix x1w = ws.asDiagonal() * unpen;
  Eigen::ColPivHouseholderQR<Matrix> qr(x1w);
  if (qr.rank() < p1) {
    std::ostringstream msg;
    msg << "unpenalized block is rank deficient under the current weights; "
           "dependent columns:";
    const auto perm = qr.colsPermutation().indices();
    for (Index j = qr.rank(); j < p1; ++j) msg << ' ' << perm(j);
    throw NumericError(msg.str());
  }

  const Matrix a = x1w.transpose() * x1w;
  Eigen::LLT<Matrix> llt_a(a);
  if (llt_a.info() != Eigen::Success)
    throw NumericError("Gram of the weighted unpenalized block is singular; " +
                       condition_estimate(a));

  // P1 = I - X1w (X1w' X1w)^{-1} X1w': projector onto the orthogonal
  // complement of the weighted unpenalized columns.
  Matrix p1w = -x1w * llt_a.solve(x1w.transpose());
  p1w.diagonal().array() += 1.0;

  const Matrix gw = ws.asDiagonal() * gamma_pen * ws.asDiagonal();
  const Matrix pg = p1w * gw;
  Matrix b = pg;
  b.diagonal().array() += 1.0;  // I + P1 Gw  (not symmetric)
  Eigen::PartialPivLU<Matrix> lu(b);
  const Matrix t = lu.solve(pg);

  HatFactors out;
  // M = W^{1/2} (I - (I + P1 Gw)^{-1} P1 Gw) P1 W^{-1/2}
  Matrix inner = Matrix::Identity(n, n) - t;
  out.M = ws.asDiagonal() * (inner * p1w) * wis.asDiagonal();
  const Matrix h2 = gamma_pen * out.M;
  // K = (X1w' X1w)^{-1} X1w' (I - W^{1/2} H2 W^{1/2}) W^{-1/2}
  Matrix e = -(ws.asDiagonal() * h2);
  e.diagonal() += wis;
  out.K = llt_a.solve(x1w.transpose() * e);
  out.H = unpen * out.K + h2;
  out.H = ((out.H + out.H.transpose()) * 0.5).eval();
  out.gamma = gamma_pen;
  return out;
}

Matrix cv_hat_matrix(const Matrix& gamma, const Vector& weights_in,
                     const IndexList& in_idx, const IndexList& out_idx) {
  if (static_cast<Index>(in_idx.size()) != weights_in.size())
    throw ConfigError("weights must be defined on the in-set");
  const Matrix g_ii = submatrix_gamma(gamma, in_idx, in_idx);
  const Matrix g_oi = submatrix_gamma(gamma, out_idx, in_idx);
  if (out_idx.empty()) return g_oi;

  const Vector w = clamped(weights_in);
  Matrix s = g_ii;
  s.diagonal() += w.cwiseInverse();
  return g_oi - g_oi * solve_sym(s, g_ii);
}

}  // namespace gramridge
