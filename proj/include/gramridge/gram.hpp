#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gramridge/design.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

// Pluggable Gram map for one block. cross(A, B) returns the A.rows() x
// B.rows() matrix of kernel evaluations between rows of A and rows of B; an
// empty function means the inner product (linear kernel).
struct GramKernel {
  std::string tag = "linear";
  std::function<Matrix(const Matrix&, const Matrix&)> cross;
};

// Cached n x n per-block Gram matrices Sigma_b (and the swap Gram Sigma_Q for
// a paired pair). Immutable after construction; safe to share across workers.
class GramSet {
 public:
  GramSet(std::vector<Matrix> sigmas, std::optional<Matrix> sigma_q,
          std::vector<std::string> kernel_tags,
          std::optional<PairedSpec> paired);

  Index n() const { return n_; }
  Index num_blocks() const { return static_cast<Index>(sigmas_.size()); }
  const std::vector<Matrix>& sigmas() const { return sigmas_; }
  const Matrix& sigma(Index b) const { return sigmas_.at(static_cast<std::size_t>(b)); }
  bool has_sigma_q() const { return sigma_q_.has_value(); }
  const Matrix& sigma_q() const { return *sigma_q_; }
  const std::vector<std::string>& kernel_tags() const { return kernel_tags_; }
  const std::optional<PairedSpec>& paired() const { return paired_; }
  bool all_linear() const;

  // Square row/column slice of every Gram (fold restriction).
  GramSet subset(const IndexList& idx) const;
  // Keep only the listed blocks, in the given order.
  GramSet select_blocks(const std::vector<Index>& keep) const;

 private:
  Index n_ = 0;
  std::vector<Matrix> sigmas_;
  std::optional<Matrix> sigma_q_;
  std::vector<std::string> kernel_tags_;
  std::optional<PairedSpec> paired_;
};

// Computes Sigma_b = X_b X_b' per block (or the block's kernel Gram), plus the
// swap Gram for a paired pair. The only operation whose cost grows with p.
GramSet precompute_grams(const BlockedDesign& design,
                         const std::vector<GramKernel>& kernels = {});

// Gamma = sum_b lambda_b^{-1} Sigma_b; a paired pair contributes
// omega1 Sigma_a + omega2 Sigma_b + omega3 Sigma_Q instead. O(B n^2).
Matrix assemble_gamma(const GramSet& grams, const PenaltyConfig& penalties);

// Exact row/column extraction; Gamma[out, in] etc. with no recomputation.
Matrix submatrix_gamma(const Matrix& gamma, const IndexList& rows,
                       const IndexList& cols);

// Cross-Gram of new samples against training samples, assembled with the same
// penalties: Gamma_new = sum_b lambda_b^{-1} K(X_b_new, X_b_train).
Matrix assemble_gamma_cross(const BlockedDesign& train,
                            const std::vector<Matrix>& new_blocks,
                            const PenaltyConfig& penalties,
                            const std::vector<GramKernel>& kernels = {});

}  // namespace gramridge
