#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gramridge/types.hpp"

namespace gramridge {

// Two penalized blocks whose columns correspond one-to-one and whose
// coefficients are coupled by a 2x2 block penalty.
struct PairedSpec {
  Index block_a = -1;
  Index block_b = -1;
};

// The n x p design split into ordered penalized blocks plus an optional
// unpenalized block (intercept, clinical covariates, ...).
class BlockedDesign {
 public:
  BlockedDesign(std::vector<Matrix> blocks,
                std::vector<std::string> block_names = {},
                std::optional<Matrix> unpenalized = std::nullopt,
                std::optional<PairedSpec> paired = std::nullopt);

  Index n() const { return n_; }
  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  const Matrix& block(Index b) const { return blocks_.at(static_cast<std::size_t>(b)); }
  const std::vector<Matrix>& blocks() const { return blocks_; }

  bool has_unpenalized() const { return unpenalized_.has_value(); }
  const Matrix& unpenalized() const { return *unpenalized_; }
  const Matrix* unpenalized_ptr() const { return unpenalized_ ? &*unpenalized_ : nullptr; }
  Index unpenalized_cols() const { return unpenalized_ ? unpenalized_->cols() : 0; }

  const std::vector<std::string>& block_names() const { return block_names_; }
  Index block_index(const std::string& name) const;
  const std::optional<PairedSpec>& paired() const { return paired_; }

  Index total_penalized_cols() const;

  // Row-subset design (fold slicing, double CV).
  BlockedDesign rows(const IndexList& idx) const;
  // Sub-design keeping only the listed penalized blocks, in the given order;
  // the unpenalized block is always kept.
  BlockedDesign select_blocks(const std::vector<Index>& keep) const;

 private:
  Index n_ = 0;
  std::vector<Matrix> blocks_;
  std::vector<std::string> block_names_;
  std::optional<Matrix> unpenalized_;
  std::optional<PairedSpec> paired_;
};

enum class PairedParametrization { additive, scaled };

// Internal paired-penalty triple; the per-pair block penalty is
// [[lambda1, -lambda3], [-lambda3, lambda2]].
struct PairedTriple {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
};

// Maps a user-facing paired triple (t1, t2, tc) onto the internal one.
//   additive: (t1 + tc, t2 + tc, tc)
//   scaled:   (t1 (1 + tc), t2 (1 + tc), sqrt(t1 t2) tc)
PairedTriple paired_param_transform(double t1, double t2, double tc,
                                    PairedParametrization par);

// Penalty vector (one lambda per block), per-block fixed flags for staged
// tuning, and the optional paired coupling. When a paired triple is present
// its (lambda1, lambda2) always mirror the lambdas of the paired blocks.
class PenaltyConfig {
 public:
  explicit PenaltyConfig(Vector lambdas, std::vector<bool> fixed = {},
                         std::optional<PairedTriple> paired = std::nullopt,
                         std::optional<PairedSpec> paired_blocks = std::nullopt);

  Index num_blocks() const { return lambdas_.size(); }
  const Vector& lambdas() const { return lambdas_; }
  double lambda(Index b) const { return lambdas_(b); }
  const std::vector<bool>& fixed_mask() const { return fixed_; }
  bool is_fixed(Index b) const { return fixed_.at(static_cast<std::size_t>(b)); }

  bool has_paired() const { return paired_.has_value(); }
  const PairedTriple& paired() const { return *paired_; }
  const std::optional<PairedSpec>& paired_blocks() const { return paired_blocks_; }

  // 2x2 block penalty of the paired pair and its inverse.
  Eigen::Matrix2d lambda_s() const;
  Eigen::Matrix2d omega_s() const;

 private:
  Vector lambdas_;
  std::vector<bool> fixed_;
  std::optional<PairedTriple> paired_;
  std::optional<PairedSpec> paired_blocks_;
};

}  // namespace gramridge
