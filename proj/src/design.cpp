#include "gramridge/design.hpp"

#include <Eigen/QR>

#include <cmath>
#include <sstream>
#include <utility>

namespace gramridge {

namespace {

void check_unpenalized_rank(const Matrix& x1) {
  if (x1.cols() == 0) return;
  Eigen::ColPivHouseholderQR<Matrix> qr(x1);
  if (qr.rank() < x1.cols()) {
    std::ostringstream msg;
    msg << "unpenalized block is rank deficient (rank " << qr.rank() << " < "
        << x1.cols() << " columns); dependent columns:";
    const auto perm = qr.colsPermutation().indices();
    for (Index j = qr.rank(); j < x1.cols(); ++j) msg << ' ' << perm(j);
    throw ConfigError(msg.str());
  }
}

}  // namespace

BlockedDesign::BlockedDesign(std::vector<Matrix> blocks,
                             std::vector<std::string> block_names,
                             std::optional<Matrix> unpenalized,
                             std::optional<PairedSpec> paired)
    : blocks_(std::move(blocks)),
      block_names_(std::move(block_names)),
      unpenalized_(std::move(unpenalized)),
      paired_(paired) {
  if (blocks_.empty() && !unpenalized_)
    throw ConfigError("design needs at least one block");
  n_ = blocks_.empty() ? unpenalized_->rows() : blocks_.front().rows();
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (blocks_[b].rows() != n_) {
      std::ostringstream msg;
      msg << "block " << b << " has " << blocks_[b].rows()
          << " rows, expected " << n_;
      throw ConfigError(msg.str());
    }
  }
  if (unpenalized_) {
    if (unpenalized_->rows() != n_)
      throw ConfigError("unpenalized block row count does not match design");
    if (unpenalized_->cols() > n_)
      throw ConfigError("unpenalized block has more columns than samples");
    check_unpenalized_rank(*unpenalized_);
  }
  if (block_names_.empty()) {
    block_names_.resize(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      block_names_[b] = "block" + std::to_string(b);
  } else if (block_names_.size() != blocks_.size()) {
    throw ConfigError("block name count does not match block count");
  }
  if (paired_) {
    const Index a = paired_->block_a;
    const Index b = paired_->block_b;
    if (a < 0 || b < 0 || a >= num_blocks() || b >= num_blocks() || a == b)
      throw ConfigError("paired block indices out of range");
    if (block(a).cols() != block(b).cols())
      throw ConfigError("paired blocks must have the same column count");
  }
}

Index BlockedDesign::block_index(const std::string& name) const {
  for (std::size_t b = 0; b < block_names_.size(); ++b)
    if (block_names_[b] == name) return static_cast<Index>(b);
  throw ConfigError("unknown block name: " + name);
}

Index BlockedDesign::total_penalized_cols() const {
  Index p = 0;
  for (const auto& b : blocks_) p += b.cols();
  return p;
}

BlockedDesign BlockedDesign::rows(const IndexList& idx) const {
  for (Index i : idx)
    if (i < 0 || i >= n_) throw ConfigError("row index out of range");
  std::vector<Matrix> sub;
  sub.reserve(blocks_.size());
  for (const auto& b : blocks_) sub.push_back(b(idx, Eigen::all));
  std::optional<Matrix> unpen;
  if (unpenalized_) unpen = (*unpenalized_)(idx, Eigen::all);
  return BlockedDesign(std::move(sub), block_names_, std::move(unpen), paired_);
}

BlockedDesign BlockedDesign::select_blocks(const std::vector<Index>& keep) const {
  std::vector<Matrix> sub;
  std::vector<std::string> names;
  sub.reserve(keep.size());
  for (Index b : keep) {
    sub.push_back(block(b));
    names.push_back(block_names_.at(static_cast<std::size_t>(b)));
  }
  std::optional<PairedSpec> paired;
  if (paired_) {
    Index na = -1, nb = -1;
    for (std::size_t j = 0; j < keep.size(); ++j) {
      if (keep[j] == paired_->block_a) na = static_cast<Index>(j);
      if (keep[j] == paired_->block_b) nb = static_cast<Index>(j);
    }
    if ((na >= 0) != (nb >= 0))
      throw ConfigError("cannot keep only one block of a paired pair");
    if (na >= 0) paired = PairedSpec{na, nb};
  }
  return BlockedDesign(std::move(sub), std::move(names), unpenalized_, paired);
}

PairedTriple paired_param_transform(double t1, double t2, double tc,
                                    PairedParametrization par) {
  if (!(t1 > 0.0) || !(t2 > 0.0))
    throw ConfigError("paired penalties t1, t2 must be positive");
  if (tc < 0.0) throw ConfigError("paired coupling tc must be nonnegative");
  PairedTriple out;
  if (par == PairedParametrization::additive) {
    out = {t1 + tc, t2 + tc, tc};
  } else {
    out = {t1 * (1.0 + tc), t2 * (1.0 + tc), std::sqrt(t1 * t2) * tc};
  }
  if (!(out.lambda1 * out.lambda2 > out.lambda3 * out.lambda3) &&
      out.lambda3 != 0.0)
    throw ConfigError("paired penalty is not positive definite");
  return out;
}

PenaltyConfig::PenaltyConfig(Vector lambdas, std::vector<bool> fixed,
                             std::optional<PairedTriple> paired,
                             std::optional<PairedSpec> paired_blocks)
    : lambdas_(std::move(lambdas)),
      fixed_(std::move(fixed)),
      paired_(paired),
      paired_blocks_(paired_blocks) {
  for (Index b = 0; b < lambdas_.size(); ++b)
    if (!(lambdas_(b) > 0.0))
      throw ConfigError("penalty lambda must be positive (block " +
                        std::to_string(b) + ")");
  if (fixed_.empty())
    fixed_.assign(static_cast<std::size_t>(lambdas_.size()), false);
  if (static_cast<Index>(fixed_.size()) != lambdas_.size())
    throw ConfigError("fixed mask length does not match penalty count");
  if (paired_.has_value() != paired_blocks_.has_value())
    throw ConfigError("paired triple and paired block indices must come together");
  if (paired_) {
    const Index a = paired_blocks_->block_a;
    const Index b = paired_blocks_->block_b;
    if (a < 0 || b < 0 || a >= lambdas_.size() || b >= lambdas_.size() || a == b)
      throw ConfigError("paired block indices out of range");
    // Keep the lambda vector authoritative for the pair's marginal penalties.
    lambdas_(a) = paired_->lambda1;
    lambdas_(b) = paired_->lambda2;
    const double det = paired_->lambda1 * paired_->lambda2 -
                       paired_->lambda3 * paired_->lambda3;
    if (!(det > 0.0))
      throw ConfigError("paired penalty is not positive definite");
  }
}

Eigen::Matrix2d PenaltyConfig::lambda_s() const {
  if (!paired_) throw ConfigError("no paired penalty configured");
  Eigen::Matrix2d m;
  m << paired_->lambda1, -paired_->lambda3, -paired_->lambda3, paired_->lambda2;
  return m;
}

Eigen::Matrix2d PenaltyConfig::omega_s() const {
  if (!paired_) throw ConfigError("no paired penalty configured");
  Eigen::Matrix2d m;
  // lambda3 == 0 reduces exactly to the unpaired inverse.
  if (paired_->lambda3 == 0.0) {
    m << 1.0 / paired_->lambda1, 0.0, 0.0, 1.0 / paired_->lambda2;
    return m;
  }
  const double det =
      paired_->lambda1 * paired_->lambda2 - paired_->lambda3 * paired_->lambda3;
  m << paired_->lambda2 / det, paired_->lambda3 / det, paired_->lambda3 / det,
      paired_->lambda1 / det;
  return m;
}

}  // namespace gramridge
