#include "gramridge/gram.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace gramridge {

namespace {

Matrix linear_cross(const Matrix& a, const Matrix& b) {
  return a * b.transpose();
}

const GramKernel kLinearKernel{};

const GramKernel& kernel_for(const std::vector<GramKernel>& kernels, Index b) {
  if (kernels.empty()) return kLinearKernel;
  return kernels.at(static_cast<std::size_t>(b));
}

Matrix apply_cross(const GramKernel& k, const Matrix& a, const Matrix& b) {
  return k.cross ? k.cross(a, b) : linear_cross(a, b);
}

void check_symmetric(const Matrix& s, const std::string& what) {
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale)
    throw NumericError(what + " is not symmetric (max asymmetry " +
                       std::to_string(asym / scale) + " relative)");
}

}  // namespace

GramSet::GramSet(std::vector<Matrix> sigmas, std::optional<Matrix> sigma_q,
                 std::vector<std::string> kernel_tags,
                 std::optional<PairedSpec> paired)
    : sigmas_(std::move(sigmas)),
      sigma_q_(std::move(sigma_q)),
      kernel_tags_(std::move(kernel_tags)),
      paired_(paired) {
  if (sigmas_.empty() && !sigma_q_)
    throw ConfigError("GramSet needs at least one block");
  n_ = sigmas_.empty() ? sigma_q_->rows() : sigmas_.front().rows();
  for (std::size_t b = 0; b < sigmas_.size(); ++b) {
    if (sigmas_[b].rows() != n_ || sigmas_[b].cols() != n_)
      throw ConfigError("Gram matrix dimensions disagree across blocks");
    check_symmetric(sigmas_[b], "Sigma_" + std::to_string(b));
  }
  if (kernel_tags_.empty())
    kernel_tags_.assign(sigmas_.size(), "linear");
  if (kernel_tags_.size() != sigmas_.size())
    throw ConfigError("kernel tag count does not match block count");
  if (sigma_q_) {
    if (!paired_) throw ConfigError("swap Gram present without paired blocks");
    if (sigma_q_->rows() != n_ || sigma_q_->cols() != n_)
      throw ConfigError("swap Gram dimensions disagree");
    check_symmetric(*sigma_q_, "Sigma_Q");
  }
}

bool GramSet::all_linear() const {
  for (const auto& t : kernel_tags_)
    if (t != "linear") return false;
  return true;
}

GramSet GramSet::subset(const IndexList& idx) const {
  std::vector<Matrix> sub;
  sub.reserve(sigmas_.size());
  for (const auto& s : sigmas_) sub.push_back(submatrix_gamma(s, idx, idx));
  std::optional<Matrix> q;
  if (sigma_q_) q = submatrix_gamma(*sigma_q_, idx, idx);
  return GramSet(std::move(sub), std::move(q), kernel_tags_, paired_);
}

GramSet GramSet::select_blocks(const std::vector<Index>& keep) const {
  std::vector<Matrix> sub;
  std::vector<std::string> tags;
  for (Index b : keep) {
    sub.push_back(sigma(b));
    tags.push_back(kernel_tags_.at(static_cast<std::size_t>(b)));
  }
  std::optional<Matrix> q;
  std::optional<PairedSpec> paired;
  if (paired_) {
    Index na = -1, nb = -1;
    for (std::size_t j = 0; j < keep.size(); ++j) {
      if (keep[j] == paired_->block_a) na = static_cast<Index>(j);
      if (keep[j] == paired_->block_b) nb = static_cast<Index>(j);
    }
    if ((na >= 0) != (nb >= 0))
      throw ConfigError("cannot keep only one block of a paired pair");
    if (na >= 0) {
      paired = PairedSpec{na, nb};
      q = sigma_q_;
    }
  }
  return GramSet(std::move(sub), std::move(q), std::move(tags), paired);
}

GramSet precompute_grams(const BlockedDesign& design,
                         const std::vector<GramKernel>& kernels) {
  if (!kernels.empty() &&
      static_cast<Index>(kernels.size()) != design.num_blocks())
    throw ConfigError("kernel count does not match block count");
  std::vector<Matrix> sigmas;
  std::vector<std::string> tags;
  sigmas.reserve(static_cast<std::size_t>(design.num_blocks()));
  for (Index b = 0; b < design.num_blocks(); ++b) {
    const GramKernel& k = kernel_for(kernels, b);
    Matrix s = apply_cross(k, design.block(b), design.block(b));
    s = ((s + s.transpose()) * 0.5).eval();  // enforce exact symmetry
    sigmas.push_back(std::move(s));
    tags.push_back(k.tag);
  }
  std::optional<Matrix> sigma_q;
  if (design.paired()) {
    const Index a = design.paired()->block_a;
    const Index b = design.paired()->block_b;
    if (kernel_for(kernels, a).cross || kernel_for(kernels, b).cross)
      throw ConfigError("paired blocks require the linear kernel");
    // X Q X' over interleaved paired columns reduces to the symmetrized
    // cross product of the two blocks; the permutation is never formed.
    Matrix cross = design.block(a) * design.block(b).transpose();
    sigma_q = cross + cross.transpose();
  }
  return GramSet(std::move(sigmas), std::move(sigma_q), std::move(tags),
                 design.paired());
}

Matrix assemble_gamma(const GramSet& grams, const PenaltyConfig& penalties) {
  if (penalties.num_blocks() != grams.num_blocks())
    throw ConfigError("penalty count does not match Gram block count");
  if (penalties.has_paired() && !grams.has_sigma_q())
    throw ConfigError("paired penalty requested but no swap Gram was computed");
  if (penalties.has_paired() && grams.paired() &&
      (penalties.paired_blocks()->block_a != grams.paired()->block_a ||
       penalties.paired_blocks()->block_b != grams.paired()->block_b))
    throw ConfigError("paired block indices disagree between penalties and Grams");

  const Index n = grams.n();
  Matrix gamma = Matrix::Zero(n, n);
  Eigen::Matrix2d omega;
  Index pa = -1, pb = -1;
  bool use_swap = false;
  if (penalties.has_paired()) {
    omega = penalties.omega_s();
    pa = penalties.paired_blocks()->block_a;
    pb = penalties.paired_blocks()->block_b;
    use_swap = omega(0, 1) != 0.0;
  }
  for (Index b = 0; b < grams.num_blocks(); ++b) {
    double coef;
    if (b == pa)
      coef = omega(0, 0);
    else if (b == pb)
      coef = omega(1, 1);
    else
      coef = 1.0 / penalties.lambda(b);
    gamma.noalias() += coef * grams.sigma(b);
  }
  if (use_swap) gamma.noalias() += omega(0, 1) * grams.sigma_q();
  return gamma;
}

Matrix submatrix_gamma(const Matrix& gamma, const IndexList& rows,
                       const IndexList& cols) {
  for (Index i : rows)
    if (i < 0 || i >= gamma.rows())
      throw ConfigError("row index out of range in Gamma extraction");
  for (Index j : cols)
    if (j < 0 || j >= gamma.cols())
      throw ConfigError("column index out of range in Gamma extraction");
  return gamma(rows, cols);
}

Matrix assemble_gamma_cross(const BlockedDesign& train,
                            const std::vector<Matrix>& new_blocks,
                            const PenaltyConfig& penalties,
                            const std::vector<GramKernel>& kernels) {
  if (static_cast<Index>(new_blocks.size()) != train.num_blocks())
    throw ConfigError("new data block count does not match training design");
  if (penalties.num_blocks() != train.num_blocks())
    throw ConfigError("penalty count does not match design block count");
  Index m = -1;
  for (std::size_t b = 0; b < new_blocks.size(); ++b) {
    if (new_blocks[b].cols() != train.block(static_cast<Index>(b)).cols()) {
      std::ostringstream msg;
      msg << "new data block " << b << " has " << new_blocks[b].cols()
          << " columns, training block has "
          << train.block(static_cast<Index>(b)).cols();
      throw ConfigError(msg.str());
    }
    if (m < 0) m = new_blocks[b].rows();
    if (new_blocks[b].rows() != m)
      throw ConfigError("new data blocks disagree on row count");
  }
  if (m < 0) m = 0;

  Matrix gamma = Matrix::Zero(m, train.n());
  Eigen::Matrix2d omega;
  Index pa = -1, pb = -1;
  bool use_swap = false;
  if (penalties.has_paired()) {
    omega = penalties.omega_s();
    pa = penalties.paired_blocks()->block_a;
    pb = penalties.paired_blocks()->block_b;
    use_swap = omega(0, 1) != 0.0;
  }
  for (Index b = 0; b < train.num_blocks(); ++b) {
    const GramKernel& k = kernel_for(kernels, b);
    const Matrix cross =
        apply_cross(k, new_blocks[static_cast<std::size_t>(b)], train.block(b));
    double coef;
    if (b == pa)
      coef = omega(0, 0);
    else if (b == pb)
      coef = omega(1, 1);
    else
      coef = 1.0 / penalties.lambda(b);
    gamma.noalias() += coef * cross;
  }
  if (use_swap) {
    const Matrix swap =
        new_blocks[static_cast<std::size_t>(pa)] * train.block(pb).transpose() +
        new_blocks[static_cast<std::size_t>(pb)] * train.block(pa).transpose();
    gamma.noalias() += omega(0, 1) * swap;
  }
  return gamma;
}

}  // namespace gramridge
