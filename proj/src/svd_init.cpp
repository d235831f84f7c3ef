#include "gramridge/svd_init.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

#include "gramridge/iwls.hpp"

namespace gramridge {

SvdCache SvdCache::compute(const Matrix& x) {
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double thresh = std::max(x.rows(), x.cols()) *
                        std::numeric_limits<double>::epsilon() *
                        (sv.size() > 0 ? sv(0) : 0.0);
  Index r = 0;
  while (r < sv.size() && sv(r) > thresh) ++r;
  SvdCache cache;
  cache.rank = r;
  cache.D = sv.head(r);
  cache.R = svd.matrixU().leftCols(r) * cache.D.asDiagonal();
  cache.V = svd.matrixV().leftCols(r);
  return cache;
}

double uni_penalty_cvl(const SvdCache& svd, const ResponseSpec& response,
                       const FoldPlan& plan, double lambda,
                       const IwlsControls& ctrl) {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  const Index r = svd.rank;
  const Vector pen = Vector::Constant(r, lambda);
  double total = 0.0;
  for (int rep = 0; rep < plan.repeats; ++rep) {
    double repeat_cvl = 0.0;
    for (int f = 0; f < plan.k; ++f) {
      const IndexList in = plan.in_indices(rep, f);
      const IndexList out = plan.out_indices(rep, f);
      const Matrix r_in = svd.R(in, Eigen::all);
      const ResponseSpec resp_in = response.subset(in);
      DenseFit fit;
      try {
        fit = dense_iwls(r_in, pen, resp_in, ctrl);
      } catch (const NumericError&) {
        return -std::numeric_limits<double>::infinity();
      }
      if (!fit.converged) return -std::numeric_limits<double>::infinity();
      const Vector eta_out =
          svd.R(out, Eigen::all) * fit.beta + response.subset(out).offset_or_zero();
      repeat_cvl += loglik(eta_out, response.subset(out),
                           fit.baseline ? &*fit.baseline : nullptr);
    }
    total += repeat_cvl;
  }
  return total / static_cast<double>(plan.repeats);
}

double init_uni_penalty(const Matrix& block, const ResponseSpec& response,
                        const FoldPlan& plan, const TunerConfig& cfg,
                        const IwlsControls& ctrl) {
  if (block.rows() != response.n())
    throw ConfigError("block and response disagree on sample count");
  bool any_varying = false;
  for (Index j = 0; j < block.cols() && !any_varying; ++j)
    any_varying = block.col(j).maxCoeff() > block.col(j).minCoeff();
  if (!any_varying)
    throw ConfigError("cannot initialize a penalty for an all-constant block");

  const SvdCache svd = SvdCache::compute(block);
  auto objective = [&](double loglam) {
    return uni_penalty_cvl(svd, response, plan, std::exp(loglam), ctrl);
  };

  const int grid = std::max(2, cfg.init_grid_points);
  double best_x = cfg.log_lower;
  double best_u = -std::numeric_limits<double>::infinity();
  const double step = (cfg.log_upper - cfg.log_lower) / (grid - 1);
  for (int i = 0; i < grid; ++i) {
    const double x = cfg.log_lower + step * i;
    const double u = objective(x);
    if (u > best_u) {
      best_u = u;
      best_x = x;
    }
  }
  if (best_u == -std::numeric_limits<double>::infinity())
    throw NumericError("single-block CV failed at every grid penalty");

  const double lo = std::max(cfg.log_lower, best_x - step);
  const double hi = std::min(cfg.log_upper, best_x + step);
  double refined =
      brent_maximize(objective, best_x, lo, hi, cfg.init_brent_tol, 60);
  refined = parabolic_polish(objective, refined, cfg.log_lower, cfg.log_upper);
  // Bound-region optima are reported exactly at the bound.
  if (refined - cfg.log_lower < 1e-3) refined = cfg.log_lower;
  if (cfg.log_upper - refined < 1e-3) refined = cfg.log_upper;
  return std::exp(refined);
}

}  // namespace gramridge
