#include "gramridge/cv.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gramridge/parallel.hpp"
#include "gramridge/tune.hpp"

namespace gramridge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct FoldOutcome {
  bool failed = false;
  std::string message;
  double heldout_loglik = 0.0;
  IndexList out;
  Vector predictions;  // linear predictors on the out rows (offset excluded)
};

FoldOutcome run_fold(const Matrix& gamma, const Matrix* x1,
                     const ResponseSpec& response, const FoldPlan& plan,
                     int repeat, int fold, bool want_loglik,
                     const CvOptions& opts) {
  FoldOutcome oc;
  oc.out = plan.out_indices(repeat, fold);
  const IndexList in = plan.in_indices(repeat, fold);
  const ResponseSpec resp_in = response.subset(in);
  try {
    const Matrix g_ii = submatrix_gamma(gamma, in, in);
    std::optional<Matrix> x1_in;
    if (x1 != nullptr && x1->cols() > 0) x1_in = (*x1)(in, Eigen::all);
    const FitState fit =
        iwls_fit(g_ii, x1_in ? &*x1_in : nullptr, resp_in, opts.iwls);
    if (!fit.converged) {
      oc.failed = true;
      oc.message = "fold fit did not converge";
      return oc;
    }
    const Matrix g_oi = submatrix_gamma(gamma, oc.out, in);
    Vector eta_out = g_oi * fit.mvec;
    if (x1_in) eta_out += (*x1)(oc.out, Eigen::all) * fit.beta_unpen;
    oc.predictions = eta_out;
    if (want_loglik) {
      const ResponseSpec resp_out = response.subset(oc.out);
      const BaselineHazard* baseline = fit.baseline ? &*fit.baseline : nullptr;
      std::optional<BaselineHazard> refit;
      if (baseline != nullptr && opts.cox_refit_baseline) {
        // Alternative policy: baseline re-estimated over all samples under
        // the fold fit's linear predictors.
        Vector lp_all = response.offset_or_zero();
        for (std::size_t i = 0; i < in.size(); ++i)
          lp_all(in[i]) += fit.eta(static_cast<Index>(i));
        for (std::size_t i = 0; i < oc.out.size(); ++i)
          lp_all(oc.out[i]) += eta_out(static_cast<Index>(i));
        refit = breslow(lp_all, response);
        baseline = &*refit;
      }
      oc.heldout_loglik =
          loglik(resp_out.offset_or_zero() + eta_out, resp_out, baseline);
    }
  } catch (const std::exception& e) {
    oc.failed = true;
    oc.message = e.what();
  }
  return oc;
}

}  // namespace

double cv_utility(const BlockedDesign& design, const GramSet& grams,
                  const PenaltyConfig& penalties, const ResponseSpec& response,
                  const FoldPlan& plan, const UtilitySpec& utility,
                  const CvOptions& opts) {
  if (design.n() != response.n() || grams.n() != response.n())
    throw ConfigError("design, Grams and response disagree on sample count");
  if (plan.n() != response.n())
    throw ConfigError("fold plan does not match response length");

  // One Gamma per candidate, shared read-only by every fold worker.
  const Matrix gamma = assemble_gamma(grams, penalties);
  const Matrix* x1 = design.unpenalized_ptr();
  const bool want_loglik = !utility.custom && utility.criterion == Criterion::cvl;

  double total = 0.0;
  for (int rep = 0; rep < plan.repeats; ++rep) {
    std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(plan.k));
    parallel_for(plan.k, opts.workers, [&](int f) {
      outcomes[static_cast<std::size_t>(f)] =
          run_fold(gamma, x1, response, plan, rep, f, want_loglik, opts);
    });

    double repeat_value = 0.0;
    bool failed = false;
    for (const auto& oc : outcomes) {
      if (oc.failed) {
        failed = true;
        if (opts.log) {
          std::ostringstream msg;
          msg << "fold failed (repeat " << rep << "): " << oc.message;
          opts.log(msg.str());
        }
      }
    }
    if (failed) return kNegInf;

    if (want_loglik) {
      for (const auto& oc : outcomes) repeat_value += oc.heldout_loglik;
    } else {
      Vector pooled(response.n());
      for (const auto& oc : outcomes)
        for (std::size_t i = 0; i < oc.out.size(); ++i)
          pooled(oc.out[i]) = oc.predictions(static_cast<Index>(i));
      repeat_value = utility.custom
                         ? utility.custom(pooled, response)
                         : evaluate_metric(utility.criterion, pooled, response);
      if (std::isnan(repeat_value)) return kNegInf;
    }
    total += repeat_value;
  }
  return total / static_cast<double>(plan.repeats);
}

std::vector<SplitReport> double_cv(const BlockedDesign& design,
                                   const GramSet& grams,
                                   const ResponseSpec& response, int outer_k,
                                   int inner_k, int inner_repeats,
                                   const TunerConfig& cfg,
                                   const UtilitySpec& utility,
                                   const CvOptions& opts,
                                   std::uint64_t outer_seed) {
  auto tuner = [&](const BlockedDesign& design_tr, const GramSet& grams_tr,
                   const ResponseSpec& resp_tr, int split) {
    TunerConfig inner_cfg = cfg;
    inner_cfg.seed = cfg.seed + static_cast<std::uint64_t>(split);
    const FoldPlan inner =
        make_folds(resp_tr, inner_k, inner_repeats, inner_cfg.seed);
    return tune(design_tr, grams_tr, resp_tr, inner, utility, inner_cfg, {},
                opts);
  };
  return double_cv_with(design, grams, response, outer_k, tuner, utility, opts,
                        outer_seed);
}

std::vector<SplitReport> double_cv_with(const BlockedDesign& design,
                                        const GramSet& grams,
                                        const ResponseSpec& response,
                                        int outer_k, const OuterTuner& tuner,
                                        const UtilitySpec& utility,
                                        const CvOptions& opts,
                                        std::uint64_t outer_seed) {
  const FoldPlan outer = make_folds(response, outer_k, 1, outer_seed);
  std::vector<SplitReport> reports;
  for (int s = 0; s < outer_k; ++s) {
    const IndexList train = outer.in_indices(0, s);
    const IndexList test = outer.out_indices(0, s);
    const BlockedDesign design_tr = design.rows(train);
    const GramSet grams_tr = grams.subset(train);
    const ResponseSpec resp_tr = response.subset(train);

    const TuneResult tuned = tuner(design_tr, grams_tr, resp_tr, s);

    const Matrix gamma = assemble_gamma(grams_tr, tuned.penalties);
    const FitState fit =
        iwls_fit(gamma, design_tr.unpenalized_ptr(), resp_tr, opts.iwls);

    // Held-out linear predictors through the sliced full-data Gamma.
    const Matrix gamma_full = assemble_gamma(grams, tuned.penalties);
    const Matrix g_oi = submatrix_gamma(gamma_full, test, train);
    Vector eta_test = g_oi * fit.mvec;
    if (design.has_unpenalized())
      eta_test += design.unpenalized()(test, Eigen::all) * fit.beta_unpen;

    const ResponseSpec resp_test = response.subset(test);
    SplitReport rep;
    rep.split = s;
    rep.lambdas = tuned.penalties.lambdas();
    if (tuned.penalties.has_paired())
      rep.lambda3 = tuned.penalties.paired().lambda3;
    if (utility.custom) {
      rep.criterion_value = utility.custom(eta_test, resp_test);
    } else if (utility.criterion == Criterion::cvl) {
      rep.criterion_value =
          loglik(resp_test.offset_or_zero() + eta_test, resp_test,
                 fit.baseline ? &*fit.baseline : nullptr);
    } else {
      rep.criterion_value =
          evaluate_metric(utility.criterion, eta_test, resp_test);
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace gramridge
