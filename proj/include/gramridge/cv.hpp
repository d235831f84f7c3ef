#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gramridge/design.hpp"
#include "gramridge/folds.hpp"
#include "gramridge/gram.hpp"
#include "gramridge/iwls.hpp"
#include "gramridge/metrics.hpp"
#include "gramridge/optimize.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

struct CvOptions {
  int workers = 1;
  IwlsControls iwls;
  std::function<void(const std::string&)> log;  // fold-failure sink
  // Held-out cox log-likelihood normally uses the training-fold Breslow
  // baseline; this switch re-estimates it on all samples under the fold fit.
  bool cox_refit_baseline = false;
};

// Cross-validated utility of one penalty candidate. Gamma is assembled once
// and sliced per fold; fold fits run concurrently and combine in fold order.
// For cvl the value is the summed held-out log-likelihood per repeat; other
// criteria are computed on pooled held-out predictions per repeat; repeats
// average. A failed fold makes the candidate -inf.
double cv_utility(const BlockedDesign& design, const GramSet& grams,
                  const PenaltyConfig& penalties, const ResponseSpec& response,
                  const FoldPlan& plan, const UtilitySpec& utility,
                  const CvOptions& opts = {});

struct SplitReport {
  int split = 0;
  double criterion_value = 0.0;
  Vector lambdas;
  double lambda3 = 0.0;
};

// Outer performance loop: per outer split, tune on the training part (inner
// CV), fit, predict the held-out part, report the criterion.
std::vector<SplitReport> double_cv(const BlockedDesign& design,
                                   const GramSet& grams,
                                   const ResponseSpec& response, int outer_k,
                                   int inner_k, int inner_repeats,
                                   const TunerConfig& cfg,
                                   const UtilitySpec& utility,
                                   const CvOptions& opts = {},
                                   std::uint64_t outer_seed = 1);

// Same outer loop with a caller-supplied tuner (marginal-likelihood runs).
using OuterTuner = std::function<TuneResult(
    const BlockedDesign&, const GramSet&, const ResponseSpec&, int split)>;
std::vector<SplitReport> double_cv_with(const BlockedDesign& design,
                                        const GramSet& grams,
                                        const ResponseSpec& response,
                                        int outer_k, const OuterTuner& tuner,
                                        const UtilitySpec& utility,
                                        const CvOptions& opts = {},
                                        std::uint64_t outer_seed = 1);

}  // namespace gramridge
