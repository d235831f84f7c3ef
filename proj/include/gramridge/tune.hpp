#pragma once

#include <vector>

#include "gramridge/cv.hpp"
#include "gramridge/optimize.hpp"
#include "gramridge/svd_init.hpp"

namespace gramridge {

// Full tuning pipeline for the cross-validated utility: per-block
// initialization (unless cfg.init_lambdas is set), global annealing sweep,
// then Nelder-Mead (several free penalties) or Brent (one). The returned
// candidate is never worse than the initializer.
TuneResult tune(const BlockedDesign& design, const GramSet& grams,
                const ResponseSpec& response, const FoldPlan& plan,
                const UtilitySpec& utility, const TunerConfig& cfg,
                const std::vector<bool>& fixed_mask = {},
                const CvOptions& opts = {});

// Two-stage preferential tuning: stage one tunes the preferred blocks with
// the other blocks excluded from the regression; stage two fixes those
// penalties and tunes the rest with every block included.
TuneResult tune_preferential(const BlockedDesign& design, const GramSet& grams,
                             const ResponseSpec& response, const FoldPlan& plan,
                             const UtilitySpec& utility, const TunerConfig& cfg,
                             const std::vector<Index>& preferred,
                             const CvOptions& opts = {});

// Per-block starting penalties via single-block CV (paired pairs get their
// marginal penalties initialized block by block).
Vector init_all_blocks(const BlockedDesign& design, const ResponseSpec& response,
                       const FoldPlan& plan, const TunerConfig& cfg,
                       const IwlsControls& ctrl = {});

}  // namespace gramridge
