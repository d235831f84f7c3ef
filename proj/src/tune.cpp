#include "gramridge/tune.hpp"

#include <algorithm>
#include <cmath>

namespace gramridge {

namespace {

TuneResult run_tuner(const PenaltyEncoding& enc,
                     const std::function<double(const PenaltyConfig&)>& score,
                     const Vector& x0, const TunerConfig& cfg,
                     const std::vector<bool>& block_fixed, double direction) {
  std::vector<EvalRecord> trace;
  const std::vector<bool> mask = enc.expand_mask(block_fixed);
  auto objective = [&](const Vector& x) {
    const PenaltyConfig cand = enc.decode(x, block_fixed);
    const double value = score(cand);
    EvalRecord rec;
    rec.lambdas = cand.lambdas();
    if (cand.has_paired()) rec.lambda3 = cand.paired().lambda3;
    rec.utility = direction * value;
    trace.push_back(std::move(rec));
    return direction * value;
  };

  const CoreResult core = optimize_log_penalties(objective, x0, cfg, mask);
  TuneResult out{enc.decode(core.x, block_fixed), std::move(trace),
                 core.evaluations, core.utility};
  return out;
}

}  // namespace

Vector init_all_blocks(const BlockedDesign& design, const ResponseSpec& response,
                       const FoldPlan& plan, const TunerConfig& cfg,
                       const IwlsControls& ctrl) {
  Vector init(design.num_blocks());
  for (Index b = 0; b < design.num_blocks(); ++b)
    init(b) = init_uni_penalty(design.block(b), response, plan, cfg, ctrl);
  return init;
}

TuneResult tune(const BlockedDesign& design, const GramSet& grams,
                const ResponseSpec& response, const FoldPlan& plan,
                const UtilitySpec& utility, const TunerConfig& cfg,
                const std::vector<bool>& fixed_mask, const CvOptions& opts) {
  if (!fixed_mask.empty() &&
      static_cast<Index>(fixed_mask.size()) != design.num_blocks())
    throw ConfigError("fixed mask length does not match block count");
  const Vector init = cfg.init_lambdas
                          ? *cfg.init_lambdas
                          : init_all_blocks(design, response, plan, cfg,
                                            opts.iwls);
  if (init.size() != design.num_blocks())
    throw ConfigError("starting lambda count does not match block count");

  const PenaltyEncoding enc(design.num_blocks(), design.paired());
  auto score = [&](const PenaltyConfig& cand) {
    return cv_utility(design, grams, cand, response, plan, utility, opts);
  };
  return run_tuner(enc, score, enc.encode(init, cfg.paired_init_coupling), cfg,
                   fixed_mask, utility.direction());
}

TuneResult tune_preferential(const BlockedDesign& design, const GramSet& grams,
                             const ResponseSpec& response, const FoldPlan& plan,
                             const UtilitySpec& utility, const TunerConfig& cfg,
                             const std::vector<Index>& preferred,
                             const CvOptions& opts) {
  const Index nb = design.num_blocks();
  if (preferred.empty())
    throw ConfigError("preferential tuning needs a nonempty preferred set");
  std::vector<bool> is_preferred(static_cast<std::size_t>(nb), false);
  for (Index b : preferred) {
    if (b < 0 || b >= nb) throw ConfigError("preferred block index out of range");
    is_preferred[static_cast<std::size_t>(b)] = true;
  }
  if (std::count(is_preferred.begin(), is_preferred.end(), true) == nb)
    throw ConfigError(
        "every block is preferred; nothing remains for the second stage");

  // Stage one: tune the preferred blocks with the others left out entirely.
  std::vector<Index> keep;
  for (Index b = 0; b < nb; ++b)
    if (is_preferred[static_cast<std::size_t>(b)]) keep.push_back(b);
  const BlockedDesign design_p = design.select_blocks(keep);
  const GramSet grams_p = grams.select_blocks(keep);
  TunerConfig cfg_p = cfg;
  if (cfg.init_lambdas) {
    Vector sub(static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
      sub(static_cast<Index>(j)) = (*cfg.init_lambdas)(keep[j]);
    cfg_p.init_lambdas = sub;
  }
  const TuneResult stage1 =
      tune(design_p, grams_p, response, plan, utility, cfg_p, {}, opts);

  // Stage two: the preferred penalties are fixed at their stage-one values,
  // the remaining ones are tuned with all blocks in the regression.
  const PenaltyEncoding enc_p(design_p.num_blocks(), design_p.paired());
  const Vector x_stage1 = enc_p.encode_config(stage1.penalties);

  const PenaltyEncoding enc(nb, design.paired());
  Vector init(nb);
  for (Index b = 0; b < nb; ++b) {
    if (is_preferred[static_cast<std::size_t>(b)]) {
      Index j = 0;
      while (keep[static_cast<std::size_t>(j)] != b) ++j;
      init(b) = std::exp(x_stage1(static_cast<Index>(j)));
    } else {
      init(b) = cfg.init_lambdas
                    ? (*cfg.init_lambdas)(b)
                    : init_uni_penalty(design.block(b), response, plan, cfg,
                                       opts.iwls);
    }
  }
  double coupling = cfg.paired_init_coupling;
  if (design_p.paired())  // the pair sits in the preferred set; carry it over
    coupling = std::exp(x_stage1(design_p.num_blocks()));

  auto score = [&](const PenaltyConfig& cand) {
    return cv_utility(design, grams, cand, response, plan, utility, opts);
  };
  TuneResult stage2 =
      run_tuner(enc, score, enc.encode(init, coupling), cfg, is_preferred,
                utility.direction());
  stage2.evaluations += stage1.evaluations;
  return stage2;
}

}  // namespace gramridge
