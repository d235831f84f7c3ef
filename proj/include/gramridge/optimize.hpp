#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gramridge/design.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

// Budgets and bounds for penalty search. The search variable is always
// log lambda, so every evaluated candidate is positive by construction.
// The global stage is a short simulated-annealing sweep; the local stage is
// Nelder-Mead for two or more free coordinates and Brent for one.
struct TunerConfig {
  int global_iters = 10;
  int local_iters = 25;
  double log_lower = -10.0;
  double log_upper = 30.0;
  double local_tol = 1e-6;
  std::uint64_t seed = 1;
  int init_grid_points = 26;
  double init_brent_tol = 1e-7;
  // Starting lambdas (one per block); when absent, per-block initialization
  // supplies them.
  std::optional<Vector> init_lambdas;
  // Relative paired coupling used to seed the paired triple.
  double paired_init_coupling = 0.25;
};

struct EvalRecord {
  Vector lambdas;
  double lambda3 = 0.0;  // 0 when not paired
  double utility = 0.0;  // maximize orientation
};

struct TuneResult {
  PenaltyConfig penalties;
  std::vector<EvalRecord> trace;
  int evaluations = 0;
  double best_utility = 0.0;
};

struct CoreResult {
  Vector x;            // best candidate on the full coordinate vector
  double utility = 0.0;
  int evaluations = 0;
};

// Derivative-free maximizer over the free coordinates of x0 (natural-log
// penalties), clamped to [cfg.log_lower, cfg.log_upper]. Returns the best
// candidate ever evaluated; among equal utilities the earliest wins. With no
// free coordinates the initializer is returned with zero evaluations.
// Proposals are assigned to coordinates in a canonical order so the result
// does not depend on how blocks were numbered.
CoreResult optimize_log_penalties(
    const std::function<double(const Vector&)>& objective, const Vector& x0,
    const TunerConfig& cfg, const std::vector<bool>& fixed_mask);

// 1-D maximization by Brent's method inside [lo, hi], starting near x0.
double brent_maximize(const std::function<double(double)>& f, double x0,
                      double lo, double hi, double tol, int max_evals);

// Parabolic vertex steps at fixed offsets around x. Stabilizes a located
// optimum against roundoff-level plateaus: two evaluation routes of the same
// objective polish to the same point even when their search trajectories
// diverged within the noise floor.
double parabolic_polish(const std::function<double(double)>& f, double x,
                        double lo, double hi);

// Mapping between penalty configurations and optimizer coordinates. A paired
// pair is searched in the scaled user parametrization (t1, t2, tc), which
// keeps the 2x2 block penalty positive definite for every candidate; its
// coupling occupies one trailing coordinate.
class PenaltyEncoding {
 public:
  PenaltyEncoding(Index num_blocks, std::optional<PairedSpec> paired);

  Index dim() const;
  // Coordinates from per-block starting lambdas, read as the scaled-form
  // marginals for a paired pair; the pair coupling is seeded at `coupling`.
  Vector encode(const Vector& block_lambdas, double coupling) const;
  // Exact inverse of decode: coordinates reproducing an existing config.
  Vector encode_config(const PenaltyConfig& pc) const;
  PenaltyConfig decode(const Vector& x, const std::vector<bool>& block_fixed) const;
  std::vector<bool> expand_mask(const std::vector<bool>& block_fixed) const;

 private:
  Index num_blocks_;
  std::optional<PairedSpec> paired_;
};

}  // namespace gramridge
