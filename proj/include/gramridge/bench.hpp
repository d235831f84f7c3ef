#pragma once

#include <string>
#include <vector>

#include "gramridge/sim.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

// Backends compared by the timing harness. Each evaluation factorizes the
// fitting system for a fresh (Lambda, W, fold) triple and applies it to one
// linearized response.
//   naive:    p-dimensional solve of (Lambda + X_in' W X_in).
//   woodbury: dual n-dimensional solve, Gamma_in recomputed from X per triple.
//   gram:     dual solve on slices of per-block Grams computed once.
struct BenchOptions {
  int naive_cap = 3;      // evaluations actually timed per backend; the
  int woodbury_cap = 50;  // remainder is extrapolated from the measured mean
  int gram_cap = 1 << 30;
  int folds_k = 10;
  std::uint64_t seed = 1;
};

struct BenchBackendResult {
  std::string name;
  int measured_evals = 0;
  double precompute_seconds = 0.0;  // Gram construction (gram backend only)
  double measured_seconds = 0.0;
  double per_eval_seconds = 0.0;
  double total_seconds = 0.0;  // precompute + per-eval * budget
};

struct BenchReport {
  Index n = 0;
  Index p = 0;
  int budget = 0;
  double max_eta_residual = 0.0;  // cross-backend agreement before timing
  std::vector<BenchBackendResult> backends;

  const BenchBackendResult& backend(const std::string& name) const;
  // total-time ratio baseline / gram.
  double speedup(const std::string& baseline) const;
};

BenchReport benchmark(const SimSpec& spec, int budget,
                      const std::vector<std::string>& backends,
                      const BenchOptions& opts = {});

}  // namespace gramridge
