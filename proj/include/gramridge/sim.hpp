#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gramridge/design.hpp"
#include "gramridge/family.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

// Synthetic multi-block data: X entries standard normal, per-block
// coefficients drawn i.i.d. N(0, 1 / lambda_b), eta = sum_b X_b beta_b.
// linear: y = eta + N(0,1); logistic: y ~ Bern(expit(eta));
// cox: exponential event times with rate exp(eta) and an exponential censor
// calibrated so each sample is censored with probability censoring_rate.
struct SimSpec {
  Index n = 0;
  std::vector<Index> block_cols;
  Family family = Family::linear;
  Vector true_lambdas;
  double censoring_rate = 0.0;
  std::uint64_t seed = 1;
};

struct SimData {
  BlockedDesign design;
  ResponseSpec response;
  Vector beta_true;  // penalized coefficients, blocks stacked in order
};

SimData simulate(const SimSpec& spec);

// Size of the intersection of the index sets of the k largest |beta| values.
int topk_overlap(const Vector& beta_hat, const Vector& beta_true, Index k);

}  // namespace gramridge
