#include "gramridge/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "gramridge/numeric.hpp"
#include "gramridge/rng.hpp"

namespace gramridge {

SimData simulate(const SimSpec& spec) {
  if (spec.n <= 0) throw ConfigError("sample count must be positive");
  if (spec.block_cols.empty()) throw ConfigError("no blocks specified");
  if (static_cast<Index>(spec.block_cols.size()) != spec.true_lambdas.size())
    throw ConfigError("true lambda count does not match block count");
  if (spec.censoring_rate < 0.0 || spec.censoring_rate >= 1.0)
    throw ConfigError("censoring rate must lie in [0, 1)");

  Rng rng(spec.seed);
  std::vector<Matrix> blocks;
  Index p = 0;
  for (Index cols : spec.block_cols) p += cols;
  Vector beta(p);
  Vector eta = Vector::Zero(spec.n);

  Index at = 0;
  for (std::size_t b = 0; b < spec.block_cols.size(); ++b) {
    const Index cols = spec.block_cols[b];
    if (cols <= 0) throw ConfigError("block width must be positive");
    Matrix x(spec.n, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < spec.n; ++i) x(i, j) = rng.normal();
    const double sd = 1.0 / std::sqrt(spec.true_lambdas(static_cast<Index>(b)));
    for (Index j = 0; j < cols; ++j) beta(at + j) = sd * rng.normal();
    eta += x * beta.segment(at, cols);
    at += cols;
    blocks.push_back(std::move(x));
  }

  SimData out{BlockedDesign(std::move(blocks)), ResponseSpec::linear(Vector()),
              std::move(beta)};
  switch (spec.family) {
    case Family::linear: {
      Vector y(spec.n);
      for (Index i = 0; i < spec.n; ++i) y(i) = eta(i) + rng.normal();
      out.response = ResponseSpec::linear(std::move(y));
      break;
    }
    case Family::logistic: {
      Vector y(spec.n);
      for (Index i = 0; i < spec.n; ++i)
        y(i) = rng.uniform01() < expit(eta(i)) ? 1.0 : 0.0;
      out.response = ResponseSpec::logistic(std::move(y));
      break;
    }
    case Family::cox: {
      // Censor rate exp(c * eta) with c = rate / (1 - rate) gives per-sample
      // censoring probability rate / (1 + ... ) = censoring_rate exactly.
      const double c = spec.censoring_rate / (1.0 - spec.censoring_rate);
      Vector time(spec.n), event(spec.n);
      for (Index i = 0; i < spec.n; ++i) {
        const double rate = std::exp(eta(i));
        const double t_event = -std::log(rng.uniform01()) / rate;
        double t_cens = std::numeric_limits<double>::infinity();
        if (c > 0.0) t_cens = -std::log(rng.uniform01()) / (c * rate);
        time(i) = std::min(t_event, t_cens);
        event(i) = t_event <= t_cens ? 1.0 : 0.0;
      }
      out.response = ResponseSpec::cox(std::move(time), std::move(event));
      break;
    }
  }
  return out;
}

int topk_overlap(const Vector& beta_hat, const Vector& beta_true, Index k) {
  if (beta_hat.size() != beta_true.size())
    throw ConfigError("coefficient vectors disagree in length");
  if (k < 1 || k > beta_hat.size())
    throw ConfigError("k out of range for top-k overlap");

  auto top_indices = [k](const Vector& v) {
    IndexList idx = all_indices(v.size());
    std::sort(idx.begin(), idx.end(), [&](Index a, Index b) {
      const double va = std::abs(v(a)), vb = std::abs(v(b));
      if (va != vb) return va > vb;
      return a < b;
    });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
  };
  const IndexList top_hat = top_indices(beta_hat);
  const IndexList top_true = top_indices(beta_true);
  std::unordered_set<Index> set(top_true.begin(), top_true.end());
  int overlap = 0;
  for (Index i : top_hat) overlap += set.count(i) ? 1 : 0;
  return overlap;
}

}  // namespace gramridge
