#include "gramridge/folds.hpp"

#include <algorithm>

#include "gramridge/rng.hpp"

namespace gramridge {

IndexList FoldPlan::out_indices(int repeat, int fold) const {
  const auto& a = assignments.at(static_cast<std::size_t>(repeat));
  IndexList out;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == fold) out.push_back(static_cast<Index>(i));
  return out;
}

IndexList FoldPlan::in_indices(int repeat, int fold) const {
  const auto& a = assignments.at(static_cast<std::size_t>(repeat));
  IndexList in;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != fold) in.push_back(static_cast<Index>(i));
  return in;
}

FoldPlan make_folds(const ResponseSpec& response, int k, int repeats,
                    std::uint64_t seed) {
  Stratify balance = Stratify::none;
  if (response.family() == Family::logistic) balance = Stratify::labels;
  if (response.family() == Family::cox) balance = Stratify::events;
  return make_folds(response, k, repeats, seed, balance);
}

FoldPlan make_folds(const ResponseSpec& response, int k, int repeats,
                    std::uint64_t seed, Stratify balance) {
  const Index n = response.n();
  if (k < 2) throw ConfigError("fold count must be at least 2");
  if (static_cast<Index>(k) > n)
    throw ConfigError("fold count exceeds sample count");
  if (repeats < 1) throw ConfigError("repeat count must be at least 1");

  // Strata: label/event groups, or one group covering everything.
  std::vector<IndexList> strata;
  if (balance == Stratify::none) {
    strata.push_back(all_indices(n));
  } else {
    const Vector& tag =
        balance == Stratify::labels ? response.y() : response.event();
    IndexList zeros, ones;
    for (Index i = 0; i < n; ++i)
      (tag(i) == 1.0 ? ones : zeros).push_back(i);
    if (!ones.empty()) strata.push_back(ones);
    if (!zeros.empty()) strata.push_back(zeros);
  }

  FoldPlan plan;
  plan.k = k;
  plan.repeats = repeats;
  plan.seed = seed;
  plan.balance = balance;
  for (const auto& s : strata) {
    if (s.size() < static_cast<std::size_t>(k) && strata.size() > 1)
      plan.warnings.push_back(
          "a stratum has fewer members than folds; balancing is best-effort");
  }

  Rng rng(seed);
  for (int r = 0; r < repeats; ++r) {
    Rng rep_rng = rng.fork(static_cast<std::uint64_t>(r));
    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    // One continuous round-robin across shuffled strata keeps overall fold
    // sizes within one of each other while spreading each stratum evenly.
    int cursor = static_cast<int>(rep_rng.below(static_cast<std::uint64_t>(k)));
    for (const auto& stratum : strata) {
      IndexList members = stratum;
      rep_rng.shuffle(members);
      for (Index i : members) {
        assign[static_cast<std::size_t>(i)] = cursor;
        cursor = (cursor + 1) % k;
      }
    }
    plan.assignments.push_back(std::move(assign));
  }
  return plan;
}

}  // namespace gramridge
