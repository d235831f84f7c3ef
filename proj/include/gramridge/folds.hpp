#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gramridge/family.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

enum class Stratify { none, labels, events };

// Fold assignments per repeat. Fold sizes differ by at most one; stratified
// classes are spread across folds as evenly as integer arithmetic allows.
struct FoldPlan {
  std::vector<std::vector<int>> assignments;  // [repeat][sample] -> fold id
  int k = 0;
  int repeats = 0;
  std::uint64_t seed = 0;
  Stratify balance = Stratify::none;
  std::vector<std::string> warnings;

  Index n() const {
    return assignments.empty() ? 0
                               : static_cast<Index>(assignments.front().size());
  }
  IndexList out_indices(int repeat, int fold) const;
  IndexList in_indices(int repeat, int fold) const;
};

// Deterministic given the seed. Stratification defaults to labels for
// logistic and events for cox responses.
FoldPlan make_folds(const ResponseSpec& response, int k, int repeats,
                    std::uint64_t seed);
FoldPlan make_folds(const ResponseSpec& response, int k, int repeats,
                    std::uint64_t seed, Stratify balance);

}  // namespace gramridge
