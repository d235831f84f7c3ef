#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gramridge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

// Invalid user input: bad dimensions, malformed files, incompatible options.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical procedure could not proceed (singular solve, divergence, ...).
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline IndexList all_indices(Index n) {
  IndexList idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

inline IndexList complement_indices(const IndexList& subset, Index n) {
  std::vector<bool> in(static_cast<std::size_t>(n), false);
  for (Index i : subset) in[static_cast<std::size_t>(i)] = true;
  IndexList out;
  out.reserve(static_cast<std::size_t>(n) - subset.size());
  for (Index i = 0; i < n; ++i)
    if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

}  // namespace gramridge
