#pragma once

#include <optional>
#include <vector>

#include "gramridge/types.hpp"

namespace gramridge {

enum class Family { linear, logistic, cox };

// Response with family-specific mean/variance maps. For cox the response is
// (time, event) pairs; an optional offset is added to the linear predictor
// before every link inversion.
class ResponseSpec {
 public:
  static ResponseSpec linear(Vector y, std::optional<Vector> offset = std::nullopt);
  static ResponseSpec logistic(Vector y, std::optional<Vector> offset = std::nullopt);
  static ResponseSpec cox(Vector time, Vector event,
                          std::optional<Vector> offset = std::nullopt);

  Family family() const { return family_; }
  Index n() const { return n_; }
  const Vector& y() const { return y_; }
  const Vector& time() const { return time_; }
  const Vector& event() const { return event_; }
  bool has_offset() const { return offset_.has_value(); }
  Vector offset_or_zero() const {
    return offset_ ? *offset_ : Vector::Zero(n_);
  }
  Index num_events() const;

  ResponseSpec subset(const IndexList& idx) const;

 private:
  ResponseSpec() = default;
  Family family_ = Family::linear;
  Index n_ = 0;
  Vector y_;             // linear / logistic
  Vector time_, event_;  // cox
  std::optional<Vector> offset_;
};

// Breslow cumulative baseline hazard: a step function with jumps at event
// times only.
struct BaselineHazard {
  std::vector<double> times;       // unique event times, ascending
  std::vector<double> increments;  // jump at each event time
  std::vector<double> cumulative;  // running sum of increments

  // H0(t): sum of increments at times <= t (0 before the first event).
  double cumulative_at(double t) const;
  // h0(t): the jump at the latest event time <= t. Held-out times that
  // precede every training event fall back to the first jump so the
  // likelihood stays finite.
  double increment_at(double t) const;
};

// h0(s) = d_s / sum_{j: t_j >= s} exp(eta_j); events tied at the same time
// share the risk-set denominator.
BaselineHazard breslow(const Vector& eta, const ResponseSpec& response);

struct FamilyMoments {
  Vector mean;      // E(Y_i | eta_i)
  Vector weight;    // V(Y_i | eta_i)
  Vector centered;  // working residual C
};

// eta is the full linear predictor (offset already added by the caller).
FamilyMoments family_moments(const Vector& eta, const ResponseSpec& response,
                             const BaselineHazard* baseline = nullptr);

// Log-likelihood at eta. Linear uses unit dispersion; logistic probabilities
// are clamped to [1e-12, 1 - 1e-12]; cox uses the full likelihood with the
// supplied baseline.
double loglik(const Vector& eta, const ResponseSpec& response,
              const BaselineHazard* baseline = nullptr);

}  // namespace gramridge
