#pragma once

#include <functional>
#include <string>

#include "gramridge/family.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

enum class Criterion { cvl, auc, cindex, mse };

Criterion criterion_from_string(const std::string& name);
std::string criterion_name(Criterion c);

// Tuning utility. cvl sums held-out log-likelihood; the others are computed
// on pooled held-out predictions. A user-supplied callable replaces the named
// criterion when present. direction() is +1 when larger is better.
struct UtilitySpec {
  Criterion criterion = Criterion::cvl;
  std::function<double(const Vector&, const ResponseSpec&)> custom;
  double direction() const {
    return (!custom && criterion == Criterion::mse) ? -1.0 : 1.0;
  }
};

// auc: Mann-Whitney rank statistic, ties count one-half (logistic only).
// cindex: Harrell's concordance over usable pairs, ties one-half (cox only).
// mse: mean squared error on the family's prediction scale (linear/logistic).
// Predictions are linear predictors. Degenerate responses (single class, no
// usable pairs) return NaN.
double evaluate_metric(Criterion criterion, const Vector& predictions,
                       const ResponseSpec& response);

}  // namespace gramridge
