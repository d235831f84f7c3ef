#include "gramridge/metrics.hpp"

#include <cmath>
#include <limits>

#include "gramridge/numeric.hpp"

namespace gramridge {

namespace {

double auc(const Vector& score, const Vector& y) {
  double pairs = 0.0, wins = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) != 1.0) continue;
    for (Index j = 0; j < y.size(); ++j) {
      if (y(j) != 0.0) continue;
      pairs += 1.0;
      if (score(i) > score(j))
        wins += 1.0;
      else if (score(i) == score(j))
        wins += 0.5;
    }
  }
  if (pairs == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return wins / pairs;
}

// Harrell's concordance. A pair is usable when the earlier observed time is
// an event (censored-censored pairs are not); at tied times exactly one event
// makes the event the earlier failure. Higher score must mean earlier event.
double cindex(const Vector& score, const ResponseSpec& resp) {
  double pairs = 0.0, wins = 0.0;
  const Index n = resp.n();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      Index first = -1, second = -1;
      if (resp.time()(i) < resp.time()(j)) {
        first = i;
        second = j;
      } else if (resp.time()(j) < resp.time()(i)) {
        first = j;
        second = i;
      } else {
        const bool ei = resp.event()(i) == 1.0;
        const bool ej = resp.event()(j) == 1.0;
        if (ei == ej) continue;  // tied times, both events or both censored
        first = ei ? i : j;
        second = ei ? j : i;
      }
      if (resp.event()(first) != 1.0) continue;
      pairs += 1.0;
      if (score(first) > score(second))
        wins += 1.0;
      else if (score(first) == score(second))
        wins += 0.5;
    }
  }
  if (pairs == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return wins / pairs;
}

double mse(const Vector& pred, const ResponseSpec& resp) {
  double s = 0.0;
  for (Index i = 0; i < resp.n(); ++i) {
    const double p = resp.family() == Family::logistic ? expit(pred(i)) : pred(i);
    const double d = p - resp.y()(i);
    s += d * d;
  }
  return s / static_cast<double>(resp.n());
}

}  // namespace

Criterion criterion_from_string(const std::string& name) {
  if (name == "cvl") return Criterion::cvl;
  if (name == "auc") return Criterion::auc;
  if (name == "cindex") return Criterion::cindex;
  if (name == "mse") return Criterion::mse;
  throw ConfigError("unknown criterion: " + name);
}

std::string criterion_name(Criterion c) {
  switch (c) {
    case Criterion::cvl: return "cvl";
    case Criterion::auc: return "auc";
    case Criterion::cindex: return "cindex";
    case Criterion::mse: return "mse";
  }
  return "?";
}

double evaluate_metric(Criterion criterion, const Vector& predictions,
                       const ResponseSpec& response) {
  if (predictions.size() != response.n())
    throw ConfigError("prediction and response lengths disagree");
  switch (criterion) {
    case Criterion::auc:
      if (response.family() != Family::logistic)
        throw ConfigError("auc requires a logistic response");
      return auc(predictions, response.y());
    case Criterion::cindex:
      if (response.family() != Family::cox)
        throw ConfigError("cindex requires a cox response");
      return cindex(predictions, response);
    case Criterion::mse:
      if (response.family() == Family::cox)
        throw ConfigError("mse is undefined for a cox response");
      return mse(predictions, response);
    case Criterion::cvl:
      throw ConfigError("cvl is evaluated through fold fits, not as a metric");
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace gramridge
