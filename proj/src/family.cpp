#include "gramridge/family.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gramridge/numeric.hpp"

namespace gramridge {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void check_offset(const std::optional<Vector>& offset, Index n) {
  if (offset && offset->size() != n)
    throw ConfigError("offset length does not match response length");
}

}  // namespace

ResponseSpec ResponseSpec::linear(Vector y, std::optional<Vector> offset) {
  ResponseSpec r;
  r.family_ = Family::linear;
  r.n_ = y.size();
  r.y_ = std::move(y);
  check_offset(offset, r.n_);
  r.offset_ = std::move(offset);
  return r;
}

ResponseSpec ResponseSpec::logistic(Vector y, std::optional<Vector> offset) {
  ResponseSpec r;
  r.family_ = Family::logistic;
  r.n_ = y.size();
  for (Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0)
      throw ConfigError("logistic response must be 0/1");
  r.y_ = std::move(y);
  check_offset(offset, r.n_);
  r.offset_ = std::move(offset);
  return r;
}

ResponseSpec ResponseSpec::cox(Vector time, Vector event,
                               std::optional<Vector> offset) {
  ResponseSpec r;
  r.family_ = Family::cox;
  r.n_ = time.size();
  if (event.size() != r.n_)
    throw ConfigError("survival time and event vectors disagree in length");
  for (Index i = 0; i < r.n_; ++i) {
    if (!(time(i) > 0.0)) throw ConfigError("survival times must be positive");
    if (event(i) != 0.0 && event(i) != 1.0)
      throw ConfigError("event indicator must be 0/1");
  }
  r.time_ = std::move(time);
  r.event_ = std::move(event);
  check_offset(offset, r.n_);
  r.offset_ = std::move(offset);
  return r;
}

Index ResponseSpec::num_events() const {
  if (family_ != Family::cox) return 0;
  return static_cast<Index>(event_.sum());
}

ResponseSpec ResponseSpec::subset(const IndexList& idx) const {
  ResponseSpec r;
  r.family_ = family_;
  r.n_ = static_cast<Index>(idx.size());
  if (family_ == Family::cox) {
    r.time_ = time_(idx);
    r.event_ = event_(idx);
  } else {
    r.y_ = y_(idx);
  }
  if (offset_) r.offset_ = (*offset_)(idx);
  return r;
}

double BaselineHazard::cumulative_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return cumulative[static_cast<std::size_t>(it - times.begin()) - 1];
}

double BaselineHazard::increment_at(double t) const {
  if (times.empty()) throw NumericError("baseline hazard has no events");
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return increments.front();
  return increments[static_cast<std::size_t>(it - times.begin()) - 1];
}

BaselineHazard breslow(const Vector& eta, const ResponseSpec& response) {
  if (response.family() != Family::cox)
    throw ConfigError("breslow requires a cox response");
  const Index n = response.n();
  if (eta.size() != n)
    throw ConfigError("eta length does not match response length");
  if (response.num_events() == 0)
    throw NumericError("cox fitting requires at least one event");

  IndexList order = all_indices(n);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return response.time()(a) < response.time()(b);
  });

  // Suffix sums of exp(eta) over the risk sets, walking times descending.
  BaselineHazard h;
  double risk = 0.0;
  std::vector<std::pair<double, double>> jumps;  // (time, d / risk), descending
  Index i = static_cast<Index>(order.size()) - 1;
  while (i >= 0) {
    const double t = response.time()(order[static_cast<std::size_t>(i)]);
    Index j = i;
    double events = 0.0;
    while (j >= 0 &&
           response.time()(order[static_cast<std::size_t>(j)]) == t) {
      risk += std::exp(eta(order[static_cast<std::size_t>(j)]));
      events += response.event()(order[static_cast<std::size_t>(j)]);
      --j;
    }
    if (events > 0.0) jumps.emplace_back(t, events / risk);
    i = j;
  }
  std::reverse(jumps.begin(), jumps.end());
  double cum = 0.0;
  for (const auto& [t, inc] : jumps) {
    cum += inc;
    h.times.push_back(t);
    h.increments.push_back(inc);
    h.cumulative.push_back(cum);
  }
  return h;
}

FamilyMoments family_moments(const Vector& eta, const ResponseSpec& response,
                             const BaselineHazard* baseline) {
  const Index n = response.n();
  if (eta.size() != n)
    throw ConfigError("eta length does not match response length");
  FamilyMoments m;
  switch (response.family()) {
    case Family::linear:
      m.mean = eta;
      m.weight = Vector::Ones(n);
      m.centered = response.y() - eta;
      break;
    case Family::logistic:
      m.mean = eta.unaryExpr([](double x) { return expit(x); });
      m.weight = m.mean.array() * (1.0 - m.mean.array());
      m.centered = response.y() - m.mean;
      break;
    case Family::cox: {
      if (baseline == nullptr)
        throw ConfigError("cox moments require a baseline hazard");
      m.weight.resize(n);
      for (Index i = 0; i < n; ++i)
        m.weight(i) =
            baseline->cumulative_at(response.time()(i)) * std::exp(eta(i));
      m.mean = m.weight;  // expected event count under the current fit
      m.centered = response.event() - m.weight;
      break;
    }
  }
  return m;
}

double loglik(const Vector& eta, const ResponseSpec& response,
              const BaselineHazard* baseline) {
  const Index n = response.n();
  if (eta.size() != n)
    throw ConfigError("eta length does not match response length");
  double ll = 0.0;
  switch (response.family()) {
    case Family::linear:
      for (Index i = 0; i < n; ++i) {
        const double r = response.y()(i) - eta(i);
        ll += -0.5 * kLogTwoPi - 0.5 * r * r;
      }
      break;
    case Family::logistic:
      for (Index i = 0; i < n; ++i) {
        // expit(-eta) equals 1 - expit(eta) without cancellation.
        const double p =
            clamp_prob(expit(response.y()(i) == 1.0 ? eta(i) : -eta(i)));
        ll += std::log(p);
      }
      break;
    case Family::cox: {
      if (baseline == nullptr)
        throw ConfigError("cox log-likelihood requires a baseline hazard");
      for (Index i = 0; i < n; ++i) {
        const double t = response.time()(i);
        if (response.event()(i) == 1.0)
          ll += std::log(baseline->increment_at(t)) + eta(i);
        ll -= baseline->cumulative_at(t) * std::exp(eta(i));
      }
      break;
    }
  }
  return ll;
}

}  // namespace gramridge
