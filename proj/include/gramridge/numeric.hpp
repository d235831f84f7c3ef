#pragma once

#include <cmath>

namespace gramridge {

inline constexpr double kProbClamp = 1e-12;

inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) * 0.3989422804014326779;
}

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// phi(x) / Phi(x). Direct evaluation underflows for large negative x, so a
// continued fraction for the reciprocal Mills ratio takes over at x < -6.
inline double mills_ratio(double x) {
  if (x < -6.0) {
    double cf = 0.0;
    for (int k = 20; k >= 1; --k) cf = static_cast<double>(k) / (-x + cf);
    return -x + cf;
  }
  return norm_pdf(x) / norm_cdf(x);
}

}  // namespace gramridge
