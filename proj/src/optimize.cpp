#include "gramridge/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gramridge/rng.hpp"

namespace gramridge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clamp(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

struct BestTracker {
  Vector x;
  double utility = kNegInf;
  // Strict improvement only: equal-utility candidates keep the earliest.
  void offer(const Vector& cand, double u) {
    if (u > utility) {
      utility = u;
      x = cand;
    }
  }
};

// Maximizes f over the free coordinates via Nelder-Mead with standard
// reflection/expansion/contraction/shrink coefficients (1, 2, 0.5, 0.5).
void nelder_mead(const std::function<double(Vector&)>& eval, Vector& x0,
                 int max_evals, double tol) {
  const Index d = x0.size();
  struct Vertex {
    Vector x;
    double u;
    int order;
  };
  std::vector<Vertex> simplex;
  if (max_evals < 1) return;
  int evals = 0;
  int stamp = 0;
  auto make_vertex = [&](Vector x) {
    Vector xc = x;
    const double u = eval(xc);
    ++evals;
    return Vertex{xc, u, stamp++};
  };
  simplex.push_back(make_vertex(x0));
  for (Index i = 0; i < d && evals < max_evals; ++i) {
    Vector v = x0;
    v(i) += 1.0;
    simplex.push_back(make_vertex(v));
  }
  auto by_rank = [](const Vertex& a, const Vertex& b) {
    if (a.u != b.u) return a.u > b.u;
    return a.order < b.order;
  };
  while (evals < max_evals && static_cast<Index>(simplex.size()) == d + 1) {
    std::sort(simplex.begin(), simplex.end(), by_rank);
    double spread = 0.0;
    for (const auto& v : simplex)
      spread = std::max(spread,
                        (v.x - simplex.front().x).lpNorm<Eigen::Infinity>());
    if (spread < tol) break;

    Vector centroid = Vector::Zero(d);
    for (std::size_t i = 0; i + 1 < simplex.size(); ++i) centroid += simplex[i].x;
    centroid /= static_cast<double>(d);
    Vertex& worst = simplex.back();

    Vector xr = centroid + (centroid - worst.x);
    Vertex vr = make_vertex(xr);
    if (vr.u > simplex.front().u && evals < max_evals) {
      Vector xe = centroid + 2.0 * (centroid - worst.x);
      Vertex ve = make_vertex(xe);
      worst = ve.u > vr.u ? ve : vr;
      continue;
    }
    if (vr.u > simplex[simplex.size() - 2].u) {
      worst = vr;
      continue;
    }
    if (evals >= max_evals) break;
    Vector xc = centroid + 0.5 * (worst.x - centroid);
    Vertex vc = make_vertex(xc);
    if (vc.u > worst.u) {
      worst = vc;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 1; i < simplex.size() && evals < max_evals; ++i) {
      Vector xs = simplex.front().x + 0.5 * (simplex[i].x - simplex.front().x);
      simplex[i] = make_vertex(xs);
    }
  }
}

}  // namespace

double brent_maximize(const std::function<double(double)>& f, double x0,
                      double lo, double hi, double tol, int max_evals) {
  if (max_evals < 3) return x0;  // not enough budget to even bracket
  int evals = 0;
  auto g = [&](double x) {
    ++evals;
    return -f(x);
  };

  // Bracket the minimum of g around x0 by stepping outward.
  double a = std::max(lo, x0 - 1.0);
  double b = std::min(hi, x0 + 1.0);
  double m = clamp(x0, a, b);
  double fa = g(a), fb = g(b), fm = g(m);
  double width = 2.0;
  while ((fm > fa || fm > fb) && evals < max_evals) {
    if (fa < fb) {
      b = m;
      fb = fm;
      m = a;
      fm = fa;
      a = std::max(lo, a - width);
      fa = g(a);
    } else {
      a = m;
      fa = fm;
      m = b;
      fm = fb;
      b = std::min(hi, b + width);
      fb = g(b);
    }
    width *= 2.0;
    if (a == lo && b == hi) break;
  }

  // Brent's parabolic-interpolation/golden-section minimization on [a, b].
  const double gold = 0.3819660112501051;
  double x = fm <= std::min(fa, fb) ? m : (fa < fb ? a : b);
  double w = x, v = x;
  double fx = std::min(fm, std::min(fa, fb));
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  while (evals < max_evals) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-12;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) &&
          p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm > x ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = x >= xm ? a - x : b - x;
      d = gold * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = g(u);
    if (fu <= fx) {
      if (u >= x)
        a = x;
      else
        b = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return x;
}

double parabolic_polish(const std::function<double(double)>& f, double x,
                        double lo, double hi) {
  for (double h : {2e-1, 5e-2, 1.25e-2}) {
    // A vertex fit only makes sense around an interior optimum; points this
    // close to a bound are boundary solutions and stay put.
    if (x - lo < h || hi - x < h) break;
    const double x1 = x - h;
    const double x3 = x + h;
    const double f1 = f(x1), f2 = f(x), f3 = f(x3);
    // Only step when the local curvature clearly rises above roundoff;
    // plateau noise must not steer the vertex.
    const double concavity = f2 - 0.5 * (f1 + f3);
    if (!(concavity > 1e-7 * std::max(1.0, std::abs(f2)))) continue;
    const double d21 = x - x1, d23 = x - x3;
    const double denom = d21 * (f2 - f3) - d23 * (f2 - f1);
    const double num = d21 * d21 * (f2 - f3) - d23 * d23 * (f2 - f1);
    const double vertex = x - 0.5 * num / denom;
    if (std::abs(vertex - x) <= 0.5 * h) x = vertex;
  }
  return x;
}

CoreResult optimize_log_penalties(
    const std::function<double(const Vector&)>& objective, const Vector& x0,
    const TunerConfig& cfg, const std::vector<bool>& fixed_mask) {
  const Index d = x0.size();
  if (!fixed_mask.empty() && static_cast<Index>(fixed_mask.size()) != d)
    throw ConfigError("fixed mask length does not match coordinate count");

  IndexList free;
  for (Index i = 0; i < d; ++i)
    if (fixed_mask.empty() || !fixed_mask[static_cast<std::size_t>(i)])
      free.push_back(i);

  CoreResult out;
  out.x = x0;
  if (free.empty()) return out;

  // Canonical coordinate order (by starting value, then index) so proposal
  // streams do not depend on block numbering.
  std::sort(free.begin(), free.end(), [&](Index a, Index b) {
    if (x0(a) != x0(b)) return x0(a) < x0(b);
    return a < b;
  });
  const Index df = static_cast<Index>(free.size());

  BestTracker best;
  int evals = 0;
  auto eval_full = [&](const Vector& sub) {
    Vector x = x0;
    for (Index i = 0; i < df; ++i)
      x(free[static_cast<std::size_t>(i)]) =
          clamp(sub(i), cfg.log_lower, cfg.log_upper);
    const double u = objective(x);
    ++evals;
    best.offer(x, u);
    return u;
  };

  Vector sub0(df);
  for (Index i = 0; i < df; ++i)
    sub0(i) = clamp(x0(free[static_cast<std::size_t>(i)]), cfg.log_lower,
                    cfg.log_upper);
  const double u0 = eval_full(sub0);
  if (u0 == kNegInf)
    throw ConfigError(
        "tuning utility is -inf at the initializer; check the data and the "
        "fold/penalty configuration");

  // Global stage: simulated annealing with geometric temperature decay.
  {
    Rng rng(cfg.seed);
    Vector current = sub0;
    double u_current = u0;
    double temp = 1.0;
    for (int it = 0; it < cfg.global_iters; ++it) {
      Vector prop = current;
      for (Index i = 0; i < df; ++i)
        prop(i) = clamp(prop(i) + temp * rng.normal(), cfg.log_lower,
                        cfg.log_upper);
      const double u = eval_full(prop);
      const bool accept =
          u >= u_current ||
          rng.uniform01() < std::exp((u - u_current) / std::max(temp, 1e-12));
      if (accept) {
        current = prop;
        u_current = u;
      }
      temp *= 0.8;
    }
  }

  // Local stage from the best point seen so far.
  Vector start(df);
  for (Index i = 0; i < df; ++i)
    start(i) = best.x(free[static_cast<std::size_t>(i)]);
  if (df == 1) {
    auto f1 = [&](double x) { return eval_full(Vector::Constant(1, x)); };
    brent_maximize(f1, start(0), cfg.log_lower, cfg.log_upper, cfg.local_tol,
                   cfg.local_iters);
  } else {
    auto fn = [&](Vector& x) { return eval_full(x); };
    nelder_mead(fn, start, cfg.local_iters, cfg.local_tol);
  }

  out.x = best.x;
  out.utility = best.utility;
  out.evaluations = evals;
  return out;
}

PenaltyEncoding::PenaltyEncoding(Index num_blocks,
                                 std::optional<PairedSpec> paired)
    : num_blocks_(num_blocks), paired_(paired) {
  if (paired_) {
    if (paired_->block_a < 0 || paired_->block_b < 0 ||
        paired_->block_a >= num_blocks_ || paired_->block_b >= num_blocks_)
      throw ConfigError("paired block indices out of range");
  }
}

Index PenaltyEncoding::dim() const { return num_blocks_ + (paired_ ? 1 : 0); }

Vector PenaltyEncoding::encode(const Vector& block_lambdas,
                               double coupling) const {
  if (block_lambdas.size() != num_blocks_)
    throw ConfigError("starting lambda count does not match block count");
  Vector x(dim());
  for (Index b = 0; b < num_blocks_; ++b) x(b) = std::log(block_lambdas(b));
  if (paired_) x(num_blocks_) = std::log(coupling);
  return x;
}

Vector PenaltyEncoding::encode_config(const PenaltyConfig& pc) const {
  if (pc.num_blocks() != num_blocks_)
    throw ConfigError("penalty count does not match block count");
  Vector x(dim());
  for (Index b = 0; b < num_blocks_; ++b) x(b) = std::log(pc.lambda(b));
  if (paired_) {
    if (!pc.has_paired())
      throw ConfigError("design is paired but the penalty config is not");
    const PairedTriple& t = pc.paired();
    const double r = t.lambda3 / std::sqrt(t.lambda1 * t.lambda2);
    const double tc = std::max(r / (1.0 - r), 1e-12);
    x(paired_->block_a) = std::log(t.lambda1 / (1.0 + tc));
    x(paired_->block_b) = std::log(t.lambda2 / (1.0 + tc));
    x(num_blocks_) = std::log(tc);
  }
  return x;
}

PenaltyConfig PenaltyEncoding::decode(
    const Vector& x, const std::vector<bool>& block_fixed) const {
  Vector lambdas(num_blocks_);
  for (Index b = 0; b < num_blocks_; ++b) lambdas(b) = std::exp(x(b));
  std::optional<PairedTriple> triple;
  if (paired_) {
    triple = paired_param_transform(std::exp(x(paired_->block_a)),
                                    std::exp(x(paired_->block_b)),
                                    std::exp(x(num_blocks_)),
                                    PairedParametrization::scaled);
  }
  return PenaltyConfig(std::move(lambdas), block_fixed, triple, paired_);
}

std::vector<bool> PenaltyEncoding::expand_mask(
    const std::vector<bool>& block_fixed) const {
  std::vector<bool> mask = block_fixed;
  if (mask.empty()) mask.assign(static_cast<std::size_t>(num_blocks_), false);
  if (static_cast<Index>(mask.size()) != num_blocks_)
    throw ConfigError("fixed mask length does not match block count");
  if (paired_) {
    const bool both = mask[static_cast<std::size_t>(paired_->block_a)] &&
                      mask[static_cast<std::size_t>(paired_->block_b)];
    mask.push_back(both);
  }
  return mask;
}

}  // namespace gramridge
