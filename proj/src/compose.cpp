#include "nsiss/compose.hpp"

#include <algorithm>
#include <cmath>

#include "nsiss/errors.hpp"

namespace nsiss {

namespace {

constexpr double kNuFloor = 1e-9;
constexpr double kInvSqrt2 = 0.70710678118654752440;

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  double llo = std::log(lo), lhi = std::log(hi);
  for (int k = 0; k < n; ++k)
    g[k] = std::exp(llo + (lhi - llo) * k / (n - 1));
  return g;
}

/// Ratio chi(s)/rho(s) with the 0/0 of a vanishing cross gain read as 0.
double gain_ratio(const ComparisonFn& chi, const ComparisonFn& rho, double s) {
  double num = chi(s);
  if (num == 0.0) return 0.0;
  double den = rho(s);
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

Vec concat_parts(const Vec& a, const Vec& b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

double CompositeLyapunov::value(const Vec& x1, const Vec& x2) const {
  if (static_cast<int>(x1.size()) != n1 || static_cast<int>(x2.size()) != n2)
    throw DimensionMismatch("composite evaluation got the wrong block dimensions");
  if (kind == Kind::MaxSmallGain)
    return std::max(sigma(v1.value(x1)), v2.value(x2));
  return ell(v2.value(x2)) + v1.value(x1);
}

double CompositeLyapunov::value(const Vec& z) const {
  if (static_cast<int>(z.size()) != n1 + n2)
    throw DimensionMismatch("composite evaluation got the wrong product dimension");
  Vec x1(z.begin(), z.begin() + n1);
  Vec x2(z.begin() + n1, z.end());
  return value(x1, x2);
}

CompositeLyapunov small_gain_compose(const SubsystemCertificate& c1,
                                     const SubsystemCertificate& c2, double domain_max) {
  if (domain_max <= 0.0) throw OutOfRange("small-gain domain bound must be positive");

  auto grid = log_grid(domain_max * 1e-8, domain_max, 200);
  SmallGainCheck sg = small_gain_holds(c1.chi, c2.chi, grid);
  if (!sg.holds)
    throw SmallGainViolated("chi1(chi2(r)) >= r at r = " + std::to_string(sg.worst_r));

  ComparisonFn sigma = construct_sigma(c1.chi, c2.chi, domain_max);

  ComparisonFn gamma = ComparisonFn::retag(
      fn_max(compose_chain(sigma, c1.gamma), c2.gamma), FnTag::K);
  ComparisonFn rho = ComparisonFn::retag(
      fn_min(rate_pullback(sigma, c1.rho), c2.rho), FnTag::PD);

  ComparisonFn half = ComparisonFn::linear(kInvSqrt2);
  ComparisonFn alpha_lo = ComparisonFn::retag(
      fn_min(compose_chain(sigma, compose_chain(c1.alpha_lo, half)),
             compose_chain(c2.alpha_lo, half)),
      FnTag::Kinf);
  ComparisonFn alpha_hi = ComparisonFn::retag(
      fn_max(compose_chain(sigma, c1.alpha_hi), c2.alpha_hi), FnTag::Kinf);

  return CompositeLyapunov{CompositeLyapunov::Kind::MaxSmallGain,
                           c1.V,
                           c2.V,
                           sigma,
                           ComparisonFn(),
                           ComparisonFn(),
                           rho,
                           gamma,
                           alpha_lo,
                           alpha_hi,
                           c1.V.dim(),
                           c2.V.dim()};
}

CompositeLyapunov cascade_compose(const SubsystemCertificate& c1,
                                  const SubsystemCertificate& c2, double m_cap) {
  if (m_cap <= 0.0) throw OutOfRange("cascade ratio cap must be positive");
  if (c1.rho.tag() != FnTag::Kinf || c2.rho.tag() != FnTag::Kinf)
    throw TagMismatch("cascade composition needs class-Kinf decrease rates");

  // The ratio chi1/rho2 must stay bounded approaching 0, or no
  // nondecreasing integrand nu can dominate it.
  for (double s : log_grid(1e-12, 1.0, 121)) {
    double r = gain_ratio(c1.chi, c2.rho, s);
    if (!(r <= m_cap))
      throw RatioUnbounded("chi1/rho2 exceeds the cap near 0: ratio " + std::to_string(r) +
                           " at s = " + std::to_string(s));
  }

  // Nondecreasing envelope of 4*chi1/rho2 over a wide log grid, with a
  // positive floor so the integral stays strictly increasing; constant
  // to the left of the grid, final slope to the right.
  auto grid = log_grid(1e-8, 1e4, 241);
  std::vector<std::array<double, 2>> nu_knots;
  nu_knots.reserve(grid.size() + 1);
  double running = kNuFloor;
  nu_knots.push_back({0.0, 0.0});  // placeholder, patched after the first value
  for (double s : grid) {
    running = std::max(running, 4.0 * gain_ratio(c1.chi, c2.rho, s));
    nu_knots.push_back({s, running});
  }
  nu_knots.front()[1] = nu_knots[1][1];
  ComparisonFn nu = ComparisonFn::piecewise_linear(nu_knots, FnTag::NonDecreasing);
  ComparisonFn ell = integral_transform(nu);

  ComparisonFn theta = compose_chain(inverse_fn(c2.rho), fn_scale(2.0, c2.gamma));
  ComparisonFn gamma = ComparisonFn::retag(
      fn_product(fn_sum(compose_chain(nu, theta), ComparisonFn::constant(1.0)), c2.gamma),
      FnTag::K);

  // ell^{-1} as a cached knot table: exact values from the integral,
  // exact derivatives 1/nu, slopes clamped against the secants so the
  // interpolant stays monotone across cells where nu jumps.
  std::vector<std::array<double, 3>> inv_knots;
  inv_knots.reserve(grid.size() + 1);
  inv_knots.push_back({0.0, 0.0, 1.0 / nu(0.0)});
  for (double s : grid) inv_knots.push_back({ell(s), s, 1.0 / nu(s)});
  for (size_t k = 0; k < inv_knots.size(); ++k) {
    double cap = std::numeric_limits<double>::infinity();
    if (k > 0)
      cap = std::min(cap, 3.0 * (inv_knots[k][1] - inv_knots[k - 1][1]) /
                              (inv_knots[k][0] - inv_knots[k - 1][0]));
    if (k + 1 < inv_knots.size())
      cap = std::min(cap, 3.0 * (inv_knots[k + 1][1] - inv_knots[k][1]) /
                              (inv_knots[k + 1][0] - inv_knots[k][0]));
    inv_knots[k][2] = std::min(inv_knots[k][2], cap);
  }
  ComparisonFn ell_inv = ComparisonFn::monotone_interpolant(inv_knots, FnTag::Kinf);

  ComparisonFn rho = ComparisonFn::retag(
      fn_min(compose_chain(c1.rho, ComparisonFn::linear(0.5)),
             compose_chain(c1.chi, fn_scale(0.5, ell_inv))),
      FnTag::PD);

  ComparisonFn half = ComparisonFn::linear(kInvSqrt2);
  ComparisonFn alpha_lo = ComparisonFn::retag(
      fn_min(compose_chain(c1.alpha_lo, half),
             compose_chain(ell, compose_chain(c2.alpha_lo, half))),
      FnTag::Kinf);
  ComparisonFn alpha_hi = ComparisonFn::retag(
      fn_sum(c1.alpha_hi, compose_chain(ell, c2.alpha_hi)), FnTag::Kinf);

  return CompositeLyapunov{CompositeLyapunov::Kind::SumCascade,
                           c1.V,
                           c2.V,
                           ComparisonFn(),
                           nu,
                           ell,
                           rho,
                           gamma,
                           alpha_lo,
                           alpha_hi,
                           c1.V.dim(),
                           c2.V.dim()};
}

GradientHull composite_gradient_hull(const CompositeLyapunov& w, const Vec& x1,
                                     const Vec& x2, double tol) {
  if (static_cast<int>(x1.size()) != w.n1 || static_cast<int>(x2.size()) != w.n2)
    throw DimensionMismatch("composite hull got the wrong block dimensions");

  GradientHull out;
  auto push = [&out](Vec v) {
    out.active.push_back(static_cast<int>(out.vertices.size()));
    out.vertices.push_back(std::move(v));
  };

  if (w.kind == CompositeLyapunov::Kind::MaxSmallGain) {
    double v1v = w.v1.value(x1);
    double s1 = w.sigma(v1v);
    double s2 = w.v2.value(x2);
    double wv = std::max(s1, s2);
    bool both = std::abs(s1 - s2) <= tol * (1.0 + std::abs(wv));
    if (both || s1 > s2) {
      double sp = w.sigma.derivative(v1v);
      GradientHull h1 = w.v1.gradient_hull(x1, tol);
      for (const auto& g : h1.vertices) push(concat_parts(scaled(sp, g), Vec(w.n2, 0.0)));
    }
    if (both || s2 > s1) {
      GradientHull h2 = w.v2.gradient_hull(x2, tol);
      for (const auto& g : h2.vertices) push(concat_parts(Vec(w.n1, 0.0), g));
    }
    return out;
  }

  double lp = w.ell.derivative(w.v2.value(x2));
  GradientHull h1 = w.v1.gradient_hull(x1, tol);
  GradientHull h2 = w.v2.gradient_hull(x2, tol);
  for (const auto& g : h1.vertices)
    for (const auto& h : h2.vertices) push(concat_parts(g, scaled(lp, h)));
  return out;
}

LyapunovCandidate as_candidate(const CompositeLyapunov& w) {
  auto held = std::make_shared<const CompositeLyapunov>(w);
  LyapunovCandidate c;
  c.dim = held->n1 + held->n2;
  c.value = [held](const Vec& z) { return held->value(z); };
  c.hull = [held](const Vec& z, double tol) {
    if (static_cast<int>(z.size()) != held->n1 + held->n2)
      throw DimensionMismatch("composite hull got the wrong product dimension");
    Vec x1(z.begin(), z.begin() + held->n1);
    Vec x2(z.begin() + held->n1, z.end());
    return composite_gradient_hull(*held, x1, x2, tol);
  };
  return c;
}

ISSCertificate composite_certificate(const CompositeLyapunov& w) {
  return ISSCertificate{as_candidate(w), w.alpha_lo, w.alpha_hi, w.rho, w.gamma};
}

}  // namespace nsiss
