#pragma once

#include "nsiss/certify.hpp"
#include "nsiss/kfun.hpp"
#include "nsiss/nonsmooth.hpp"

namespace nsiss {

/// Per-subsystem ISS data on its own state space, in level form: the
/// value of V is sandwiched by alpha_lo/alpha_hi of |x|, rho is the
/// decrease rate applied to the value of V, chi the gain on the partner
/// subsystem's value, gamma the gain on the external input.
struct SubsystemCertificate {
  PiecewiseC1Fn V;
  ComparisonFn alpha_lo;
  ComparisonFn alpha_hi;
  ComparisonFn rho;
  ComparisonFn chi;
  ComparisonFn gamma;
};

/// Composite Lyapunov function on the product state space: either
/// max{sigma(V1(x1)), V2(x2)} or ell(V2(x2)) + V1(x1), together with
/// the decrease rate and input gain the construction yields.  rho is
/// applied to the value of W (level form), and alpha_lo/alpha_hi
/// sandwich W in the product norm |(x1,x2)|.
struct CompositeLyapunov {
  enum class Kind { MaxSmallGain, SumCascade };

  Kind kind;
  PiecewiseC1Fn v1;
  PiecewiseC1Fn v2;
  ComparisonFn sigma;  // max form scaling of V1
  ComparisonFn nu;     // cascade integrand
  ComparisonFn ell;    // cascade integral of nu
  ComparisonFn rho;
  ComparisonFn gamma;
  ComparisonFn alpha_lo;
  ComparisonFn alpha_hi;
  int n1 = 0;
  int n2 = 0;

  double value(const Vec& x1, const Vec& x2) const;
  /// Concatenated state (x1, x2).
  double value(const Vec& z) const;
};

/// Max-form composition under the contraction chi1(chi2(r)) < r.  The
/// scaling sigma satisfies chi2(r) < sigma(r) and chi1(sigma(r)) < r on
/// (0, domain_max]; the composite inherits gamma = max{sigma(gamma1),
/// gamma2} and rho = min{pullback of rho1 through sigma, rho2}.
CompositeLyapunov small_gain_compose(const SubsystemCertificate& c1,
                                     const SubsystemCertificate& c2, double domain_max);

/// Sum-form composition for a cascade (subsystem 2 feeds subsystem 1,
/// so c1.chi is the gain on V2 and the input gain of both blocks is
/// c2.gamma).  Requires class-Kinf decrease rates and the ratio
/// chi1/rho2 bounded by M_cap as s -> 0+ (RatioUnbounded otherwise).
/// nu dominates 4*chi1/rho2 as a nondecreasing envelope, ell is its
/// integral, and the composite gains are gamma(s) = (nu(theta(s)) + 1)
/// * gamma2(s) with theta = rho2^{-1}(2*gamma2) and rho(s) =
/// min{rho1(s/2), chi1(ell^{-1}(s)/2)}.
CompositeLyapunov cascade_compose(const SubsystemCertificate& c1,
                                  const SubsystemCertificate& c2, double m_cap);

/// Generalized gradient vertices of the composite at (x1, x2).  The max
/// form takes the dominating branch, or both branches where the two are
/// within tol*(1 + |W|) of each other; the sum form takes all pairs
/// (g, ell'(V2)*h).
GradientHull composite_gradient_hull(const CompositeLyapunov& w, const Vec& x1,
                                     const Vec& x2, double tol);

/// The composite as a checkable candidate on the concatenated state.
LyapunovCandidate as_candidate(const CompositeLyapunov& w);

/// Candidate plus the derived sandwich, rate and gain, ready for the
/// level-form dissipation check.
ISSCertificate composite_certificate(const CompositeLyapunov& w);

}  // namespace nsiss
