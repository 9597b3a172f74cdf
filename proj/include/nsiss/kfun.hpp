#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nsiss/errors.hpp"

namespace nsiss {

/// Monotonicity class of a scalar comparison function on [0, inf).
/// K: zero at zero, continuous, strictly increasing.
/// Kinf: class K and unbounded.
/// PD: zero at zero, continuous, positive for s > 0.
/// NonDecreasing: nondecreasing, not required to vanish at zero.
/// Tags are conservative capability labels; operations that need a
/// property (e.g. invert) check the tag at entry.
enum class FnTag { K, Kinf, PD, NonDecreasing };

std::string tag_name(FnTag tag);
FnTag tag_from_name(const std::string& name);

struct EvalDeriv {
  double value = 0.0;
  double derivative = 0.0;
  /// Set when the derivative is one-sided (kinks of piecewise-linear
  /// forms, ties of pointwise extrema).
  bool one_sided = false;
};

/// Serializable description of a comparison function expression tree.
struct FnForm {
  std::string kind;
  std::vector<double> params;
  std::vector<std::array<double, 3>> knots;
  std::vector<FnForm> children;
  std::string tag;
};

namespace detail {
struct FnNode;
}

/// Immutable scalar comparison function on [0, inf), built from a small
/// expression grammar.  Copies share the underlying node tree.
class ComparisonFn {
 public:
  ComparisonFn() = default;

  double operator()(double s) const;
  EvalDeriv eval_and_derivative(double s) const;
  double derivative(double s) const;
  FnTag tag() const { return tag_; }
  bool valid() const { return node_ != nullptr; }

  FnForm describe() const;
  static ComparisonFn from_form(const FnForm& form);

  /// c*s with c >= 0; c > 0 gives class Kinf, c == 0 the zero function.
  static ComparisonFn linear(double c);
  /// c*s^p with c > 0, p > 0 (class Kinf).
  static ComparisonFn power(double c, double p);
  /// Constant a >= 0 (NonDecreasing).
  static ComparisonFn constant(double a);
  /// Piecewise-linear through (s, v) knots with strictly increasing s,
  /// extended beyond the last knot with the final slope.  The knot list
  /// must be consistent with the requested tag.
  static ComparisonFn piecewise_linear(const std::vector<std::array<double, 2>>& knots,
                                       FnTag tag);
  /// Monotone C1 cubic interpolant through (s, v, d) knots, extended
  /// linearly beyond the last knot with slope d_last.
  static ComparisonFn monotone_interpolant(const std::vector<std::array<double, 3>>& knots,
                                           FnTag tag);

  /// Reapply a tag the caller can justify from context (e.g. a product
  /// with a factor known to be bounded away from zero).
  static ComparisonFn retag(const ComparisonFn& f, FnTag tag);

 protected:
  ComparisonFn(std::shared_ptr<const detail::FnNode> node, FnTag tag)
      : node_(std::move(node)), tag_(tag) {}

 private:
  std::shared_ptr<const detail::FnNode> node_;
  FnTag tag_ = FnTag::NonDecreasing;

  friend ComparisonFn compose_chain(const ComparisonFn&, const ComparisonFn&);
  friend ComparisonFn fn_sum(const ComparisonFn&, const ComparisonFn&);
  friend ComparisonFn fn_max(const ComparisonFn&, const ComparisonFn&);
  friend ComparisonFn fn_min(const ComparisonFn&, const ComparisonFn&);
  friend ComparisonFn fn_scale(double, const ComparisonFn&);
  friend ComparisonFn fn_product(const ComparisonFn&, const ComparisonFn&);
  friend ComparisonFn inverse_fn(const ComparisonFn&);
  friend ComparisonFn integral_transform(const ComparisonFn&);
  friend ComparisonFn rate_pullback(const ComparisonFn&, const ComparisonFn&);
  friend double invert(const ComparisonFn&, double);
};

/// outer(inner(s)).
ComparisonFn compose_chain(const ComparisonFn& outer, const ComparisonFn& inner);
ComparisonFn fn_sum(const ComparisonFn& f, const ComparisonFn& g);
ComparisonFn fn_max(const ComparisonFn& f, const ComparisonFn& g);
ComparisonFn fn_min(const ComparisonFn& f, const ComparisonFn& g);
/// a*f(s) with a >= 0.
ComparisonFn fn_scale(double a, const ComparisonFn& f);
ComparisonFn fn_product(const ComparisonFn& f, const ComparisonFn& g);

/// Solve f(s) = y for s >= 0.  Analytic where the form allows, otherwise
/// bisection with a doubling bracket, to |f(s) - y| <= 1e-10*max(1, y).
/// Requires tag K or Kinf (NotInvertible otherwise); y outside the range
/// of a bounded class-K function raises OutOfRange.
double invert(const ComparisonFn& f, double y);
/// The inverse as a function object (evaluates via invert).
ComparisonFn inverse_fn(const ComparisonFn& f);

/// s -> integral of nu over [0, s], adaptive Simpson with absolute
/// tolerance 1e-10.  nu must be nonnegative and eventually positive
/// (NonPositiveIntegrand).  Result is class Kinf with derivative nu.
ComparisonFn integral_transform(const ComparisonFn& nu);

/// s -> sigma'(sigma^{-1}(s)) * rho(sigma^{-1}(s)); the decrease rate a
/// max-composed Lyapunov term inherits through the scaling sigma.
ComparisonFn rate_pullback(const ComparisonFn& sigma, const ComparisonFn& rho);

struct SmallGainCheck {
  bool holds = false;
  /// min over the grid of r - chi1(chi2(r)); positive when the
  /// contraction condition holds with margin.
  double worst_margin = 0.0;
  double worst_r = 0.0;
};

/// Checks chi1(chi2(r)) < r at every grid point (all must be > 0).
SmallGainCheck small_gain_holds(const ComparisonFn& chi1, const ComparisonFn& chi2,
                                const std::vector<double>& grid);

/// Builds a class-Kinf scaling sigma with chi2(r) < sigma(r) and
/// chi1(sigma(r)) < r for all r in (0, domain_max], extended linearly
/// beyond domain_max.  Throws SmallGainViolated if the contraction
/// condition fails on a probe grid, ConstructionFailed if no valid
/// interpolant is found after refinement.
ComparisonFn construct_sigma(const ComparisonFn& chi1, const ComparisonFn& chi2,
                             double domain_max);

}  // namespace nsiss
