#pragma once

#include <limits>
#include <vector>

#include "nsiss/partition.hpp"

namespace nsiss {

/// Vertices of the generalized gradient at a point: one gradient per
/// active piece, in ascending piece order.
struct GradientHull {
  std::vector<Vec> vertices;
  std::vector<int> active;
};

/// Vertices of the convexified right-hand side at a point: one vector
/// field value per active region, in ascending region order.
struct FilippovHull {
  std::vector<Vec> vertices;
  std::vector<int> active;
};

/// Closed interval of attainable derivative values, possibly empty.
struct DerivativeInterval {
  bool empty = true;
  double lo = 0.0;
  double hi = 0.0;

  static DerivativeInterval make(double lo, double hi) { return {false, lo, hi}; }
  static DerivativeInterval none() { return {}; }
  /// Upper endpoint under the convention max over the empty set = -inf.
  double max_or_neg_inf() const {
    return empty ? -std::numeric_limits<double>::infinity() : hi;
  }
};

/// Scalar function given by C1 pieces over a partition, continuous
/// across boundaries (checked by continuity_check, not assumed).
class PiecewiseC1Fn {
 public:
  PiecewiseC1Fn(ProperPartition partition, std::vector<ScalarField> pieces);
  /// Pieces x^T P_j x from symmetric matrices.
  static PiecewiseC1Fn piecewise_quadratic(ProperPartition partition,
                                           const std::vector<Mat>& p);

  double value(const Vec& x) const;
  double piece_value(int j, const Vec& x) const;
  Vec piece_gradient(int j, const Vec& x) const;

  /// Generalized gradient vertices from the pieces active within tol.
  GradientHull gradient_hull(const Vec& x, double tol) const;

  const ProperPartition& partition() const { return partition_; }
  const std::vector<ScalarField>& pieces() const { return pieces_; }
  int dim() const { return partition_.dim(); }

 private:
  ProperPartition partition_;
  std::vector<ScalarField> pieces_;
};

/// Interval {<p, f> : p in co(gradients), f in co(fields)}; bilinear, so
/// the endpoints are attained at vertex pairs.
DerivativeInterval clarke_interval(const GradientHull& grads, const FilippovHull& fields);

/// Interval {a : exists f in co(fields) with <p, f> = a for every p in
/// co(gradients)}.  Empty when no field value produces a direction all
/// gradients agree on.  Always contained in the Clarke interval.
DerivativeInterval lie_interval(const GradientHull& grads, const FilippovHull& fields);

DerivativeInterval clarke_interval(const PiecewiseC1Fn& v, const FilippovHull& fields,
                                   const Vec& x, double tol = 1e-8);
DerivativeInterval lie_interval(const PiecewiseC1Fn& v, const FilippovHull& fields,
                                const Vec& x, double tol = 1e-8);

struct SurfacePairSamples {
  int i = 0;
  int j = 0;
  std::vector<Vec> points;
};

struct ContinuityReport {
  bool pass = false;
  int checked = 0;
  double worst_gap = 0.0;
  int worst_i = -1;
  int worst_j = -1;
  Vec worst_x;
};

/// Checks |V_i - V_j| <= tol * max(1, |V_i|) at surface sample points.
ContinuityReport continuity_check(const PiecewiseC1Fn& v,
                                  const std::vector<SurfacePairSamples>& samples,
                                  double tol);

/// minimize c . x over {A x = b, x >= 0} by the two-phase simplex
/// method with Bland's rule.  Returns false when infeasible.
bool lp_min(const Mat& a, const Vec& b, const Vec& c, double& out_value);

}  // namespace nsiss
