#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "nsiss/linalg.hpp"

namespace nsiss {

/// Continuously differentiable scalar field used as a region constraint
/// or as a Lyapunov piece.  Copies share the underlying implementation,
/// and that shared identity is what marks two regions as bordering the
/// same surface.
class ScalarField {
 public:
  enum class Kind { Linear, Quadratic, Callback };

  /// x -> v . x
  static ScalarField linear_form(Vec v);
  /// x -> x^T q x with q symmetric.
  static ScalarField quadratic_form(Mat q);
  static ScalarField callback(int dim, std::function<double(const Vec&)> value,
                              std::function<Vec(const Vec&)> gradient);

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  int dim() const;
  Kind kind() const;
  const Vec& linear_coeffs() const;
  const Mat& quadratic_matrix() const;

  /// Stable identity of the shared implementation.
  const void* id() const { return impl_.get(); }

 private:
  struct Impl;
  explicit ScalarField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

enum class Sign { NonNegative, NonPositive };

/// One inequality of a region description: field >= 0 or field <= 0.
struct SignConstraint {
  ScalarField field;
  Sign sign;

  /// Positive inside the constraint's half of the split, negative outside.
  double slack(const Vec& x) const {
    double v = field.value(x);
    return sign == Sign::NonNegative ? v : -v;
  }
  /// Gradient of the oriented value (points into the feasible side).
  Vec oriented_gradient(const Vec& x) const {
    Vec g = field.gradient(x);
    if (sign == Sign::NonPositive)
      for (double& v : g) v = -v;
    return g;
  }
};

/// Conjunction of sign constraints.  An empty list means the whole space.
struct Region {
  std::vector<SignConstraint> constraints;
};

struct PartitionReport {
  int samples = 0;
  int covering_failures = 0;
  int overlap_failures = 0;
  bool pass = false;
  std::vector<Vec> covering_witnesses;
  std::vector<Vec> overlap_witnesses;
};

/// Closed regions expected to cover the state space with disjoint
/// interiors.  That expectation is sample-checked by validate(), not
/// assumed, and active_indices reports every region within tolerance.
class ProperPartition {
 public:
  ProperPartition(int dim, std::vector<Region> regions);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(regions_.size()); }
  const Region& region(int i) const { return regions_.at(i); }

  /// Indices of all regions containing x up to tolerance (slack >= -tol),
  /// ascending.  Throws NoRegionContains when the list would be empty.
  std::vector<int> active_indices(const Vec& x, double tol) const;
  /// Same, but returns an empty list instead of throwing.
  std::vector<int> active_indices_or_empty(const Vec& x, double tol) const;

  /// Points on the shared boundary surface of regions i and j, found by
  /// bisecting box-sampled segments with endpoints interior to each
  /// region.  Requires the two regions to share a constraint field with
  /// opposite signs.  Deterministic in the seed.
  std::vector<Vec> surface_sample(int i, int j, int n, const Box& box, uint64_t seed) const;

  /// The shared separating constraint of two adjacent regions, as the
  /// field plus the sign it carries in region i.
  SignConstraint shared_surface(int i, int j) const;

  /// Monte Carlo covering/overlap check over a box.
  PartitionReport validate(int n, const Box& box, uint64_t seed, double tol = 1e-9) const;

 private:
  int dim_;
  std::vector<Region> regions_;
};

/// Structural equality: same dimension and per-region constraint lists
/// with identical field identities and signs.
bool same_structure(const ProperPartition& a, const ProperPartition& b);

}  // namespace nsiss
