#include "nsiss/partition.hpp"

#include <algorithm>
#include <cmath>

#include "nsiss/errors.hpp"

namespace nsiss {

struct ScalarField::Impl {
  Kind kind;
  int dim;
  Vec v;
  Mat q;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

ScalarField ScalarField::linear_form(Vec v) {
  if (v.empty()) throw DimensionMismatch("linear form needs at least one coefficient");
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Linear;
  impl->dim = static_cast<int>(v.size());
  impl->v = std::move(v);
  return ScalarField(impl);
}

ScalarField ScalarField::quadratic_form(Mat q) {
  require_symmetric(q);
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Quadratic;
  impl->dim = q.rows;
  impl->q = std::move(q);
  return ScalarField(impl);
}

ScalarField ScalarField::callback(int dim, std::function<double(const Vec&)> value,
                                  std::function<Vec(const Vec&)> gradient) {
  if (dim <= 0) throw DimensionMismatch("callback field needs a positive dimension");
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Callback;
  impl->dim = dim;
  impl->value = std::move(value);
  impl->gradient = std::move(gradient);
  return ScalarField(impl);
}

double ScalarField::value(const Vec& x) const {
  if (static_cast<int>(x.size()) != impl_->dim)
    throw DimensionMismatch("field evaluated at wrong dimension");
  switch (impl_->kind) {
    case Kind::Linear:
      return dot(impl_->v, x);
    case Kind::Quadratic:
      return dot(x, impl_->q * x);
    case Kind::Callback:
      return impl_->value(x);
  }
  return 0.0;
}

Vec ScalarField::gradient(const Vec& x) const {
  if (static_cast<int>(x.size()) != impl_->dim)
    throw DimensionMismatch("field gradient at wrong dimension");
  switch (impl_->kind) {
    case Kind::Linear:
      return impl_->v;
    case Kind::Quadratic:
      return scaled(2.0, impl_->q * x);
    case Kind::Callback:
      return impl_->gradient(x);
  }
  return Vec(impl_->dim, 0.0);
}

int ScalarField::dim() const { return impl_->dim; }
ScalarField::Kind ScalarField::kind() const { return impl_->kind; }

const Vec& ScalarField::linear_coeffs() const {
  if (impl_->kind != Kind::Linear) throw SchemaError("field is not a linear form");
  return impl_->v;
}

const Mat& ScalarField::quadratic_matrix() const {
  if (impl_->kind != Kind::Quadratic) throw SchemaError("field is not a quadratic form");
  return impl_->q;
}

ProperPartition::ProperPartition(int dim, std::vector<Region> regions)
    : dim_(dim), regions_(std::move(regions)) {
  if (dim_ <= 0) throw DimensionMismatch("partition dimension must be positive");
  if (regions_.empty()) throw EmptyGrid("partition needs at least one region");
  for (const Region& r : regions_)
    for (const SignConstraint& c : r.constraints)
      if (c.field.dim() != dim_)
        throw DimensionMismatch("constraint field dimension differs from partition");
}

std::vector<int> ProperPartition::active_indices_or_empty(const Vec& x, double tol) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    bool inside = true;
    for (const SignConstraint& c : regions_[i].constraints)
      if (c.slack(x) < -tol) {
        inside = false;
        break;
      }
    if (inside) out.push_back(i);
  }
  return out;
}

std::vector<int> ProperPartition::active_indices(const Vec& x, double tol) const {
  std::vector<int> out = active_indices_or_empty(x, tol);
  if (out.empty()) throw NoRegionContains("no region contains the query point");
  return out;
}

SignConstraint ProperPartition::shared_surface(int i, int j) const {
  if (i < 0 || j < 0 || i >= size() || j >= size() || i == j)
    throw OutOfRange("invalid region pair");
  for (const SignConstraint& ci : regions_[i].constraints)
    for (const SignConstraint& cj : regions_[j].constraints)
      if (ci.field.id() == cj.field.id() && ci.sign != cj.sign) return ci;
  throw NoCrossingFound("regions do not share a separating constraint field");
}

std::vector<Vec> ProperPartition::surface_sample(int i, int j, int n, const Box& box,
                                                 uint64_t seed) const {
  if (box.dim() != dim_) throw DimensionMismatch("box dimension differs from partition");
  SignConstraint surf = shared_surface(i, j);
  std::vector<Vec> out;
  if (n <= 0) return out;

  Rng rng(seed);
  auto strictly_inside = [&](int r, const Vec& x) {
    for (const SignConstraint& c : regions_[r].constraints)
      if (c.slack(x) <= 1e-9) return false;
    return true;
  };
  auto draw_inside = [&](int r) -> Vec {
    for (int tries = 0; tries < 100000; ++tries) {
      Vec x = rng.in_box(box);
      if (strictly_inside(r, x)) return x;
    }
    throw NoCrossingFound("could not sample an interior point of a region in the box");
  };

  int guard = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++guard > 1000 * n)
      throw NoCrossingFound("surface sampling kept missing the shared boundary");
    Vec a = draw_inside(i);
    Vec b = draw_inside(j);
    // The shared field's oriented value is positive at a, negative at b;
    // bisect the segment to its zero.
    double lo = 0.0, hi = 1.0;
    Vec x;
    double phi = 0.0;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      x = axpy(a, mid, sub(b, a));
      phi = surf.slack(x);
      if (std::abs(phi) <= 1e-10) break;
      if (phi > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    if (std::abs(phi) > 1e-10) continue;
    // The segment may cross other surfaces first; keep only points where
    // both requested regions are active.
    std::vector<int> act = active_indices_or_empty(x, 1e-8);
    if (std::find(act.begin(), act.end(), i) == act.end()) continue;
    if (std::find(act.begin(), act.end(), j) == act.end()) continue;
    out.push_back(x);
  }
  return out;
}

PartitionReport ProperPartition::validate(int n, const Box& box, uint64_t seed,
                                          double tol) const {
  if (box.dim() != dim_) throw DimensionMismatch("box dimension differs from partition");
  PartitionReport rep;
  rep.samples = n;
  Rng rng(seed);
  for (int k = 0; k < n; ++k) {
    Vec x = rng.in_box(box);
    int covering = 0, strict = 0;
    for (int i = 0; i < size(); ++i) {
      bool inside = true, interior = true;
      for (const SignConstraint& c : regions_[i].constraints) {
        double s = c.slack(x);
        if (s < -tol) inside = false;
        if (s <= tol) interior = false;
      }
      if (inside) ++covering;
      if (interior) ++strict;
    }
    if (covering == 0) {
      ++rep.covering_failures;
      if (rep.covering_witnesses.size() < 10) rep.covering_witnesses.push_back(x);
    }
    if (strict > 1) {
      ++rep.overlap_failures;
      if (rep.overlap_witnesses.size() < 10) rep.overlap_witnesses.push_back(x);
    }
  }
  rep.pass = rep.covering_failures == 0 && rep.overlap_failures == 0;
  return rep;
}

bool same_structure(const ProperPartition& a, const ProperPartition& b) {
  if (a.dim() != b.dim() || a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i) {
    const auto& ca = a.region(i).constraints;
    const auto& cb = b.region(i).constraints;
    if (ca.size() != cb.size()) return false;
    for (size_t k = 0; k < ca.size(); ++k)
      if (ca[k].field.id() != cb[k].field.id() || ca[k].sign != cb[k].sign) return false;
  }
  return true;
}

}  // namespace nsiss
