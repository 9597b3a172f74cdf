#include <cmath>
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "nsiss/partition.hpp"

using namespace nsiss;

namespace {

// Two halfplanes split by x1 = 0, sharing one constraint field.
ProperPartition halfplane_split() {
  ScalarField f = ScalarField::linear_form({1.0, 0.0});
  Region left{{{f, Sign::NonPositive}}};
  Region right{{{f, Sign::NonNegative}}};
  return ProperPartition(2, {right, left});
}

// Cone pair split by x2^2 = x1^2, the double-cone geometry the switched
// examples use.
ProperPartition cone_split() {
  Mat q = Mat::from_rows({{-1.0, 0.0}, {0.0, 1.0}});
  ScalarField g = ScalarField::quadratic_form(q);
  Region horizontal{{{g, Sign::NonPositive}}};
  Region vertical{{{g, Sign::NonNegative}}};
  return ProperPartition(2, {horizontal, vertical});
}

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("active regions on and off a halfplane boundary") {
  ProperPartition p = halfplane_split();
  CHECK(p.active_indices({0.5, 3.0}, 1e-9) == std::vector<int>{0});
  CHECK(p.active_indices({-0.5, 3.0}, 1e-9) == std::vector<int>{1});
  CHECK(p.active_indices({0.0, -2.0}, 1e-9) == std::vector<int>{0, 1});
  // a point just off the surface is still captured by the tolerance
  CHECK(p.active_indices({-1e-10, 0.0}, 1e-9) == std::vector<int>{0, 1});
  CHECK(p.active_indices({-1e-10, 0.0}, 0.0) == std::vector<int>{1});
}

TEST_CASE("interior points activate exactly one region at zero tolerance") {
  ProperPartition p = cone_split();
  Rng rng(21);
  Box box{{-5.0, -5.0}, {5.0, 5.0}};
  for (int i = 0; i < 500; ++i) {
    Vec x = rng.in_box(box);
    if (std::abs(x[1] * x[1] - x[0] * x[0]) < 1e-6) continue;
    CHECK(p.active_indices(x, 0.0).size() == 1);
  }
  CHECK(p.active_indices({2.0, 0.0}, 1e-9) == std::vector<int>{0});
  CHECK(p.active_indices({0.0, 2.0}, 1e-9) == std::vector<int>{1});
  CHECK(p.active_indices({1.0, 1.0}, 1e-9) == std::vector<int>{0, 1});
  CHECK(p.active_indices({1.0, -1.0}, 1e-9) == std::vector<int>{0, 1});
}

TEST_CASE("uncovered queries throw or return empty") {
  ScalarField f = ScalarField::linear_form({1.0, 0.0});
  ProperPartition half(2, {Region{{{f, Sign::NonNegative}}}});
  CHECK_THROWS_AS(half.active_indices({-0.5, 0.0}, 1e-9), NoRegionContains);
  CHECK(half.active_indices_or_empty({-0.5, 0.0}, 1e-9).empty());
  CHECK(half.active_indices_or_empty({0.5, 0.0}, 1e-9) == std::vector<int>{0});
}

TEST_CASE("surface samples sit on the boundary") {
  Box box{{-5.0, -5.0}, {5.0, 5.0}};

  ProperPartition flat = halfplane_split();
  std::vector<Vec> pts = flat.surface_sample(0, 1, 50, box, 7);
  REQUIRE(pts.size() == 50);
  for (const Vec& z : pts) {
    CHECK(std::abs(z[0]) <= 1e-10);
    CHECK(flat.active_indices(z, 1e-8).size() >= 2);
  }

  ProperPartition cones = cone_split();
  std::vector<Vec> qs = cones.surface_sample(0, 1, 80, box, 7);
  REQUIRE(qs.size() == 80);
  for (const Vec& z : qs) {
    CHECK(std::abs(z[1] * z[1] - z[0] * z[0]) <= 1e-10);
    CHECK(cones.active_indices(z, 1e-8).size() >= 2);
  }

  CHECK(flat.surface_sample(0, 1, 0, box, 7).empty());
}

TEST_CASE("surface sampling is deterministic in the seed") {
  Box box{{-5.0, -5.0}, {5.0, 5.0}};
  ProperPartition cones = cone_split();
  std::vector<Vec> a = cones.surface_sample(0, 1, 20, box, 99);
  std::vector<Vec> b = cones.surface_sample(0, 1, 20, box, 99);
  REQUIRE(a.size() == b.size());
  for (size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k][0] == b[k][0]);
    CHECK(a[k][1] == b[k][1]);
  }
}

TEST_CASE("shared surface reports the separating field") {
  ScalarField f = ScalarField::linear_form({1.0, 0.0});
  Region right{{{f, Sign::NonNegative}}};
  Region left{{{f, Sign::NonPositive}}};
  ProperPartition p(2, {right, left});
  SignConstraint s = p.shared_surface(0, 1);
  CHECK(s.field.id() == f.id());
  CHECK(s.sign == Sign::NonNegative);
  SignConstraint flipped = p.shared_surface(1, 0);
  CHECK(flipped.sign == Sign::NonPositive);

  ScalarField g = ScalarField::linear_form({0.0, 1.0});
  ProperPartition unrelated(2, {Region{{{f, Sign::NonNegative}}},
                                Region{{{g, Sign::NonNegative}}}});
  CHECK_THROWS_AS(unrelated.shared_surface(0, 1), NoCrossingFound);
}

TEST_CASE("validate accepts a genuine partition") {
  Box box{{-3.0, -3.0}, {3.0, 3.0}};
  PartitionReport rep = cone_split().validate(2000, box, 5);
  CHECK(rep.pass);
  CHECK(rep.samples == 2000);
  CHECK(rep.covering_failures == 0);
  CHECK(rep.overlap_failures == 0);
}

TEST_CASE("validate flags overlapping interiors with witnesses") {
  ScalarField f = ScalarField::linear_form({1.0, 0.0});
  Region right{{{f, Sign::NonNegative}}};
  Region also_right{{{f, Sign::NonNegative}}};
  Region left{{{f, Sign::NonPositive}}};
  ProperPartition doubled(2, {right, also_right, left});
  Box box{{-1.0, -1.0}, {1.0, 1.0}};
  PartitionReport rep = doubled.validate(500, box, 5);
  CHECK(!rep.pass);
  CHECK(rep.overlap_failures > 0);
  CHECK(rep.covering_failures == 0);
  REQUIRE(!rep.overlap_witnesses.empty());
  CHECK(rep.overlap_witnesses.front()[0] > 0.0);
}

TEST_CASE("validate flags covering gaps with witnesses") {
  ScalarField f = ScalarField::linear_form({1.0, 0.0});
  ProperPartition half(2, {Region{{{f, Sign::NonNegative}}}});
  Box box{{-1.0, -1.0}, {1.0, 1.0}};
  PartitionReport rep = half.validate(500, box, 5);
  CHECK(!rep.pass);
  CHECK(rep.covering_failures > 0);
  REQUIRE(!rep.covering_witnesses.empty());
  CHECK(rep.covering_witnesses.front()[0] < 0.0);
}

TEST_CASE("structural equality follows field identity") {
  ScalarField f = ScalarField::linear_form({1.0, 0.0});
  Region right{{{f, Sign::NonNegative}}};
  Region left{{{f, Sign::NonPositive}}};
  ProperPartition a(2, {right, left});
  ProperPartition b(2, {right, left});
  CHECK(same_structure(a, b));

  // same coefficients, different field object
  ScalarField f2 = ScalarField::linear_form({1.0, 0.0});
  ProperPartition c(2, {Region{{{f2, Sign::NonNegative}}},
                        Region{{{f2, Sign::NonPositive}}}});
  CHECK(!same_structure(a, c));

  ProperPartition d(2, {left, right});
  CHECK(!same_structure(a, d));
}

TEST_CASE("callback fields participate like built-in forms") {
  ScalarField f = ScalarField::callback(
      2, [](const Vec& x) { return x[0] + x[1] * x[1]; },
      [](const Vec& x) { return Vec{1.0, 2.0 * x[1]}; });
  Region plus{{{f, Sign::NonNegative}}};
  Region minus{{{f, Sign::NonPositive}}};
  ProperPartition p(2, {plus, minus});
  Box box{{-4.0, -1.5}, {4.0, 1.5}};
  CHECK(p.validate(1000, box, 11).pass);
  std::vector<Vec> pts = p.surface_sample(0, 1, 30, box, 3);
  for (const Vec& z : pts) CHECK(std::abs(z[0] + z[1] * z[1]) <= 1e-10);
}

TEST_CASE("construction rejects malformed inputs") {
  ScalarField f = ScalarField::linear_form({1.0, 0.0});
  CHECK_THROWS_AS(ProperPartition(0, {}), DimensionMismatch);
  CHECK_THROWS_AS(ProperPartition(2, {}), EmptyGrid);
  ScalarField f3 = ScalarField::linear_form({1.0, 0.0, 0.0});
  CHECK_THROWS_AS(ProperPartition(2, {Region{{{f3, Sign::NonNegative}}}}),
                  DimensionMismatch);
  CHECK_THROWS_AS(f.value({1.0, 2.0, 3.0}), DimensionMismatch);
}

}  // TEST_SUITE
