#include <cmath>
#include <vector>

#include "doctest.h"
#include "nsiss/kfun.hpp"
#include "nsiss/linalg.hpp"

using namespace nsiss;

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i)
    g[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
  return g;
}

// Small pool of invertible functions for randomized properties.
ComparisonFn random_k_fn(Rng& rng) {
  switch (rng.raw() % 3) {
    case 0:
      return ComparisonFn::linear(rng.range(0.1, 5.0));
    case 1:
      return ComparisonFn::power(rng.range(0.1, 3.0), rng.range(0.3, 3.0));
    default: {
      double s1 = rng.range(0.2, 2.0), s2 = s1 + rng.range(0.2, 2.0);
      double v1 = rng.range(0.2, 2.0), v2 = v1 + rng.range(0.2, 2.0);
      return ComparisonFn::piecewise_linear({{0, 0}, {s1, v1}, {s2, v2}}, FnTag::K);
    }
  }
}

}  // namespace

TEST_SUITE("kfun") {

TEST_CASE("linear evaluation and derivative") {
  auto f = ComparisonFn::linear(2.0);
  auto ed = f.eval_and_derivative(3.0);
  CHECK(ed.value == doctest::Approx(6.0));
  CHECK(ed.derivative == doctest::Approx(2.0));
}

TEST_CASE("power vanishes at zero with zero slope") {
  auto f = ComparisonFn::power(1.0, 2.0);
  auto ed = f.eval_and_derivative(0.0);
  CHECK(ed.value == 0.0);
  CHECK(ed.derivative == 0.0);
}

TEST_CASE("scaled square chains the derivative") {
  auto f = fn_scale(3.0, ComparisonFn::power(1.0, 2.0));
  auto ed = f.eval_and_derivative(2.0);
  CHECK(ed.value == doctest::Approx(12.0));
  CHECK(ed.derivative == doctest::Approx(12.0));
}

TEST_CASE("negative arguments are rejected") {
  auto f = ComparisonFn::linear(1.0);
  CHECK_THROWS_AS(f(-0.5), NegativeArgument);
}

TEST_CASE("analytic inverses") {
  CHECK(invert(ComparisonFn::power(1, 2), 9.0) == doctest::Approx(3.0));
  CHECK(invert(ComparisonFn::linear(2), 5.0) == doctest::Approx(2.5));
}

TEST_CASE("piecewise linear inverse interpolates between knots") {
  auto f = ComparisonFn::piecewise_linear({{0, 0}, {1, 2}, {2, 6}}, FnTag::K);
  CHECK(invert(f, 4.0) == doctest::Approx(1.5));
}

TEST_CASE("nondecreasing functions are not invertible") {
  CHECK_THROWS_AS(invert(ComparisonFn::constant(2.0), 1.0), NotInvertible);
}

TEST_CASE("invert is a right inverse on random functions") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    ComparisonFn f = random_k_fn(rng);
    double y = f(rng.range(0.0, 10.0));
    double s = invert(f, y);
    CHECK(std::abs(f(s) - y) <= 1e-10 * std::max(1.0, y));
  }
}

TEST_CASE("composition evaluates outer after inner") {
  CHECK(compose_chain(ComparisonFn::linear(2), ComparisonFn::linear(3))(1.0) ==
        doctest::Approx(6.0));
  CHECK(compose_chain(ComparisonFn::power(1, 2), ComparisonFn::linear(2))(3.0) ==
        doctest::Approx(36.0));
}

TEST_CASE("composition of increasing functions is increasing") {
  auto f = compose_chain(ComparisonFn::power(1.5, 1.3), ComparisonFn::linear(0.7));
  double prev = f(0.1);
  for (double s : log_grid(0.12, 10.0, 200)) {
    CHECK(f(s) > prev);
    prev = f(s);
  }
}

TEST_CASE("pointwise extrema") {
  CHECK(fn_max(ComparisonFn::linear(1), ComparisonFn::linear(2))(3.0) ==
        doctest::Approx(6.0));
  CHECK(fn_min(ComparisonFn::linear(1), ComparisonFn::power(1, 2))(0.5) ==
        doctest::Approx(0.25));
}

TEST_CASE("extremum of a function with itself is the function") {
  auto f = ComparisonFn::power(2, 1.5);
  auto m = fn_max(f, f);
  for (double s : log_grid(0.01, 100.0, 50))
    CHECK(m(s) == doctest::Approx(f(s)));
}

TEST_CASE("integral of a constant is linear") {
  auto ell = integral_transform(ComparisonFn::constant(2.0));
  CHECK(ell(1.0) == doctest::Approx(2.0));
  CHECK(ell(4.5) == doctest::Approx(9.0));
}

TEST_CASE("integral of the identity is the half square") {
  auto ell = integral_transform(ComparisonFn::linear(1.0));
  CHECK(ell(3.0) == doctest::Approx(4.5).epsilon(1e-12));
}

TEST_CASE("integral of a piecewise linear integrand matches the trapezoid rule") {
  auto nu = ComparisonFn::piecewise_linear({{0, 0.5}, {1, 1.5}, {3, 2.0}},
                                           FnTag::NonDecreasing);
  auto ell = integral_transform(nu);
  // n chosen so the integrand knots at 1 and 3 land on trapezoid nodes,
  // keeping the rule exact for a piecewise linear integrand.
  for (double s : {0.5, 1.0, 2.0, 4.0, 6.0}) {
    int n = 4800;
    double acc = 0.0, h = s / n;
    for (int i = 0; i < n; ++i)
      acc += 0.5 * h * (nu(i * h) + nu((i + 1) * h));
    CHECK(std::abs(ell(s) - acc) <= 1e-9);
  }
}

TEST_CASE("integral derivative recovers the integrand") {
  auto nu = ComparisonFn::piecewise_linear({{0, 0.3}, {2, 1.1}, {4, 1.2}},
                                           FnTag::NonDecreasing);
  auto ell = integral_transform(nu);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    double s = rng.range(0.05, 6.0), h = 1e-4;
    double fd = (ell(s + h) - ell(s - h)) / (2 * h);
    CHECK(std::abs(fd - nu(s)) <= 1e-6);
  }
}

TEST_CASE("integral transform rejects integrands that vanish identically") {
  CHECK_THROWS_AS(integral_transform(ComparisonFn::constant(0.0)),
                  NonPositiveIntegrand);
}

TEST_CASE("small gain contraction holds for a shrinking pair") {
  auto grid = log_grid(1e-2, 1e2, 100);
  auto r = small_gain_holds(ComparisonFn::linear(0.25), ComparisonFn::linear(0.5), grid);
  CHECK(r.holds);
  // margin at r is 7r/8, smallest at the left end of the grid
  CHECK(r.worst_margin == doctest::Approx(7.0 / 8.0 * grid.front()));
}

TEST_CASE("small gain fails for an expanding pair") {
  auto r = small_gain_holds(ComparisonFn::linear(2), ComparisonFn::linear(1),
                            log_grid(1e-2, 1e2, 100));
  CHECK_FALSE(r.holds);
}

TEST_CASE("small gain requires strict contraction") {
  // composition is exactly the identity
  auto r = small_gain_holds(ComparisonFn::linear(0.5), ComparisonFn::linear(2),
                            log_grid(1e-2, 1e2, 100));
  CHECK_FALSE(r.holds);
}

TEST_CASE("small gain rejects an empty grid") {
  CHECK_THROWS_AS(small_gain_holds(ComparisonFn::linear(0.5), ComparisonFn::linear(1), {}),
                  EmptyGrid);
}

TEST_CASE("sigma for a linear pair is the geometric mean") {
  auto sigma = construct_sigma(ComparisonFn::linear(0.25), ComparisonFn::linear(0.5), 10.0);
  CHECK(sigma(2.0) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-9));
  CHECK(sigma(0.0) == 0.0);
}

TEST_CASE("sigma separates the gains strictly") {
  auto chi1 = ComparisonFn::power(0.9, 2.0);
  auto chi2 = ComparisonFn::power(1.0, 0.5);
  auto sigma = construct_sigma(chi1, chi2, 50.0);
  for (double r : log_grid(1e-4, 50.0, 1000)) {
    CHECK(chi2(r) < sigma(r));
    CHECK(chi1(sigma(r)) < r);
  }
}

TEST_CASE("sigma with no feedback gain sits just above the forward gain") {
  auto chi2 = ComparisonFn::linear(0.5);
  auto sigma = construct_sigma(ComparisonFn::linear(0.0), chi2, 10.0);
  for (double r : log_grid(1e-3, 10.0, 200))
    CHECK(chi2(r) < sigma(r));
}

TEST_CASE("sigma construction refuses violated small gain") {
  CHECK_THROWS_AS(construct_sigma(ComparisonFn::linear(2), ComparisonFn::linear(1), 10.0),
                  SmallGainViolated);
}

TEST_CASE("rate pullback through a linear sigma is the conjugated rate") {
  auto sigma = construct_sigma(ComparisonFn::linear(0.25), ComparisonFn::linear(0.5), 100.0);
  auto r = rate_pullback(sigma, ComparisonFn::linear(1.0));
  // sigma(r) = sqrt(2) r, so the pullback is the identity rate
  for (double s : {0.5, 1.0, 3.0})
    CHECK(r(s) == doctest::Approx(s).epsilon(1e-8));
}

TEST_CASE("extrema and compositions stay monotone on random pairs") {
  Rng rng(99);
  auto grid = log_grid(1e-3, 1e3, 1000);
  for (int trial = 0; trial < 20; ++trial) {
    ComparisonFn f = random_k_fn(rng), g = random_k_fn(rng);
    for (auto h : {compose_chain(f, g), fn_max(f, g), fn_min(f, g)}) {
      double prev = -1.0;
      for (double s : grid) {
        double v = h(s);
        CHECK(v > prev);
        prev = v;
      }
    }
  }
}

TEST_CASE("forms round trip through their descriptions") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    ComparisonFn f = random_k_fn(rng);
    ComparisonFn g = ComparisonFn::from_form(f.describe());
    CHECK(g.tag() == f.tag());
    for (double s : {0.0, 0.3, 1.7, 9.0})
      CHECK(g(s) == doctest::Approx(f(s)).epsilon(1e-12));
  }
}

}  // TEST_SUITE
