#include "nsiss/linmat.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "nsiss/errors.hpp"

namespace nsiss {

namespace {

constexpr double kVerifyTol = 1e-8;
constexpr double kDefiniteTol = 1e-12;

/// One matrix inequality result folded into a CheckReport row.
ConditionStat matrix_condition(std::string name, double value, double bound,
                               double margin) {
  ConditionStat s;
  s.name = std::move(name);
  s.checked = 1;
  s.worst_margin = margin;
  s.pass = !(margin < 0.0);
  s.worst.value = value;
  s.worst.bound = bound;
  return s;
}

CheckReport finish_report(std::vector<ConditionStat> conditions) {
  CheckReport r;
  r.pass = true;
  for (const ConditionStat& c : conditions) r.pass = r.pass && c.pass;
  r.total_samples = static_cast<int>(conditions.size());
  r.conditions = std::move(conditions);
  return r;
}

void require_square(const Mat& m, int n, const char* what) {
  if (m.rows != n || m.cols != n)
    throw DimensionMismatch(std::string(what) + " must be " + std::to_string(n) +
                            "x" + std::to_string(n));
}

const Mat& switching_matrix(const LinearSwitchedPlant& plant) {
  if (plant.q.kind() != ScalarField::Kind::Quadratic)
    throw TagMismatch(
        "matrix conditions need a quadratic switching form; a halfspace "
        "split has no multiplier term");
  return plant.q.quadratic_matrix();
}

}  // namespace

LinearSwitchedPlant LinearSwitchedPlant::make(Mat a1, Mat a2, Mat b, Mat c,
                                              ScalarField q) {
  const int n = a1.rows;
  require_square(a1, n, "mode matrix A1");
  require_square(a2, n, "mode matrix A2");
  if (b.rows != n) throw DimensionMismatch("input matrix row count differs from state dimension");
  if (c.cols != n) throw DimensionMismatch("output matrix column count differs from state dimension");
  if (q.dim() != n) throw DimensionMismatch("switching field dimension differs from state dimension");
  if (q.kind() == ScalarField::Kind::Callback)
    throw ConstructionFailed("switching field must be a linear or quadratic form");
  if (q.kind() == ScalarField::Kind::Quadratic) {
    const Mat& qm = q.quadratic_matrix();
    if (!(min_sym_eigenvalue(qm) < 0.0 && max_sym_eigenvalue(qm) > 0.0))
      throw ConstructionFailed("quadratic switching form must be indefinite");
  }
  return {std::move(a1), std::move(a2), std::move(b), std::move(c), std::move(q)};
}

double lmi_residual(const Mat& m) {
  require_symmetric(m);
  return max_sym_eigenvalue(m);
}

CheckReport verify_plant_lmis(const LinearSwitchedPlant& plant,
                              const ControllerDesign& design, double tol) {
  const int n = plant.dim();
  if (design.k.rows != plant.input_dim() || design.k.cols != n)
    throw DimensionMismatch("feedback gain must map state to input");
  require_square(design.p1, n, "P1");
  require_square(design.p2, n, "P2");
  require_symmetric(design.p1);
  require_symmetric(design.p2);
  if (design.mu1 < 0.0 || design.mu2 < 0.0)
    throw OutOfRange("own-region multipliers must be nonnegative");
  if (!(design.a_x > 0.0)) throw OutOfRange("state decrease margin must be positive");
  if (!(design.eps_share > 0.0 && design.eps_share < 1.0))
    throw OutOfRange("margin share must lie in (0, 1)");
  if (!(tol >= 0.0)) throw OutOfRange("tolerance must be nonnegative");

  const Mat& qm = switching_matrix(plant);
  const Mat eye = Mat::identity(n);
  const Mat acl1 = plant.a1 + plant.b * design.k;
  const Mat acl2 = plant.a2 + plant.b * design.k;

  std::vector<ConditionStat> conds;
  const double p1_min = min_sym_eigenvalue(design.p1);
  conds.push_back(matrix_condition("p1_positive_definite", p1_min, tol, p1_min - tol));
  const double p2_min = min_sym_eigenvalue(design.p2);
  conds.push_back(matrix_condition("p2_positive_definite", p2_min, tol, p2_min - tol));

  const double gap = spectral_norm(design.p1 - design.p2 - design.mu_q * qm);
  conds.push_back(matrix_condition("continuity", gap, tol, tol - gap));

  const auto decrease = [&](std::string name, double mu, const Mat& p, const Mat& acl) {
    const double top =
        lmi_residual(mu * qm + sym_part_doubled(p * acl) + design.a_x * eye);
    conds.push_back(matrix_condition(std::move(name), top, -tol, -tol - top));
  };
  decrease("mode1_decrease", design.mu1, design.p1, acl1);
  decrease("mode2_decrease", -design.mu2, design.p2, acl2);
  decrease("cross_12", design.mu12, design.p1, acl2);
  decrease("cross_21", design.mu21, design.p2, acl1);

  return finish_report(std::move(conds));
}

CheckReport verify_observer_lmis(const LinearSwitchedPlant& plant,
                                 const ControllerDesign& design, double tol) {
  const int n = plant.dim();
  const int p = plant.c.rows;
  if (p < 1) throw DimensionMismatch("observer design needs at least one output");
  if (design.l1.rows != n || design.l1.cols != p ||
      design.l2.rows != n || design.l2.cols != p)
    throw DimensionMismatch("observer gains must map output to state");
  require_square(design.pe, n, "Pe");
  require_symmetric(design.pe);
  if (!(design.a_e > 0.0)) throw OutOfRange("error decrease margin must be positive");
  if (!(tol >= 0.0)) throw OutOfRange("tolerance must be nonnegative");

  const Mat eye = Mat::identity(n);
  std::vector<ConditionStat> conds;
  const double pe_min = min_sym_eigenvalue(design.pe);
  conds.push_back(matrix_condition("pe_positive_definite", pe_min, tol, pe_min - tol));

  const auto decrease = [&](std::string name, const Mat& a, const Mat& l) {
    const double top =
        lmi_residual(sym_part_doubled(design.pe * (a - l * plant.c)) + design.a_e * eye);
    conds.push_back(matrix_condition(std::move(name), top, -tol, -tol - top));
  };
  decrease("observer1_decrease", plant.a1, design.l1);
  decrease("observer2_decrease", plant.a2, design.l2);

  return finish_report(std::move(conds));
}

ClosedLoopGains closed_loop_gains(const LinearSwitchedPlant& plant,
                                  const ControllerDesign& design) {
  if (!verify_plant_lmis(plant, design, kVerifyTol).pass)
    throw UnverifiedDesign("state-loop matrix conditions fail; gains would be meaningless");
  if (!verify_observer_lmis(plant, design, kVerifyTol).pass)
    throw UnverifiedDesign("error-loop matrix conditions fail; gains would be meaningless");

  ClosedLoopGains g;
  g.lambda_x_min = std::min(min_sym_eigenvalue(design.p1), min_sym_eigenvalue(design.p2));
  g.lambda_x_max = std::max(max_sym_eigenvalue(design.p1), max_sym_eigenvalue(design.p2));
  g.lambda_e_min = min_sym_eigenvalue(design.pe);
  g.lambda_e_max = max_sym_eigenvalue(design.pe);

  const double nb = spectral_norm(plant.b);
  const double nk = spectral_norm(design.k);
  const double nd = spectral_norm(plant.a1 - plant.a2);
  const double eps = design.eps_share;

  g.gamma_x_slope = 2.0 * nb * nk * g.lambda_x_max / (eps * design.a_x);
  g.gamma_e_slope = 2.0 * nd * g.lambda_e_max / (eps * design.a_e);
  g.eta1_slope = g.lambda_x_max * g.gamma_e_slope * g.gamma_e_slope / g.lambda_e_min;
  g.eta2_slope = g.lambda_e_max * g.gamma_x_slope * g.gamma_x_slope / g.lambda_x_min;

  const double cube_x = g.lambda_x_max * g.lambda_x_max * g.lambda_x_max;
  const double cube_e = g.lambda_e_max * g.lambda_e_max * g.lambda_e_max;
  g.small_gain_value = 16.0 * nb * nb * nk * nk * nd * nd * cube_x * cube_e /
                       (g.lambda_x_min * g.lambda_e_min * design.a_x * design.a_x *
                        design.a_e * design.a_e);
  g.pass = g.small_gain_value < 1.0;
  return g;
}

SwitchedSystem plant_system(const LinearSwitchedPlant& plant) {
  std::vector<Region> regions;
  regions.push_back({{{plant.q, Sign::NonNegative}}});
  regions.push_back({{{plant.q, Sign::NonPositive}}});
  std::vector<Mode> modes;
  modes.push_back(Mode::linear(plant.a1, plant.b));
  modes.push_back(Mode::linear(plant.a2, plant.b));
  return SwitchedSystem(ProperPartition(plant.dim(), std::move(regions)),
                        std::move(modes), plant.input_dim());
}

SwitchedSystem build_closed_loop(const LinearSwitchedPlant& plant,
                                 const ControllerDesign& design) {
  if (!verify_plant_lmis(plant, design, kVerifyTol).pass)
    throw UnverifiedDesign("state-loop matrix conditions fail; refusing to assemble the loop");
  if (!verify_observer_lmis(plant, design, kVerifyTol).pass)
    throw UnverifiedDesign("error-loop matrix conditions fail; refusing to assemble the loop");

  const int n = plant.dim();
  const Mat& qm = switching_matrix(plant);

  // Lift q to (x, e): q(x) reads the top block, q(x - e) expands to
  // blocks [Q, -Q; -Q, Q].
  Mat qx(2 * n, 2 * n);
  Mat qz(2 * n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      qx(i, j) = qm(i, j);
      qz(i, j) = qm(i, j);
      qz(i, j + n) = -qm(i, j);
      qz(i + n, j) = -qm(i, j);
      qz(i + n, j + n) = qm(i, j);
    }
  const ScalarField fx = ScalarField::quadratic_form(std::move(qx));
  const ScalarField fz = ScalarField::quadratic_form(std::move(qz));

  // x' = (A_i + B K) x - B K e, e' = (A_i - A_j) x + (A_j - L_j C) e,
  // where i follows q(x) and the observer branch j follows q(x - e).
  const Mat bk = plant.b * design.k;
  const auto loop_matrix = [&](const Mat& ai, const Mat& aj, const Mat& lj) {
    Mat m(2 * n, 2 * n);
    const Mat axx = ai + bk;
    const Mat aee = aj - lj * plant.c;
    const Mat aex = ai - aj;
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) {
        m(r, s) = axx(r, s);
        m(r, s + n) = -bk(r, s);
        m(r + n, s) = aex(r, s);
        m(r + n, s + n) = aee(r, s);
      }
    return m;
  };

  std::vector<Region> regions;
  std::vector<Mode> modes;
  const Mat no_input(2 * n, 0);
  const auto add = [&](Sign sx, Sign sz, const Mat& ai, const Mat& aj, const Mat& lj) {
    regions.push_back({{{fx, sx}, {fz, sz}}});
    modes.push_back(Mode::linear(loop_matrix(ai, aj, lj), no_input));
  };
  add(Sign::NonNegative, Sign::NonNegative, plant.a1, plant.a1, design.l1);
  add(Sign::NonPositive, Sign::NonNegative, plant.a2, plant.a1, design.l1);
  add(Sign::NonNegative, Sign::NonPositive, plant.a1, plant.a2, design.l2);
  add(Sign::NonPositive, Sign::NonPositive, plant.a2, plant.a2, design.l2);

  return SwitchedSystem(ProperPartition(2 * n, std::move(regions)),
                        std::move(modes), 0);
}

namespace {

/// Smallest slope b such that |x| >= b |u| keeps both pieces decreasing
/// at rate eps/2 |x|^2 against the worst-aligned input, scanned over
/// unit directions and bisected to the boundary.
double interior_gain_slope(const Mat& a1m, const Mat& a2m, const Mat& b,
                           const Mat& p1, const Mat& p2, double eps) {
  const Mat m1 = sym_part_doubled(transpose(a1m) * p1);
  const Mat m2 = sym_part_doubled(transpose(a2m) * p2);
  const Mat bt = transpose(b);
  const double margin = eps / 2.0;

  constexpr int kDirections = 2880;
  std::vector<double> quad1(kDirections), quad2(kDirections);
  std::vector<double> push1(kDirections), push2(kDirections);
  for (int i = 0; i < kDirections; ++i) {
    const double ang = 2.0 * 3.14159265358979323846 * i / kDirections;
    const Vec xhat = {std::cos(ang), std::sin(ang)};
    quad1[i] = dot(xhat, m1 * xhat);
    quad2[i] = dot(xhat, m2 * xhat);
    push1[i] = 2.0 * norm2(bt * (p1 * xhat));
    push2[i] = 2.0 * norm2(bt * (p2 * xhat));
  }
  const auto feasible = [&](double slope) {
    for (int i = 0; i < kDirections; ++i) {
      if (quad1[i] + margin + push1[i] / slope > 0.0) return false;
      if (quad2[i] + margin + push2[i] / slope > 0.0) return false;
    }
    return true;
  };

  double hi = 1.0;
  int doublings = 0;
  while (!feasible(hi)) {
    hi *= 2.0;
    if (++doublings > 60)
      throw ConstructionFailed("no input gain slope keeps the pieces decreasing");
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (feasible(mid) ? hi : lo) = mid;
  }
  // Cushion for the gap between the direction grid and the continuum.
  return hi * (1.0 + 1e-4);
}

}  // namespace

FlowerInstance flower_instance(double a1, double a2, double eps, const Mat& b) {
  if (!(0.0 < eps && eps < a1 && a1 <= a2))
    throw ParameterOrder("need 0 < eps < a1 <= a2");
  if (b.rows != 2) throw DimensionMismatch("input matrix needs two rows");
  const double nb = spectral_norm(b);
  if (!(nb > kDefiniteTol))
    throw ConstructionFailed("input matrix must be nonzero; the gain slope would vanish");

  const Mat a1m = Mat::from_rows({{-eps, a1}, {-a2, -eps}});
  const Mat a2m = Mat::from_rows({{-eps, a2}, {-a1, -eps}});
  const Mat p1 = Mat::from_rows({{a2, 0.0}, {0.0, a1}});
  const Mat p2 = Mat::from_rows({{a1, 0.0}, {0.0, a2}});
  const ScalarField q =
      ScalarField::quadratic_form(Mat::from_rows({{-1.0, 0.0}, {0.0, 1.0}}));

  // Each piece must still decrease at rate eps along its own mode;
  // spelled out, the worst eigenvalue is eps (1 - 2 a1).
  const double worst1 = lmi_residual(sym_part_doubled(transpose(a1m) * p1) +
                                     eps * Mat::identity(2));
  const double worst2 = lmi_residual(sym_part_doubled(transpose(a2m) * p2) +
                                     eps * Mat::identity(2));
  if (worst1 > kDefiniteTol || worst2 > kDefiniteTol)
    throw ConstructionFailed("pieces stop decreasing for a1 < 1/2");

  LinearSwitchedPlant plant =
      LinearSwitchedPlant::make(a1m, a2m, b, Mat::identity(2), q);

  std::vector<Region> regions;
  regions.push_back({{{q, Sign::NonNegative}}});
  regions.push_back({{{q, Sign::NonPositive}}});
  PiecewiseC1Fn v = PiecewiseC1Fn::piecewise_quadratic(
      ProperPartition(2, std::move(regions)), {p1, p2});

  const double threshold = 2.0 * nb / (a1 + a2);
  const double b_slope = interior_gain_slope(a1m, a2m, b, p1, p2, eps);
  const double m = std::max(threshold, b_slope);

  // Gate V > gamma(|u|) forces |x| > m |u|, which clears both the
  // interior decrease slope and the surface threshold.
  ISSCertificate cert{as_candidate(v), ComparisonFn::power(a1, 2.0),
                      ComparisonFn::power(a2, 2.0),
                      ComparisonFn::power(eps / 2.0, 2.0),
                      ComparisonFn::power(a2 * m * m, 2.0)};
  return {std::move(plant), std::move(cert), threshold, b_slope};
}

namespace {

/// Worst residual across every matrix condition of a candidate design,
/// positive-definiteness included.  Negative means feasible throughout.
double design_residual(const LinearSwitchedPlant& plant, const ControllerDesign& d) {
  const int n = plant.dim();
  const Mat& qm = plant.q.quadratic_matrix();
  const Mat eye = Mat::identity(n);
  const Mat acl1 = plant.a1 + plant.b * d.k;
  const Mat acl2 = plant.a2 + plant.b * d.k;
  double worst = -min_sym_eigenvalue(d.p1) + 1e-6;
  worst = std::max(worst, -min_sym_eigenvalue(d.p2) + 1e-6);
  worst = std::max(worst, -min_sym_eigenvalue(d.pe) + 1e-6);
  worst = std::max(worst, lmi_residual(d.mu1 * qm + sym_part_doubled(d.p1 * acl1) + d.a_x * eye));
  worst = std::max(worst, lmi_residual(-d.mu2 * qm + sym_part_doubled(d.p2 * acl2) + d.a_x * eye));
  worst = std::max(worst, lmi_residual(d.mu12 * qm + sym_part_doubled(d.p1 * acl2) + d.a_x * eye));
  worst = std::max(worst, lmi_residual(d.mu21 * qm + sym_part_doubled(d.p2 * acl1) + d.a_x * eye));
  worst = std::max(worst, lmi_residual(sym_part_doubled(d.pe * (plant.a1 - d.l1 * plant.c)) + d.a_e * eye));
  worst = std::max(worst, lmi_residual(sym_part_doubled(d.pe * (plant.a2 - d.l2 * plant.c)) + d.a_e * eye));
  return worst;
}

}  // namespace

ControllerDesign search_design(const LinearSwitchedPlant& plant, double a_x,
                               double a_e, uint64_t seed, int iterations) {
  if (!(a_x > 0.0) || !(a_e > 0.0)) throw OutOfRange("decrease margins must be positive");
  switching_matrix(plant);
  const int n = plant.dim();
  const int m = plant.input_dim();
  const int p = plant.c.rows;
  if (p < 1) throw DimensionMismatch("observer design needs at least one output");

  ControllerDesign d;
  d.k = Mat(m, n);
  d.l1 = Mat(n, p);
  d.l2 = Mat(n, p);
  d.p2 = Mat::identity(n);
  d.pe = Mat::identity(n);
  d.a_x = a_x;
  d.a_e = a_e;

  // Free coordinates: K, L1, L2, the upper triangles of P2 and Pe, and
  // the five multipliers.  P1 = P2 + mu_q Q keeps the continuity
  // coupling exact by construction.
  std::vector<double*> coords;
  for (double& v : d.k.a) coords.push_back(&v);
  for (double& v : d.l1.a) coords.push_back(&v);
  for (double& v : d.l2.a) coords.push_back(&v);
  std::vector<std::pair<int, int>> tri;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) tri.push_back({i, j});
  coords.push_back(&d.mu_q);
  coords.push_back(&d.mu1);
  coords.push_back(&d.mu2);
  coords.push_back(&d.mu12);
  coords.push_back(&d.mu21);
  const int n_plain = static_cast<int>(coords.size());
  const int n_coords = n_plain + 2 * static_cast<int>(tri.size());

  const Mat& qm = plant.q.quadratic_matrix();
  const auto rebuild = [&]() {
    d.p1 = d.p2 + d.mu_q * qm;
    d.mu1 = std::max(d.mu1, 0.0);
    d.mu2 = std::max(d.mu2, 0.0);
  };
  const auto poke = [&](int c, double delta) {
    if (c < n_plain) {
      *coords[c] += delta;
    } else {
      const int t = c - n_plain;
      Mat& target = t < static_cast<int>(tri.size()) ? d.p2 : d.pe;
      const auto [i, j] = tri[t % tri.size()];
      target(i, j) += delta;
      target(j, i) = target(i, j);
    }
    rebuild();
  };

  rebuild();
  Rng rng(seed);
  double best = design_residual(plant, d);
  double step = 0.5;
  int stall = 0;
  for (int it = 0; it < iterations && best > -1e-6; ++it) {
    const int c = static_cast<int>(rng.range(0.0, static_cast<double>(n_coords)));
    const double delta = (rng.unit() < 0.5 ? -step : step);
    const ControllerDesign saved = d;
    poke(std::min(c, n_coords - 1), delta);
    const double trial = design_residual(plant, d);
    if (trial < best) {
      best = trial;
      stall = 0;
    } else {
      d = saved;
      if (++stall >= 200) {
        step *= 0.7;
        stall = 0;
        if (step < 1e-9) break;
      }
    }
  }
  if (best > -1e-6)
    throw ConstructionFailed("design search stalled at residual " + std::to_string(best));
  return d;
}

LinearSwitchedPlant fixture_plant() {
  return LinearSwitchedPlant::make(
      Mat::from_rows({{-0.5, 1.0}, {-1.2, -0.5}}),
      Mat::from_rows({{-0.5, 1.2}, {-1.0, -0.5}}),
      Mat::from_rows({{0.0}, {1.0}}), Mat::identity(2),
      ScalarField::quadratic_form(Mat::from_rows({{-1.0, 0.0}, {0.0, 1.0}})));
}

ControllerDesign fixture_design() {
  ControllerDesign d;
  d.k = Mat::from_rows({{-0.02, -0.02}});
  d.l1 = Mat::from_rows({{0.0, 1.0}, {-1.2, 0.0}});
  d.l2 = Mat::from_rows({{0.0, 1.2}, {-1.0, 0.0}});
  d.p1 = Mat::from_rows({{1.2, 0.0}, {0.0, 1.0}});
  d.p2 = Mat::from_rows({{1.0, 0.0}, {0.0, 1.2}});
  d.pe = Mat::identity(2);
  d.mu1 = 0.0;
  d.mu2 = 0.0;
  d.mu12 = -0.1;
  d.mu21 = 0.1;
  d.mu_q = -0.2;
  d.a_x = 0.3;
  d.a_e = 0.5;
  return d;
}

}  // namespace nsiss
