#include "nsiss/switched.hpp"

#include <algorithm>
#include <cmath>

#include "nsiss/errors.hpp"

namespace nsiss {

Mode Mode::linear(Mat a, Mat b_in) {
  if (a.rows != a.cols) throw DimensionMismatch("state matrix must be square");
  if (b_in.rows != a.rows) throw DimensionMismatch("input matrix row count");
  Mode m;
  m.kind = Kind::Linear;
  m.A = std::move(a);
  m.B = std::move(b_in);
  return m;
}

Mode Mode::affine(Mat a, Vec offset, Mat b_in) {
  Mode m = linear(std::move(a), std::move(b_in));
  if (static_cast<int>(offset.size()) != m.A.rows)
    throw DimensionMismatch("offset size differs from state dimension");
  m.kind = Kind::Affine;
  m.b = std::move(offset);
  return m;
}

Mode Mode::generic(std::function<Vec(const Vec&, const Vec&)> f) {
  Mode m;
  m.kind = Kind::Generic;
  m.fn = std::move(f);
  return m;
}

Vec Mode::eval(const Vec& x, const Vec& u) const {
  switch (kind) {
    case Kind::Linear:
      return add(A * x, B * u);
    case Kind::Affine:
      return add(add(A * x, b), B * u);
    case Kind::Generic:
      return fn(x, u);
  }
  return x;
}

InputSignal InputSignal::zero(int dim) {
  if (dim < 0) throw DimensionMismatch("input dimension must be >= 0");
  InputSignal s(Kind::Zero, dim);
  return s;
}

InputSignal InputSignal::constant(Vec value) {
  InputSignal s(Kind::Constant, static_cast<int>(value.size()));
  s.values_.push_back(std::move(value));
  return s;
}

InputSignal InputSignal::sinusoid(Vec amplitude, double omega, double phase) {
  InputSignal s(Kind::Sinusoid, static_cast<int>(amplitude.size()));
  s.values_.push_back(std::move(amplitude));
  s.omega_ = omega;
  s.phase_ = phase;
  return s;
}

InputSignal InputSignal::piecewise_constant(std::vector<double> times,
                                            std::vector<Vec> values) {
  if (times.empty() || times.size() != values.size())
    throw SchemaError("piecewise constant needs matching times and values");
  if (times.front() != 0.0) throw SchemaError("piecewise constant must start at t=0");
  for (size_t k = 1; k < times.size(); ++k)
    if (times[k] <= times[k - 1]) throw SchemaError("piece times must strictly increase");
  size_t d = values.front().size();
  for (const Vec& v : values)
    if (v.size() != d) throw DimensionMismatch("piece values differ in dimension");
  InputSignal s(Kind::PiecewiseConstant, static_cast<int>(d));
  s.times_ = std::move(times);
  s.values_ = std::move(values);
  return s;
}

InputSignal InputSignal::callback(int dim, std::function<Vec(double)> f) {
  if (dim <= 0) throw DimensionMismatch("callback input needs a positive dimension");
  InputSignal s(Kind::Callback, dim);
  s.fn_ = std::move(f);
  return s;
}

Vec InputSignal::eval(double t) const {
  switch (kind_) {
    case Kind::Zero:
      return Vec(dim_, 0.0);
    case Kind::Constant:
      return values_.front();
    case Kind::Sinusoid: {
      double s = std::sin(omega_ * t + phase_);
      return scaled(s, values_.front());
    }
    case Kind::PiecewiseConstant: {
      size_t k = std::upper_bound(times_.begin(), times_.end(), t) - times_.begin();
      return values_[k == 0 ? 0 : k - 1];
    }
    case Kind::Callback:
      return fn_(t);
  }
  return Vec(dim_, 0.0);
}

namespace {

// sup of |sin| over [lo, hi]
double sup_abs_sin(double lo, double hi) {
  if (hi - lo >= 3.14159265358979323846) return 1.0;
  const double pi = 3.14159265358979323846;
  double k = std::ceil((lo - pi / 2.0) / pi);
  double peak = pi / 2.0 + k * pi;
  if (peak <= hi) return 1.0;
  return std::max(std::abs(std::sin(lo)), std::abs(std::sin(hi)));
}

}  // namespace

double InputSignal::sup_norm_to(double t) const {
  if (t < 0.0) throw NegativeArgument("horizon must be >= 0");
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
      return norm2(values_.front());
    case Kind::Sinusoid: {
      double a = phase_, b = phase_ + omega_ * t;
      return norm2(values_.front()) * sup_abs_sin(std::min(a, b), std::max(a, b));
    }
    case Kind::PiecewiseConstant: {
      double m = 0.0;
      for (size_t k = 0; k < times_.size(); ++k)
        if (times_[k] <= t) m = std::max(m, norm2(values_[k]));
      return m;
    }
    case Kind::Callback: {
      double m = norm2(fn_(t));
      int n = 1024;
      for (int i = 0; i <= n; ++i) m = std::max(m, norm2(fn_(t * i / n)));
      return m;
    }
  }
  return 0.0;
}

std::vector<double> InputSignal::discontinuities(double t0, double t1) const {
  std::vector<double> out;
  if (kind_ == Kind::PiecewiseConstant)
    for (double tk : times_)
      if (tk > t0 && tk <= t1) out.push_back(tk);
  return out;
}

SwitchedSystem::SwitchedSystem(ProperPartition partition, std::vector<Mode> modes,
                               int input_dim)
    : partition_(std::move(partition)), modes_(std::move(modes)), input_dim_(input_dim) {
  if (static_cast<int>(modes_.size()) != partition_.size())
    throw DimensionMismatch("mode count differs from region count");
  if (input_dim_ < 0) throw DimensionMismatch("input dimension must be >= 0");
  Vec origin(partition_.dim(), 0.0);
  Vec u0(input_dim_, 0.0);
  equilibrium_at_origin_ = true;
  for (int i : partition_.active_indices_or_empty(origin, 1e-12)) {
    if (norm2(modes_[i].eval(origin, u0)) > 1e-12) {
      equilibrium_at_origin_ = false;
      break;
    }
  }
}

FilippovHull SwitchedSystem::hull_vertices(const Vec& x, const Vec& u, double tol) const {
  if (static_cast<int>(u.size()) != input_dim_)
    throw DimensionMismatch("input vector dimension");
  FilippovHull hull;
  hull.active = partition_.active_indices(x, tol);
  hull.vertices.reserve(hull.active.size());
  for (int i : hull.active) hull.vertices.push_back(modes_[i].eval(x, u));
  return hull;
}

SlidingDecision sliding_combination(const Vec& f1, const Vec& f2, const Vec& normal) {
  double nn = norm2(normal);
  if (nn < 1e-14) throw DegenerateNormal("surface normal is numerically zero");
  double a = dot(normal, f1);
  double b = dot(normal, f2);
  double scale = nn * std::max({1.0, norm2(f1), norm2(f2)});
  double ztol = 1e-14 * scale;
  SlidingDecision out;
  if (std::abs(a) <= ztol && std::abs(b) <= ztol) {
    out.kind = SlidingDecision::Kind::Tangent;
    return out;
  }
  if ((a < -ztol && b > ztol) || (a > ztol && b < -ztol)) {
    out.kind = SlidingDecision::Kind::Sliding;
    out.lambda = b / (b - a);
    return out;
  }
  out.kind = SlidingDecision::Kind::Crossing;
  return out;
}

Vec min_norm_hull_point(const std::vector<Vec>& vertices) {
  if (vertices.empty()) throw EmptyGrid("hull has no vertices");
  int k = static_cast<int>(vertices.size());
  if (k == 1) return vertices[0];
  int n = static_cast<int>(vertices[0].size());

  // Frank-Wolfe with exact line search on the quadratic objective;
  // exact for two vertices, ample as a hull selection beyond.
  Vec lam(k, 1.0 / k);
  Vec p(n, 0.0);
  for (int i = 0; i < k; ++i) p = axpy(p, lam[i], vertices[i]);
  for (int it = 0; it < 2000; ++it) {
    int best_i = 0;
    double best_v = dot(p, vertices[0]);
    for (int i = 1; i < k; ++i) {
      double v = dot(p, vertices[i]);
      if (v < best_v) {
        best_v = v;
        best_i = i;
      }
    }
    Vec d = sub(vertices[best_i], p);
    double dd = dot(d, d);
    if (dd < 1e-28) break;
    double step = -dot(p, d) / dd;
    step = std::min(1.0, std::max(0.0, step));
    if (step <= 0.0) break;
    p = axpy(p, step, d);
  }
  return p;
}

namespace {

struct SimState {
  const SwitchedSystem& sys;
  const InputSignal& u;
  double T;
  SimOptions opts;
  double band;

  Trajectory traj;
  Rng sel_rng;
  double t = 0.0;
  Vec x;
  int current = -1;
  bool sliding = false;
  int slide_i = -1, slide_j = -1;
  SignConstraint slide_surf;
  bool multi_warned = false;
  int stagnant = 0;

  SimState(const SwitchedSystem& s, const InputSignal& uu, double horizon,
           const SimOptions& o)
      : sys(s), u(uu), T(horizon), opts(o), band(10.0 * o.event_tol),
        sel_rng(o.selection_seed), slide_surf{ScalarField::linear_form(Vec{1.0}),
                                              Sign::NonNegative} {}

  Vec field(int mode, const Vec& xx, double tt) const {
    return sys.modes()[mode].eval(xx, u.eval(tt));
  }

  // Per-constraint activity threshold: the band scaled by the local
  // gradient size, approximating distance to the surface.  A flat
  // absolute band misfires where the field flattens (quadratic forms
  // near the origin would mark every region active forever).
  double activity_tol(const SignConstraint& c, const Vec& xx) const {
    return band * std::max(norm2(c.field.gradient(xx)), 1e-8);
  }

  std::vector<int> active_regions(const Vec& xx) const {
    std::vector<int> out;
    const ProperPartition& part = sys.partition();
    for (int i = 0; i < part.size(); ++i) {
      bool in = true;
      for (const SignConstraint& c : part.region(i).constraints)
        if (c.slack(xx) < -activity_tol(c, xx)) {
          in = false;
          break;
        }
      if (in) out.push_back(i);
    }
    return out;
  }

  template <class F>
  Vec rk4(F&& f, const Vec& x0, double t0, double h) const {
    Vec k1 = f(x0, t0);
    Vec k2 = f(axpy(x0, 0.5 * h, k1), t0 + 0.5 * h);
    Vec k3 = f(axpy(x0, 0.5 * h, k2), t0 + 0.5 * h);
    Vec k4 = f(axpy(x0, h, k3), t0 + h);
    Vec out = x0;
    for (size_t i = 0; i < out.size(); ++i)
      out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
  }

  void project_onto(const ScalarField& f, Vec& xx) const {
    for (int it = 0; it < 3; ++it) {
      double v = f.value(xx);
      if (std::abs(v) < 1e-15) return;
      Vec g = f.gradient(xx);
      double gg = dot(g, g);
      if (gg < 1e-30) return;
      xx = axpy(xx, -v / gg, g);
    }
  }

  void record() {
    traj.t.push_back(t);
    traj.x.push_back(x);
    traj.active.push_back(active_regions(x));
  }

  void event(const std::string& kind, int from, int to) {
    traj.events.push_back({t, kind, from, to});
  }

  double step_budget() const {
    double h = std::min(opts.dt_max, T - t);
    for (double d : u.discontinuities(t, t + h)) h = std::min(h, d - t);
    return std::max(h, 0.0);
  }

  // Bisect the RK4 sub-step fraction where the constraint's slack first
  // reaches zero; the slack is positive at fraction 0.
  double bisect_crossing(int mode, const SignConstraint& c, double h) const {
    double lo = 0.0, hi = 1.0;
    auto slack_at = [&](double a) {
      Vec xa = rk4([&](const Vec& xx, double tt) { return field(mode, xx, tt); }, x, t,
                   a * h);
      return c.slack(xa);
    };
    for (int it = 0; it < 200 && (hi - lo) * h > opts.event_tol; ++it) {
      double mid = 0.5 * (lo + hi);
      if (slack_at(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    return hi;
  }

  // One RK4 step in the current region with event detection.  Returns
  // true when integration should continue.
  void flow_step() {
    double h = step_budget();
    if (h <= 0.0) {
      t = T;
      return;
    }
    const Region& reg = sys.partition().region(current);
    std::vector<bool> departing(reg.constraints.size(), false);
    for (size_t k = 0; k < reg.constraints.size(); ++k)
      departing[k] = reg.constraints[k].slack(x) <= activity_tol(reg.constraints[k], x);

    Vec x1 = rk4([&](const Vec& xx, double tt) { return field(current, xx, tt); }, x, t, h);

    int first_k = -1;
    double first_alpha = 2.0;
    for (size_t k = 0; k < reg.constraints.size(); ++k) {
      if (departing[k]) continue;
      if (reg.constraints[k].slack(x1) > 0.0) continue;
      double alpha = bisect_crossing(current, reg.constraints[k], h);
      if (alpha < first_alpha) {
        first_alpha = alpha;
        first_k = static_cast<int>(k);
      }
    }
    if (first_k >= 0) {
      Vec xs = rk4([&](const Vec& xx, double tt) { return field(current, xx, tt); }, x, t,
                   first_alpha * h);
      project_onto(reg.constraints[first_k].field, xs);
      t += first_alpha * h;
      x = xs;
      record();
      return;
    }
    // A constraint we were departing from must not plunge back through.
    for (size_t k = 0; k < reg.constraints.size(); ++k) {
      if (!departing[k]) continue;
      if (reg.constraints[k].slack(x1) < -2.0 * activity_tol(reg.constraints[k], x1)) {
        project_onto(reg.constraints[k].field, x1);
        break;
      }
    }
    t += h;
    x = x1;
    record();
  }

  void enter_slide(int i, int j, const SignConstraint& cs) {
    sliding = true;
    slide_i = i;
    slide_j = j;
    slide_surf = cs;
    event("slide_start", i, j);
  }

  void leave_slide(int into) {
    event("slide_end", slide_i == into ? slide_j : slide_i, into);
    sliding = false;
    current = into;
  }

  void slide_step() {
    Vec uu = u.eval(t);
    Vec fi = sys.modes()[slide_i].eval(x, uu);
    Vec fj = sys.modes()[slide_j].eval(x, uu);
    Vec n = slide_surf.oriented_gradient(x);
    double a = dot(n, fi), b = dot(n, fj);
    double ztol = 1e-13 * std::max({1.0, norm2(fi), norm2(fj)}) * std::max(1.0, norm2(n));
    if (!(a < -ztol && b > ztol)) {
      leave_slide(a >= 0.0 ? slide_i : slide_j);
      return;
    }

    auto sliding_field = [&](const Vec& xx, double tt) {
      Vec ut = u.eval(tt);
      Vec gi = sys.modes()[slide_i].eval(xx, ut);
      Vec gj = sys.modes()[slide_j].eval(xx, ut);
      Vec nv = slide_surf.oriented_gradient(xx);
      double ai = dot(nv, gi), bj = dot(nv, gj);
      double lam = (bj - ai) != 0.0 ? bj / (bj - ai) : 0.5;
      lam = std::min(1.0, std::max(0.0, lam));
      Vec out(xx.size());
      for (size_t q = 0; q < out.size(); ++q)
        out[q] = lam * gi[q] + (1.0 - lam) * gj[q];
      return out;
    };

    double h = step_budget();
    if (h <= 0.0) {
      t = T;
      return;
    }
    Vec x1 = rk4(sliding_field, x, t, h);

    // Watch the other constraints of both regions while on the surface.
    struct Watch {
      const SignConstraint* c;
      double alpha;
    };
    std::vector<Watch> hits;
    for (int r : {slide_i, slide_j}) {
      for (const SignConstraint& c : sys.partition().region(r).constraints) {
        if (c.field.id() == slide_surf.field.id()) continue;
        if (c.slack(x) <= activity_tol(c, x)) continue;
        if (c.slack(x1) > 0.0) continue;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200 && (hi - lo) * h > opts.event_tol; ++it) {
          double mid = 0.5 * (lo + hi);
          Vec xm = rk4(sliding_field, x, t, mid * h);
          if (c.slack(xm) > 0.0)
            lo = mid;
          else
            hi = mid;
        }
        hits.push_back({&c, hi});
      }
    }
    if (!hits.empty()) {
      const Watch* first = &hits[0];
      for (const Watch& w : hits)
        if (w.alpha < first->alpha) first = &w;
      Vec xs = rk4(sliding_field, x, t, first->alpha * h);
      project_onto(slide_surf.field, xs);
      t += first->alpha * h;
      x = xs;
      record();
      leave_slide(slide_i);  // reclassify from scratch next iteration
      return;
    }

    project_onto(slide_surf.field, x1);
    t += h;
    x = x1;
    record();
  }

  void multi_step(const std::vector<int>& act) {
    if (!multi_warned) {
      traj.warnings.push_back(
          "three or more regions active; using a hull selection, sliding on the "
          "intersection is not tracked exactly");
      multi_warned = true;
    }
    Vec uu = u.eval(t);
    std::vector<Vec> verts;
    verts.reserve(act.size());
    for (int i : act) verts.push_back(sys.modes()[i].eval(x, uu));
    Vec sel;
    if (opts.random_selection) {
      Vec w(verts.size());
      double s = 0.0;
      for (double& v : w) {
        v = -std::log(std::max(sel_rng.unit(), 1e-300));
        s += v;
      }
      sel = Vec(x.size(), 0.0);
      for (size_t i = 0; i < verts.size(); ++i) sel = axpy(sel, w[i] / s, verts[i]);
    } else {
      sel = min_norm_hull_point(verts);
    }
    // Resolve the selected motion, not the clock: a near-zero selection
    // (stalled at an intersection) may take full-size steps.
    const double vmax = std::max(norm2(sel), 1e-12);
    double h = std::min(step_budget(),
                        std::max({opts.event_tol * 100.0, 1e-6, band / vmax}));
    if (h <= 0.0) {
      t = T;
      return;
    }
    x = axpy(x, h, sel);
    t += h;
    record();
    current = act.front();
  }

  // Classify the current point and act on it.
  void dispatch() {
    if (sliding) {
      slide_step();
      return;
    }
    std::vector<int> act = active_regions(x);
    if (act.empty()) throw NoRegionContains("trajectory left every region");
    if (act.size() == 1) {
      current = act[0];
      flow_step();
      return;
    }
    if (act.size() == 2) {
      int i = act[0], j = act[1];
      SignConstraint cs{ScalarField::linear_form(Vec{1.0}), Sign::NonNegative};
      bool have = true;
      try {
        cs = sys.partition().shared_surface(i, j);
      } catch (const NoCrossingFound&) {
        have = false;
      }
      if (!have) {
        multi_step(act);
        return;
      }
      Vec uu = u.eval(t);
      Vec fi = sys.modes()[i].eval(x, uu);
      Vec fj = sys.modes()[j].eval(x, uu);
      Vec n = cs.oriented_gradient(x);
      double a = dot(n, fi), b = dot(n, fj);
      double ztol =
          1e-13 * std::max({1.0, norm2(fi), norm2(fj)}) * std::max(1.0, norm2(n));
      if (a < -ztol && b > ztol) {
        enter_slide(i, j, cs);
        return;
      }
      int target;
      if (a > ztol)
        target = i;
      else if (b < -ztol)
        target = j;
      else
        target = i;  // tangent drift: follow region i until separation
      if (current >= 0 && current != target && (current == i || current == j))
        event("crossing", current, target);
      current = target;
      flow_step();
      return;
    }
    multi_step(act);
  }

  Trajectory run(const Vec& x0) {
    x = x0;
    t = 0.0;
    record();
    traj.complete = true;
    while (t < T - 1e-15) {
      if (norm2(x) > opts.state_bound) {
        traj.complete = false;
        break;
      }
      double t_before = t;
      dispatch();
      if (t - t_before < opts.event_tol) {
        if (++stagnant > 1000)
          throw StepSizeUnderflow(
              "no time progress over many events; event_tol too coarse or "
              "higher-codimension intersection");
      } else {
        stagnant = 0;
      }
    }
    return std::move(traj);
  }
};

}  // namespace

Trajectory simulate(const SwitchedSystem& sys, const Vec& x0, const InputSignal& u,
                    double T, const SimOptions& opts) {
  if (!(T > 0.0)) throw OutOfRange("horizon must be > 0");
  if (!(opts.dt_max > 0.0) || !(opts.event_tol > 0.0) || !(opts.state_bound > 0.0))
    throw OutOfRange("simulation tolerances must be positive");
  if (static_cast<int>(x0.size()) != sys.dim())
    throw DimensionMismatch("initial state dimension");
  if (u.dim() != sys.input_dim())
    throw DimensionMismatch("input signal dimension differs from system");
  SimState sim(sys, u, T, opts);
  return sim.run(x0);
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  size_t n = traj.x.empty() ? 0 : traj.x.front().size();
  os << "t";
  for (size_t i = 1; i <= n; ++i) os << ",x" << i;
  os << ",active,event\n";
  char buf[32];
  size_t next_event = 0;
  for (size_t r = 0; r < traj.t.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.12e", traj.t[r]);
    os << buf;
    for (size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.12e", traj.x[r][i]);
      os << ',' << buf;
    }
    os << ',';
    for (size_t k = 0; k < traj.active[r].size(); ++k) {
      if (k) os << ';';
      os << traj.active[r][k];
    }
    os << ',';
    bool first = true;
    while (next_event < traj.events.size() &&
           traj.events[next_event].t <= traj.t[r] + 1e-15) {
      if (r + 1 < traj.t.size() && traj.events[next_event].t > traj.t[r]) break;
      if (!first) os << ';';
      os << traj.events[next_event].kind;
      first = false;
      ++next_event;
    }
    os << '\n';
  }
}

}  // namespace nsiss
