#include "nsiss/certify.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>
#include <utility>

#include "nsiss/errors.hpp"

namespace nsiss {

namespace {

constexpr double kActiveTol = 1e-8;
constexpr double kOriginBall = 1e-6;
constexpr int kDrawCap = 200000;

int env_thread_count() {
  const char* env = std::getenv("NSISS_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  long n = std::strtol(env, &end, 10);
  if (end == env || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

/// Runs body(0..n-1) across NSISS_THREADS workers.  Bodies must be pure
/// per index; exceptions are replayed in index order so the surfaced
/// error does not depend on the thread count.
void parallel_for(int n, const std::function<void(int)>& body) {
  int nt = std::min(env_thread_count(), n);
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int w = 0; w < nt; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < n; i += nt) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (int i = 0; i < n; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);
}

/// Collects per-condition margins; min reduction, first index wins ties.
struct MarginAcc {
  ConditionStat stat;

  explicit MarginAcc(std::string name) { stat.name = std::move(name); }

  void observe(double margin, Witness w) {
    ++stat.checked;
    if (margin < stat.worst_margin) {
      stat.worst_margin = margin;
      stat.worst = std::move(w);
    }
  }
  void gated() {
    ++stat.checked;
    ++stat.gated_out;
  }
  void empty_interval() {
    ++stat.checked;
    ++stat.empty_intervals;
  }
  ConditionStat finish() {
    stat.pass = !(stat.worst_margin < 0.0);
    return stat;
  }
};

void validate_plan(const SamplePlan& plan, int state_dim) {
  if (plan.n_state < 1 || plan.n_input < 1 || plan.n_surface < 1)
    throw OutOfRange("sample plan counts must be at least 1");
  if (plan.input_ball_radius < 0.0)
    throw OutOfRange("input ball radius must be nonnegative");
  if (static_cast<int>(plan.state_box.lo.size()) != state_dim ||
      static_cast<int>(plan.state_box.hi.size()) != state_dim)
    throw DimensionMismatch("sample plan box does not match the state dimension");
}

void require_dims(const SwitchedSystem& s, const ISSCertificate& c) {
  if (c.V.dim != s.dim())
    throw DimensionMismatch("certificate dimension does not match the system");
}

/// Box draw outside the origin exclusion ball, where rho margins would
/// be vacuously tight.
Vec draw_state(Rng& rng, const Box& box) {
  for (int tries = 0; tries < kDrawCap; ++tries) {
    Vec x = rng.in_box(box);
    if (norm2(x) >= kOriginBall) return x;
  }
  throw ConstructionFailed("state sampling kept landing inside the origin exclusion ball");
}

Vec draw_input(Rng& rng, int input_dim, double radius) {
  if (input_dim <= 0 || radius <= 0.0) return Vec(std::max(input_dim, 0), 0.0);
  return rng.in_ball(input_dim, radius);
}

/// (x, u) pairs for the box-sampled checks: n_state states, n_input
/// inputs each, one interleaved stream so the set is seed-deterministic.
std::vector<std::pair<Vec, Vec>> box_samples(const SwitchedSystem& s, const SamplePlan& plan,
                                             uint64_t salt) {
  Rng rng(plan.seed ^ salt);
  std::vector<std::pair<Vec, Vec>> out;
  out.reserve(static_cast<size_t>(plan.n_state) * plan.n_input);
  int n_inputs = (s.input_dim() > 0 && plan.input_ball_radius > 0.0) ? plan.n_input : 1;
  for (int k = 0; k < plan.n_state; ++k) {
    Vec x = draw_state(rng, plan.state_box);
    for (int l = 0; l < n_inputs; ++l)
      out.emplace_back(x, draw_input(rng, s.input_dim(), plan.input_ball_radius));
  }
  return out;
}

bool in_region(const Region& r, const Vec& x, double min_slack) {
  for (const auto& c : r.constraints)
    if (c.slack(x) < min_slack) return false;
  return true;
}

Vec draw_in_region(Rng& rng, const Box& box, const Region& r, double min_slack) {
  for (int tries = 0; tries < kDrawCap; ++tries) {
    Vec x = rng.in_box(box);
    if (norm2(x) < kOriginBall) continue;
    if (in_region(r, x, min_slack)) return x;
  }
  throw ConstructionFailed("could not sample the requested region inside the plan box");
}

Witness make_witness(Vec x, Vec u, double value, double bound) {
  Witness w;
  w.x = std::move(x);
  w.u = std::move(u);
  w.value = value;
  w.bound = bound;
  return w;
}

}  // namespace

LyapunovCandidate as_candidate(const PiecewiseC1Fn& v) {
  auto held = std::make_shared<const PiecewiseC1Fn>(v);
  LyapunovCandidate c;
  c.dim = held->dim();
  c.value = [held](const Vec& x) { return held->value(x); };
  c.hull = [held](const Vec& x, double tol) { return held->gradient_hull(x, tol); };
  c.piecewise = held;
  return c;
}

const ConditionStat* CheckReport::condition(const std::string& name) const {
  for (const auto& c : conditions)
    if (c.name == name) return &c;
  return nullptr;
}

CheckReport check_main_iss(const SwitchedSystem& s, const ISSCertificate& c,
                           const SamplePlan& plan) {
  require_dims(s, c);
  validate_plan(plan, s.dim());

  auto samples = box_samples(s, plan, 0x6d61696e69737331ULL);
  int n = static_cast<int>(samples.size());

  struct Eval {
    double v = 0.0, nx = 0.0, nu = 0.0;
    double m_lo = 0.0, m_hi = 0.0;
    int decrease = 0;  // 0 margin, 1 gated out, 2 empty interval
    double m_dec = 0.0;
    DerivativeInterval interval;
  };
  std::vector<Eval> evals(n);

  parallel_for(n, [&](int i) {
    const auto& [x, u] = samples[i];
    Eval e;
    e.v = c.V.value(x);
    e.nx = norm2(x);
    e.nu = norm2(u);
    e.m_lo = e.v - c.alpha_lo(e.nx);
    e.m_hi = c.alpha_hi(e.nx) - e.v;
    if (e.v > c.gamma(e.nu)) {
      GradientHull grads = c.V.hull(x, kActiveTol);
      FilippovHull fields = s.hull_vertices(x, u, kActiveTol);
      e.interval = lie_interval(grads, fields);
      if (e.interval.empty) {
        e.decrease = 2;
      } else {
        e.decrease = 0;
        e.m_dec = -c.rho(e.nx) - e.interval.hi;
      }
    } else {
      e.decrease = 1;
    }
    evals[i] = e;
  });

  MarginAcc lower("lower_bound"), upper("upper_bound"), decrease("decrease");
  for (int i = 0; i < n; ++i) {
    const auto& [x, u] = samples[i];
    const Eval& e = evals[i];
    lower.observe(e.m_lo, make_witness(x, u, e.v, c.alpha_lo(e.nx)));
    upper.observe(e.m_hi, make_witness(x, u, e.v, c.alpha_hi(e.nx)));
    switch (e.decrease) {
      case 1:
        decrease.gated();
        break;
      case 2:
        decrease.empty_interval();
        break;
      default: {
        Witness w = make_witness(x, u, e.interval.hi, -c.rho(e.nx));
        w.interval = e.interval;
        decrease.observe(e.m_dec, std::move(w));
      }
    }
  }

  CheckReport report;
  report.total_samples = n;
  report.conditions = {lower.finish(), upper.finish(), decrease.finish()};
  report.pass = true;
  for (const auto& cond : report.conditions) report.pass = report.pass && cond.pass;
  return report;
}

CheckReport check_switched_iss(const SwitchedSystem& s, const ISSCertificate& c,
                               const SamplePlan& plan, SwitchedVariant variant) {
  require_dims(s, c);
  validate_plan(plan, s.dim());
  if (!c.V.piecewise)
    throw PartitionMismatch("certificate does not carry a piecewise function");
  const PiecewiseC1Fn& v = *c.V.piecewise;
  if (variant == SwitchedVariant::Aligned &&
      !same_structure(v.partition(), s.partition()))
    throw PartitionMismatch("aligned variant requires the candidate partition to equal the system partition");

  const ProperPartition& y = v.partition();
  int n_regions = y.size();

  // Per-piece sandwich bounds on closed-region samples.
  struct BoundSample {
    int j = 0;
    Vec x;
  };
  std::vector<BoundSample> a_samples;
  {
    Rng rng(plan.seed ^ 0x7069656365626e64ULL);
    a_samples.reserve(static_cast<size_t>(n_regions) * plan.n_state);
    for (int j = 0; j < n_regions; ++j)
      for (int k = 0; k < plan.n_state; ++k)
        a_samples.push_back({j, draw_in_region(rng, plan.state_box, y.region(j), 0.0)});
  }
  struct BoundEval {
    double vj = 0.0, lo = 0.0, hi = 0.0;
  };
  std::vector<BoundEval> a_evals(a_samples.size());
  parallel_for(static_cast<int>(a_samples.size()), [&](int i) {
    const auto& smp = a_samples[i];
    double nx = norm2(smp.x);
    a_evals[i] = {v.piece_value(smp.j, smp.x), c.alpha_lo(nx), c.alpha_hi(nx)};
  });

  // Smooth decrease in region interiors away from the switching surfaces.
  struct InteriorSample {
    int j = 0;
    int sigma = 0;
    Vec x;
    Vec u;
  };
  std::vector<InteriorSample> b_samples;
  {
    Rng rng(plan.seed ^ 0x696e746572696f72ULL);
    int n_inputs = (s.input_dim() > 0 && plan.input_ball_radius > 0.0) ? plan.n_input : 1;
    for (int j = 0; j < n_regions; ++j) {
      for (int k = 0; k < plan.n_state; ++k) {
        Vec x;
        int sigma = -1;
        for (int tries = 0; tries < kDrawCap; ++tries) {
          Vec cand = draw_in_region(rng, plan.state_box, y.region(j), kActiveTol);
          auto active = s.partition().active_indices_or_empty(cand, kActiveTol);
          if (active.size() == 1) {
            x = std::move(cand);
            sigma = active.front();
            break;
          }
        }
        if (sigma < 0)
          throw ConstructionFailed("could not sample a region interior off the switching surfaces");
        for (int l = 0; l < n_inputs; ++l)
          b_samples.push_back({j, sigma, x, draw_input(rng, s.input_dim(), plan.input_ball_radius)});
      }
    }
  }
  struct InteriorEval {
    bool gate = false;
    double margin = 0.0, deriv = 0.0, bound = 0.0, vx = 0.0;
  };
  std::vector<InteriorEval> b_evals(b_samples.size());
  parallel_for(static_cast<int>(b_samples.size()), [&](int i) {
    const auto& smp = b_samples[i];
    InteriorEval e;
    e.vx = v.value(smp.x);
    double nx = norm2(smp.x);
    e.gate = e.vx > c.gamma(norm2(smp.u));
    if (e.gate) {
      Vec f = s.modes().at(smp.sigma).eval(smp.x, smp.u);
      e.deriv = dot(v.piece_gradient(smp.j, smp.x), f);
      e.bound = -c.rho(nx);
      e.margin = e.bound - e.deriv;
    }
    b_evals[i] = e;
  });

  // Set-valued decrease on the switching surfaces.
  struct SurfaceSample {
    Vec x;
    Vec u;
  };
  std::vector<SurfaceSample> c_samples;
  {
    Rng rng(plan.seed ^ 0x73757266696e7075ULL);
    int n_inputs = (s.input_dim() > 0 && plan.input_ball_radius > 0.0) ? plan.n_input : 1;
    int pair_index = 0;
    for (const auto& pr : plan.surface_pairs) {
      auto pts = s.partition().surface_sample(pr.i, pr.j, plan.n_surface, plan.state_box,
                                              plan.seed ^ (0x7375726661636531ULL + 0x9e37ULL * ++pair_index));
      for (auto& p : pts)
        for (int l = 0; l < n_inputs; ++l)
          c_samples.push_back({p, draw_input(rng, s.input_dim(), plan.input_ball_radius)});
    }
  }
  struct SurfaceEval {
    int kind = 0;  // 0 margin, 1 gated out, 2 empty interval
    double margin = 0.0, vx = 0.0, bound = 0.0;
    DerivativeInterval interval;
  };
  std::vector<SurfaceEval> c_evals(c_samples.size());
  bool use_clarke = variant == SwitchedVariant::Clarke;
  parallel_for(static_cast<int>(c_samples.size()), [&](int i) {
    const auto& smp = c_samples[i];
    SurfaceEval e;
    e.vx = v.value(smp.x);
    if (e.vx > c.gamma(norm2(smp.u))) {
      GradientHull grads = v.gradient_hull(smp.x, kActiveTol);
      FilippovHull fields = s.hull_vertices(smp.x, smp.u, kActiveTol);
      e.interval = use_clarke ? clarke_interval(grads, fields) : lie_interval(grads, fields);
      if (e.interval.empty) {
        e.kind = 2;
      } else {
        e.bound = -c.rho(norm2(smp.x));
        e.margin = e.bound - e.interval.hi;
      }
    } else {
      e.kind = 1;
    }
    c_evals[i] = e;
  });

  MarginAcc lower("piecewise_lower"), upper("piecewise_upper");
  for (size_t i = 0; i < a_samples.size(); ++i) {
    const auto& smp = a_samples[i];
    const auto& e = a_evals[i];
    lower.observe(e.vj - e.lo, make_witness(smp.x, {}, e.vj, e.lo));
    upper.observe(e.hi - e.vj, make_witness(smp.x, {}, e.vj, e.hi));
  }
  MarginAcc interior("interior_decrease");
  for (size_t i = 0; i < b_samples.size(); ++i) {
    const auto& e = b_evals[i];
    if (!e.gate) {
      interior.gated();
    } else {
      interior.observe(e.margin, make_witness(b_samples[i].x, b_samples[i].u, e.deriv, e.bound));
    }
  }
  MarginAcc surface("surface_decrease");
  for (size_t i = 0; i < c_samples.size(); ++i) {
    const auto& e = c_evals[i];
    switch (e.kind) {
      case 1:
        surface.gated();
        break;
      case 2:
        surface.empty_interval();
        break;
      default: {
        Witness w = make_witness(c_samples[i].x, c_samples[i].u, e.interval.hi, e.bound);
        w.interval = e.interval;
        surface.observe(e.margin, std::move(w));
      }
    }
  }

  CheckReport report;
  report.total_samples = static_cast<int>(a_samples.size() + b_samples.size() + c_samples.size());
  report.conditions = {lower.finish(), upper.finish(), interior.finish(), surface.finish()};
  report.pass = true;
  for (const auto& cond : report.conditions) report.pass = report.pass && cond.pass;
  return report;
}

CheckReport check_dissipation(const SwitchedSystem& s, const ISSCertificate& c,
                              const SamplePlan& plan, DissipationForm form) {
  require_dims(s, c);
  validate_plan(plan, s.dim());

  auto samples = box_samples(s, plan, 0x6469737369706174ULL);
  int n = static_cast<int>(samples.size());

  struct Eval {
    int kind = 0;  // 0 margin, 2 empty interval
    double margin = 0.0, bound = 0.0;
    DerivativeInterval interval;
  };
  std::vector<Eval> evals(n);

  parallel_for(n, [&](int i) {
    const auto& [x, u] = samples[i];
    Eval e;
    GradientHull grads = c.V.hull(x, kActiveTol);
    FilippovHull fields = s.hull_vertices(x, u, kActiveTol);
    e.interval = lie_interval(grads, fields);
    if (e.interval.empty) {
      e.kind = 2;
    } else {
      // Level form feeds V(x) to rho; a candidate below zero is already
      // broken, so clamp rather than fault the comparison function.
      double level = form == DissipationForm::State ? norm2(x)
                                                    : std::max(c.V.value(x), 0.0);
      e.bound = -c.rho(level) + c.gamma(norm2(u));
      e.margin = e.bound - e.interval.hi;
    }
    evals[i] = e;
  });

  MarginAcc diss("dissipation");
  for (int i = 0; i < n; ++i) {
    const Eval& e = evals[i];
    if (e.kind == 2) {
      diss.empty_interval();
    } else {
      Witness w = make_witness(samples[i].first, samples[i].second, e.interval.hi, e.bound);
      w.interval = e.interval;
      diss.observe(e.margin, std::move(w));
    }
  }

  CheckReport report;
  report.total_samples = n;
  report.conditions = {diss.finish()};
  report.pass = report.conditions.front().pass;
  return report;
}

CheckReport trajectory_check(const Trajectory& traj, const InputSignal& u,
                             const ISSCertificate& c, double margin_tol) {
  CheckReport report;
  if (traj.x.empty()) {
    report.pass = true;
    return report;
  }

  MarginAcc mono("monotone_decrease");
  std::vector<double> values(traj.x.size());
  for (size_t k = 0; k < traj.x.size(); ++k) values[k] = c.V.value(traj.x[k]);

  for (size_t k = 0; k + 1 < traj.x.size(); ++k) {
    double sup_u = u.sup_norm_to(traj.t[k]);
    if (values[k] > c.gamma(sup_u)) {
      double margin = margin_tol - (values[k + 1] - values[k]);
      mono.observe(margin, make_witness(traj.x[k], u.eval(traj.t[k]), values[k + 1] - values[k],
                                        margin_tol));
    } else {
      mono.gated();
    }
  }

  report.total_samples = static_cast<int>(traj.x.size());
  report.terminal_residual = values.back() - c.gamma(u.sup_norm_to(traj.t.back()));
  report.conditions = {mono.finish()};
  report.pass = report.conditions.front().pass;
  return report;
}

}  // namespace nsiss
