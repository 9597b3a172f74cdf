#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "nsiss/kfun.hpp"
#include "nsiss/nonsmooth.hpp"
#include "nsiss/switched.hpp"

namespace nsiss {

/// Type-erased Lyapunov candidate: a value map plus a generalized
/// gradient hull.  Piecewise functions and composed functions check
/// through the same interface.  When the candidate was built from a
/// PiecewiseC1Fn, `piecewise` keeps the structured form so region-wise
/// checks can reach the pieces.
struct LyapunovCandidate {
  int dim = 0;
  std::function<double(const Vec&)> value;
  std::function<GradientHull(const Vec&, double)> hull;
  std::shared_ptr<const PiecewiseC1Fn> piecewise;
};

LyapunovCandidate as_candidate(const PiecewiseC1Fn& v);

/// Candidate plus the comparison functions of an ISS certificate.
/// alpha_lo/alpha_hi sandwich V, rho is the decrease rate, gamma the
/// input gain; checks adopt the convention max over an empty derivative
/// interval = -inf.
struct ISSCertificate {
  LyapunovCandidate V;
  ComparisonFn alpha_lo;
  ComparisonFn alpha_hi;
  ComparisonFn rho;
  ComparisonFn gamma;
};

struct SurfacePair {
  int i = 0;
  int j = 0;
};

/// Where and how densely to sample.  n_state counts box draws for the
/// main check and per-region draws for the switched variants; n_input
/// inputs are drawn per state from the ball of the given radius (radius
/// zero means the single zero input); n_surface points are drawn per
/// surface pair.  Identical plans give identical reports.
struct SamplePlan {
  Box state_box;
  int n_state = 1;
  double input_ball_radius = 0.0;
  int n_input = 1;
  std::vector<SurfacePair> surface_pairs;
  int n_surface = 1;
  uint64_t seed = 0;
};

/// Sample attaining the worst margin of a condition.
struct Witness {
  Vec x;
  Vec u;
  double value = 0.0;
  double bound = 0.0;
  DerivativeInterval interval;
};

struct ConditionStat {
  std::string name;
  bool pass = true;
  int checked = 0;
  /// Samples where the implication antecedent V(x) > gamma(|u|) was false.
  int gated_out = 0;
  /// Samples where the Lie interval was empty (trivial pass).
  int empty_intervals = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  Witness worst;
};

struct CheckReport {
  bool pass = false;
  int total_samples = 0;
  std::vector<ConditionStat> conditions;
  /// trajectory_check only: V(x(T)) - gamma(sup-norm of u).  NaN otherwise.
  double terminal_residual = std::numeric_limits<double>::quiet_NaN();

  const ConditionStat* condition(const std::string& name) const;
};

/// Sandwich bounds plus the gated decrease max of the set-valued
/// derivative at box-sampled states and ball-sampled inputs.
CheckReport check_main_iss(const SwitchedSystem& s, const ISSCertificate& c,
                           const SamplePlan& plan);

/// General: V lives on its own partition, interior decrease is checked
/// against the single active mode away from the switching surfaces.
/// Aligned: V's partition must structurally equal the system's.
/// Clarke: like general, but the surface condition uses the Clarke
/// interval instead of the Lie interval.
enum class SwitchedVariant { General, Aligned, Clarke };

CheckReport check_switched_iss(const SwitchedSystem& s, const ISSCertificate& c,
                               const SamplePlan& plan, SwitchedVariant variant);

/// State form: max derivative <= -rho(|x|) + gamma(|u|) unconditionally.
/// Level form: same with rho applied to V(x) instead of |x|.  The
/// certificate's rho/gamma slots carry the dissipation-form functions.
enum class DissipationForm { State, Level };

CheckReport check_dissipation(const SwitchedSystem& s, const ISSCertificate& c,
                              const SamplePlan& plan, DissipationForm form);

/// Empirical check along a simulated trajectory: whenever V(x(t)) sits
/// above gamma of the input's sup norm so far, the forward difference
/// of V must not exceed margin_tol.  The terminal sublevel residual is
/// reported either way.
CheckReport trajectory_check(const Trajectory& traj, const InputSignal& u,
                             const ISSCertificate& c, double margin_tol);

}  // namespace nsiss
