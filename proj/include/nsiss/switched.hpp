#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nsiss/nonsmooth.hpp"
#include "nsiss/partition.hpp"

namespace nsiss {

/// One vector field x' = f(x, u).  Linear and affine forms are kept
/// structured so they can be serialized and analyzed exactly.
struct Mode {
  enum class Kind { Linear, Affine, Generic };

  Kind kind = Kind::Generic;
  Mat A;
  Vec b;
  Mat B;
  std::function<Vec(const Vec&, const Vec&)> fn;

  static Mode linear(Mat a, Mat b_in);
  static Mode affine(Mat a, Vec offset, Mat b_in);
  static Mode generic(std::function<Vec(const Vec&, const Vec&)> f);

  Vec eval(const Vec& x, const Vec& u) const;
};

/// Input signal u(t) with a computable supremum norm over [0, t].
class InputSignal {
 public:
  enum class Kind { Zero, Constant, Sinusoid, PiecewiseConstant, Callback };

  static InputSignal zero(int dim);
  static InputSignal constant(Vec value);
  /// u(t) = amplitude * sin(omega t + phase), one shared phase.
  static InputSignal sinusoid(Vec amplitude, double omega, double phase);
  /// value[k] on [times[k], times[k+1]); times[0] must be 0.
  static InputSignal piecewise_constant(std::vector<double> times, std::vector<Vec> values);
  static InputSignal callback(int dim, std::function<Vec(double)> f);

  Vec eval(double t) const;
  int dim() const { return dim_; }
  Kind kind() const { return kind_; }
  /// sup norm of u over [0, t] (sampled for callback signals).
  double sup_norm_to(double t) const;
  /// Jump times inside (t0, t1].
  std::vector<double> discontinuities(double t0, double t1) const;

  const Vec& constant_value() const { return values_.front(); }
  const Vec& amplitude() const { return values_.front(); }
  double omega() const { return omega_; }
  double phase() const { return phase_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Vec>& values() const { return values_; }

 private:
  InputSignal(Kind kind, int dim) : kind_(kind), dim_(dim) {}
  Kind kind_ = Kind::Zero;
  int dim_ = 0;
  std::vector<Vec> values_;
  std::vector<double> times_;
  double omega_ = 0.0;
  double phase_ = 0.0;
  std::function<Vec(double)> fn_;
};

/// State-dependent switched system: one mode per partition region.
class SwitchedSystem {
 public:
  SwitchedSystem(ProperPartition partition, std::vector<Mode> modes, int input_dim);

  const ProperPartition& partition() const { return partition_; }
  const std::vector<Mode>& modes() const { return modes_; }
  int dim() const { return partition_.dim(); }
  int input_dim() const { return input_dim_; }

  /// Whether every mode active at the origin vanishes at (0, 0).  The
  /// simulator does not require this; certification reports it.
  bool equilibrium_at_origin() const { return equilibrium_at_origin_; }

  /// Convexified right-hand side vertices {f_i(x,u) : i active at tol}.
  FilippovHull hull_vertices(const Vec& x, const Vec& u, double tol) const;

 private:
  ProperPartition partition_;
  std::vector<Mode> modes_;
  int input_dim_;
  bool equilibrium_at_origin_ = false;
};

struct SlidingDecision {
  enum class Kind { Sliding, Crossing, Tangent };
  Kind kind = Kind::Crossing;
  /// Weight on f1 when sliding: <normal, lambda f1 + (1-lambda) f2> = 0.
  std::optional<double> lambda;
};

/// Filippov classification on a codimension-1 surface with the given
/// normal.  Throws DegenerateNormal when the normal is (numerically) zero.
SlidingDecision sliding_combination(const Vec& f1, const Vec& f2, const Vec& normal);

/// Exact minimum-norm point of the convex hull of the given vertices
/// (support enumeration for few vertices, Frank-Wolfe beyond).
Vec min_norm_hull_point(const std::vector<Vec>& vertices);

struct SimOptions {
  double dt_max = 1e-2;
  double event_tol = 1e-9;
  double state_bound = 1e6;
  /// At points where three or more regions meet, pick a random hull
  /// selection instead of the minimum-norm one.
  bool random_selection = false;
  uint64_t selection_seed = 0;
};

struct TrajectoryEvent {
  double t = 0.0;
  std::string kind;  // "crossing", "slide_start", "slide_end"
  int from_region = -1;
  int to_region = -1;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<std::vector<int>> active;
  std::vector<TrajectoryEvent> events;
  std::vector<std::string> warnings;
  bool complete = false;
};

/// Numerical Filippov solution: fixed-step RK4 inside regions, event
/// bisection at surface crossings, exact codimension-1 sliding with the
/// constraint value held within 10*event_tol by tangential projection.
Trajectory simulate(const SwitchedSystem& sys, const Vec& x0, const InputSignal& u,
                    double T, const SimOptions& opts = {});

/// CSV with header t,x1..xn,active,event; active region indices joined
/// by ';', event names on the rows where they occur.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);

}  // namespace nsiss
