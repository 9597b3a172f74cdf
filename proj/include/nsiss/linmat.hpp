#pragma once

#include <cstdint>

#include "nsiss/certify.hpp"
#include "nsiss/linalg.hpp"
#include "nsiss/partition.hpp"
#include "nsiss/switched.hpp"

namespace nsiss {

/// Two-mode linear plant x' = A_i x + B u switching on the sign of
/// q(x): mode 1 where q >= 0, mode 2 where q <= 0.  The output y = C x
/// is what an observer gets to see.
struct LinearSwitchedPlant {
  Mat a1;
  Mat a2;
  Mat b;
  Mat c;
  ScalarField q;

  int dim() const { return a1.rows; }
  int input_dim() const { return b.cols; }

  /// Validates dimensions.  A quadratic q must be symmetric and
  /// indefinite; a definite form would collapse one region to a point.
  static LinearSwitchedPlant make(Mat a1, Mat a2, Mat b, Mat c, ScalarField q);
};

/// State feedback u = K z on the observer state z, mode-wise observer
/// gains L_i, and the certificate matrices of the state and error
/// loops: V_i(x) = x^T P_i x on the plant regions, V_e(e) = e^T P_e e.
struct ControllerDesign {
  Mat k;
  Mat l1;
  Mat l2;
  Mat p1;
  Mat p2;
  Mat pe;
  /// Multipliers of the S-procedure terms tied to the switching form.
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu12 = 0.0;
  double mu21 = 0.0;
  /// Continuity coupling P1 - P2 = mu_q Q across the surface.
  double mu_q = 0.0;
  /// Decrease margins of the state and error matrix inequalities.
  double a_x = 0.0;
  double a_e = 0.0;
  /// Share of each margin spent absorbing the cross term when the loop
  /// gains are formed, in (0, 1).
  double eps_share = 0.5;
};

/// Largest eigenvalue of a symmetric matrix: how badly M < 0 fails
/// (negative when it holds).  Throws NotSymmetric otherwise.
double lmi_residual(const Mat& m);

/// Matrix conditions of the state-feedback loop: P_i positive definite,
/// the continuity coupling, and four decrease inequalities (each mode
/// against its own region and against the crossed one) with margin a_x.
/// Conditions: p1_positive_definite, p2_positive_definite, continuity,
/// mode1_decrease, mode2_decrease, cross_12, cross_21.
CheckReport verify_plant_lmis(const LinearSwitchedPlant& plant,
                              const ControllerDesign& design, double tol);

/// Matrix conditions of the observer error loop: P_e positive definite
/// and both branch matrices P_e (A_i - L_i C) + (.)^T + a_e I negative.
/// Conditions: pe_positive_definite, observer1_decrease, observer2_decrease.
CheckReport verify_observer_lmis(const LinearSwitchedPlant& plant,
                                 const ControllerDesign& design, double tol);

/// Scalar loop gains of the interconnected state/error system.  The
/// state loop sees the estimation error through B K, the error loop
/// sees the state through A_1 - A_2 whenever the observer branch
/// disagrees with the plant mode.  small_gain_value multiplies the two
/// squared gain slopes; below one the interconnection contracts.
struct ClosedLoopGains {
  double gamma_x_slope = 0.0;
  double gamma_e_slope = 0.0;
  double eta1_slope = 0.0;
  double eta2_slope = 0.0;
  double small_gain_value = 0.0;
  bool pass = false;
  double lambda_x_min = 0.0;
  double lambda_x_max = 0.0;
  double lambda_e_min = 0.0;
  double lambda_e_max = 0.0;
};

/// Closed-form gain slopes of a design that passes both verifiers at
/// tolerance 1e-8.  Throws UnverifiedDesign when one of them fails.
ClosedLoopGains closed_loop_gains(const LinearSwitchedPlant& plant,
                                  const ControllerDesign& design);

/// The plant as a switched system driven by u directly.
SwitchedSystem plant_system(const LinearSwitchedPlant& plant);

/// Output-feedback loop in coordinates (x, e), e = x - z.  Four regions
/// from the signs of q(x) and q(x - e); autonomous, since the input
/// enters only through the controller.  Throws UnverifiedDesign unless
/// the design passes both verifiers.
SwitchedSystem build_closed_loop(const LinearSwitchedPlant& plant,
                                 const ControllerDesign& design);

/// Planar two-mode instance whose trajectories trace petals around the
/// origin: rotation dominates the slow contraction eps, and each mode
/// hands over to the other on the lines |x_1| = |x_2|.  Ships with its
/// quadratic-piece certificate.
struct FlowerInstance {
  LinearSwitchedPlant plant;
  ISSCertificate certificate;
  /// |x| >= threshold_slope |u| forces an empty surface Lie interval.
  double threshold_slope = 0.0;
  /// |x| >= b_slope |u| forces the interior decrease at rate rho.
  double b_slope = 0.0;
};

/// Requires 0 < eps < a1 <= a2 with a1 >= 1/2 (the pieces stop
/// decreasing below that), b with two rows and a nonzero column.
FlowerInstance flower_instance(double a1, double a2, double eps, const Mat& b);

/// Seeded coordinate-descent search for a design passing both
/// verifiers.  A fixture generator, not a synthesis method; throws
/// ConstructionFailed when the search stalls above zero residual.
ControllerDesign search_design(const LinearSwitchedPlant& plant, double a_x,
                               double a_e, uint64_t seed, int iterations = 10000);

/// Built-in plant/design pair used by tests and packaged scenarios.
LinearSwitchedPlant fixture_plant();
ControllerDesign fixture_design();

}  // namespace nsiss
