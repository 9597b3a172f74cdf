#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "nsiss/errors.hpp"

namespace nsiss {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scaled(double c, const Vec& a);
/// a + c*b
Vec axpy(const Vec& a, double c, const Vec& b);
Vec concat(const Vec& a, const Vec& b);

/// Dense row-major matrix.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static Mat identity(int n);
  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
};

Mat operator+(const Mat& x, const Mat& y);
Mat operator-(const Mat& x, const Mat& y);
Mat operator*(const Mat& x, const Mat& y);
Mat operator*(double c, const Mat& x);
Vec operator*(const Mat& m, const Vec& v);
Mat transpose(const Mat& m);
/// X + X^T
Mat sym_part_doubled(const Mat& x);

bool is_symmetric(const Mat& m, double tol = 1e-12);
void require_symmetric(const Mat& m, double tol = 1e-12);

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi rotation method,
/// returned in ascending order.  Throws NotSymmetric on asymmetric input.
std::vector<double> sym_eigenvalues(const Mat& m);
double max_sym_eigenvalue(const Mat& m);
double min_sym_eigenvalue(const Mat& m);

/// Largest singular value via power iteration on m^T m, relative
/// tolerance 1e-10 between successive estimates.
double spectral_norm(const Mat& m);

/// Axis-aligned box given by per-coordinate bounds.
struct Box {
  Vec lo;
  Vec hi;
  int dim() const { return static_cast<int>(lo.size()); }
};

/// Deterministic sampler.  Uniform doubles are derived from the raw 64-bit
/// stream as (bits >> 11) * 2^-53 so results do not depend on the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t raw() { return gen_(); }
  /// Uniform in [0, 1).
  double unit();
  double range(double a, double b);
  /// Standard normal via Box-Muller on the raw stream.
  double normal();
  Vec in_box(const Box& box);
  Vec on_sphere(int dim);
  Vec in_ball(int dim, double radius);

 private:
  std::mt19937_64 gen_;
};

}  // namespace nsiss
