#include "nsiss/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace nsiss {

namespace {

void require_same_size(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vector sizes differ");
}

}  // namespace

double dot(const Vec& a, const Vec& b) {
  require_same_size(a, b);
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

Vec add(const Vec& a, const Vec& b) {
  require_same_size(a, b);
  Vec r(a);
  for (size_t i = 0; i < a.size(); ++i) r[i] += b[i];
  return r;
}

Vec sub(const Vec& a, const Vec& b) {
  require_same_size(a, b);
  Vec r(a);
  for (size_t i = 0; i < a.size(); ++i) r[i] -= b[i];
  return r;
}

Vec scaled(double c, const Vec& a) {
  Vec r(a);
  for (double& v : r) v *= c;
  return r;
}

Vec axpy(const Vec& a, double c, const Vec& b) {
  require_same_size(a, b);
  Vec r(a);
  for (size_t i = 0; i < a.size(); ++i) r[i] += c * b[i];
  return r;
}

Vec concat(const Vec& a, const Vec& b) {
  Vec r(a);
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  int r = static_cast<int>(rows.size());
  int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  Mat m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw DimensionMismatch("ragged rows");
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Mat operator+(const Mat& x, const Mat& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw DimensionMismatch("matrix sizes differ");
  Mat r(x);
  for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
  return r;
}

Mat operator-(const Mat& x, const Mat& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw DimensionMismatch("matrix sizes differ");
  Mat r(x);
  for (size_t i = 0; i < r.a.size(); ++i) r.a[i] -= y.a[i];
  return r;
}

Mat operator*(const Mat& x, const Mat& y) {
  if (x.cols != y.rows) throw DimensionMismatch("matrix product shape");
  Mat r(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      double v = x(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) r(i, j) += v * y(k, j);
    }
  return r;
}

Mat operator*(double c, const Mat& x) {
  Mat r(x);
  for (double& v : r.a) v *= c;
  return r;
}

Vec operator*(const Mat& m, const Vec& v) {
  if (m.cols != static_cast<int>(v.size())) throw DimensionMismatch("matvec shape");
  Vec r(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

Mat transpose(const Mat& m) {
  Mat r(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) r(j, i) = m(i, j);
  return r;
}

Mat sym_part_doubled(const Mat& x) { return x + transpose(x); }

bool is_symmetric(const Mat& m, double tol) {
  if (m.rows != m.cols) return false;
  double scale = 0.0;
  for (double v : m.a) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < m.rows; ++i)
    for (int j = i + 1; j < m.cols; ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol * std::max(1.0, scale)) return false;
  return true;
}

void require_symmetric(const Mat& m, double tol) {
  if (!is_symmetric(m, tol)) throw NotSymmetric("matrix is not symmetric");
}

std::vector<double> sym_eigenvalues(const Mat& m) {
  require_symmetric(m);
  int n = m.rows;
  Mat a(m);
  // Cyclic Jacobi: sweep upper-triangle rotations until off-diagonal mass
  // is negligible relative to the diagonal.
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30 * std::max(1.0, static_cast<double>(n))) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

double max_sym_eigenvalue(const Mat& m) { return sym_eigenvalues(m).back(); }
double min_sym_eigenvalue(const Mat& m) { return sym_eigenvalues(m).front(); }

double spectral_norm(const Mat& m) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  Mat mt = transpose(m);
  // Deterministic start vector with a nonzero component in every direction.
  Vec v(m.cols);
  for (int j = 0; j < m.cols; ++j) v[j] = 1.0 + 0.5 / (j + 2.0);
  double nv = norm2(v);
  for (double& x : v) x /= nv;
  double prev = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vec w = mt * (m * v);
    double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    for (size_t i = 0; i < w.size(); ++i) w[i] /= nw;
    double est = std::sqrt(nw);
    v = w;
    if (it > 0 && std::abs(est - prev) <= 1e-10 * std::max(1.0, est)) return est;
    prev = est;
  }
  return prev;
}

double Rng::unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

double Rng::range(double a, double b) { return a + (b - a) * unit(); }

double Rng::normal() {
  // Box-Muller; draws until the radius is usable so the mapping from the
  // raw stream to output stays fixed across platforms.
  double u1 = unit();
  while (u1 <= 0.0) u1 = unit();
  double u2 = unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

Vec Rng::in_box(const Box& box) {
  Vec x(box.dim());
  for (int i = 0; i < box.dim(); ++i) x[i] = range(box.lo[i], box.hi[i]);
  return x;
}

Vec Rng::on_sphere(int dim) {
  for (;;) {
    Vec x(dim);
    for (int i = 0; i < dim; ++i) x[i] = normal();
    double n = norm2(x);
    if (n > 1e-12) {
      for (double& v : x) v /= n;
      return x;
    }
  }
}

Vec Rng::in_ball(int dim, double radius) {
  Vec x = on_sphere(dim);
  double r = radius * std::pow(unit(), 1.0 / dim);
  for (double& v : x) v *= r;
  return x;
}

}  // namespace nsiss
