#include "nsiss/nonsmooth.hpp"

#include <algorithm>
#include <cmath>

#include "nsiss/errors.hpp"

namespace nsiss {

PiecewiseC1Fn::PiecewiseC1Fn(ProperPartition partition, std::vector<ScalarField> pieces)
    : partition_(std::move(partition)), pieces_(std::move(pieces)) {
  if (static_cast<int>(pieces_.size()) != partition_.size())
    throw DimensionMismatch("piece count differs from region count");
  for (const ScalarField& p : pieces_)
    if (p.dim() != partition_.dim())
      throw DimensionMismatch("piece dimension differs from partition");
}

PiecewiseC1Fn PiecewiseC1Fn::piecewise_quadratic(ProperPartition partition,
                                                 const std::vector<Mat>& p) {
  std::vector<ScalarField> pieces;
  pieces.reserve(p.size());
  for (const Mat& m : p) pieces.push_back(ScalarField::quadratic_form(m));
  return PiecewiseC1Fn(std::move(partition), std::move(pieces));
}

double PiecewiseC1Fn::value(const Vec& x) const {
  std::vector<int> act = partition_.active_indices(x, 1e-9);
  return pieces_[act.front()].value(x);
}

double PiecewiseC1Fn::piece_value(int j, const Vec& x) const {
  return pieces_.at(j).value(x);
}

Vec PiecewiseC1Fn::piece_gradient(int j, const Vec& x) const {
  return pieces_.at(j).gradient(x);
}

GradientHull PiecewiseC1Fn::gradient_hull(const Vec& x, double tol) const {
  GradientHull hull;
  hull.active = partition_.active_indices(x, tol);
  hull.vertices.reserve(hull.active.size());
  for (int j : hull.active) hull.vertices.push_back(pieces_[j].gradient(x));
  return hull;
}

DerivativeInterval clarke_interval(const GradientHull& grads, const FilippovHull& fields) {
  if (grads.vertices.empty() || fields.vertices.empty())
    throw EmptyGrid("hulls must have at least one vertex");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Vec& p : grads.vertices)
    for (const Vec& f : fields.vertices) {
      double a = dot(p, f);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  return DerivativeInterval::make(lo, hi);
}

namespace {

// Least-squares solve of a small dense system by Householder QR; returns
// false when the system is rank deficient beyond use.
bool qr_solve(Mat a, Vec b, Vec& x) {
  int m = a.rows, n = a.cols;
  for (int k = 0; k < n; ++k) {
    double nrm = 0.0;
    for (int i = k; i < m; ++i) nrm += a(i, k) * a(i, k);
    nrm = std::sqrt(nrm);
    if (nrm < 1e-14) return false;
    // nrm takes the pivot's sign so the reflector pivot lands in [1, 2]
    if (a(k, k) < 0) nrm = -nrm;
    for (int i = k; i < m; ++i) a(i, k) /= nrm;
    a(k, k) += 1.0;
    for (int j = k + 1; j < n; ++j) {
      double s = 0.0;
      for (int i = k; i < m; ++i) s += a(i, k) * a(i, j);
      s = -s / a(k, k);
      for (int i = k; i < m; ++i) a(i, j) += s * a(i, k);
    }
    double s = 0.0;
    for (int i = k; i < m; ++i) s += a(i, k) * b[i];
    s = -s / a(k, k);
    for (int i = k; i < m; ++i) b[i] += s * a(i, k);
    a(k, k) = -nrm;  // the reflector maps the column to -nrm * e_k
  }
  x.assign(n, 0.0);
  for (int k = n - 1; k >= 0; --k) {
    double s = b[k];
    for (int j = k + 1; j < n; ++j) s -= a(k, j) * x[j];
    x[k] = s / a(k, k);
  }
  return true;
}

struct LieProblem {
  int k = 0;                  // field vertices
  Mat eq;                     // (rows x k) gradient-agreement rows
  Vec cost;                   // <g_0, f_i>
  double scale = 1.0;         // magnitude reference for residual tests
};

LieProblem build_lie_problem(const GradientHull& grads, const FilippovHull& fields) {
  LieProblem pb;
  pb.k = static_cast<int>(fields.vertices.size());
  int m = static_cast<int>(grads.vertices.size());
  pb.eq = Mat(m - 1, pb.k);
  pb.cost.assign(pb.k, 0.0);
  pb.scale = 1.0;
  for (int i = 0; i < pb.k; ++i) {
    pb.cost[i] = dot(grads.vertices[0], fields.vertices[i]);
    pb.scale = std::max(pb.scale, std::abs(pb.cost[i]));
    for (int j = 1; j < m; ++j) {
      double a = dot(grads.vertices[j], fields.vertices[i]) - pb.cost[i];
      pb.eq(j - 1, i) = a;
      pb.scale = std::max(pb.scale, std::abs(a));
    }
  }
  return pb;
}

// Exact vertex enumeration over simplex supports.  Vertices of
// {lambda >= 0, sum = 1, eq lambda = 0} have support at most rank+1, so
// supports up to eq.rows + 1 cover every vertex.
DerivativeInterval lie_by_enumeration(const LieProblem& pb) {
  int k = pb.k;
  int max_support = std::min(k, pb.eq.rows + 1);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  bool any = false;
  double tol = 1e-9 * pb.scale;

  std::vector<int> support;
  auto try_support = [&]() {
    int s = static_cast<int>(support.size());
    Mat a(pb.eq.rows + 1, s);
    Vec b(pb.eq.rows + 1, 0.0);
    for (int c = 0; c < s; ++c) {
      for (int r = 0; r < pb.eq.rows; ++r) a(r, c) = pb.eq(r, support[c]);
      a(pb.eq.rows, c) = 1.0;
    }
    b[pb.eq.rows] = 1.0;
    Vec lam;
    if (!qr_solve(a, b, lam)) return;
    for (double l : lam)
      if (!std::isfinite(l) || l < -1e-9) return;
    // residual of the full system at this candidate
    for (int r = 0; r < pb.eq.rows; ++r) {
      double res = 0.0;
      for (int c = 0; c < s; ++c) res += pb.eq(r, support[c]) * lam[c];
      if (std::abs(res) > tol) return;
    }
    double sum = 0.0, val = 0.0;
    for (int c = 0; c < s; ++c) {
      sum += lam[c];
      val += pb.cost[support[c]] * lam[c];
    }
    if (std::abs(sum - 1.0) > 1e-9) return;
    any = true;
    lo = std::min(lo, val);
    hi = std::max(hi, val);
  };

  // enumerate supports in increasing size, lexicographic within a size
  std::function<void(int, int)> rec = [&](int start, int remaining) {
    if (remaining == 0) {
      try_support();
      return;
    }
    for (int i = start; i <= k - remaining; ++i) {
      support.push_back(i);
      rec(i + 1, remaining - 1);
      support.pop_back();
    }
  };
  for (int size = 1; size <= max_support; ++size) rec(0, size);

  if (!any) return DerivativeInterval::none();
  return DerivativeInterval::make(lo, hi);
}

DerivativeInterval lie_by_lp(const LieProblem& pb) {
  int k = pb.k;
  int rows = pb.eq.rows + 1;
  Mat a(rows, k);
  Vec b(rows, 0.0);
  for (int r = 0; r < pb.eq.rows; ++r)
    for (int c = 0; c < k; ++c) a(r, c) = pb.eq(r, c);
  for (int c = 0; c < k; ++c) a(pb.eq.rows, c) = 1.0;
  b[pb.eq.rows] = 1.0;

  double vmin = 0.0, vmax = 0.0;
  if (!lp_min(a, b, pb.cost, vmin)) return DerivativeInterval::none();
  Vec neg(pb.cost);
  for (double& v : neg) v = -v;
  if (!lp_min(a, b, neg, vmax)) return DerivativeInterval::none();
  return DerivativeInterval::make(vmin, -vmax);
}

}  // namespace

DerivativeInterval lie_interval(const GradientHull& grads, const FilippovHull& fields) {
  if (grads.vertices.empty() || fields.vertices.empty())
    throw EmptyGrid("hulls must have at least one vertex");
  LieProblem pb = build_lie_problem(grads, fields);
  if (pb.eq.rows == 0) {
    // single gradient: every field vertex pairs trivially
    double lo = *std::min_element(pb.cost.begin(), pb.cost.end());
    double hi = *std::max_element(pb.cost.begin(), pb.cost.end());
    return DerivativeInterval::make(lo, hi);
  }
  if (pb.k <= 6) return lie_by_enumeration(pb);
  return lie_by_lp(pb);
}

DerivativeInterval clarke_interval(const PiecewiseC1Fn& v, const FilippovHull& fields,
                                   const Vec& x, double tol) {
  return clarke_interval(v.gradient_hull(x, tol), fields);
}

DerivativeInterval lie_interval(const PiecewiseC1Fn& v, const FilippovHull& fields,
                                const Vec& x, double tol) {
  return lie_interval(v.gradient_hull(x, tol), fields);
}

ContinuityReport continuity_check(const PiecewiseC1Fn& v,
                                  const std::vector<SurfacePairSamples>& samples,
                                  double tol) {
  ContinuityReport rep;
  rep.pass = true;
  for (const SurfacePairSamples& pair : samples) {
    for (const Vec& x : pair.points) {
      double vi = v.piece_value(pair.i, x);
      double vj = v.piece_value(pair.j, x);
      double gap = std::abs(vi - vj);
      ++rep.checked;
      if (gap > rep.worst_gap) {
        rep.worst_gap = gap;
        rep.worst_i = pair.i;
        rep.worst_j = pair.j;
        rep.worst_x = x;
      }
      if (gap > tol * std::max(1.0, std::abs(vi))) rep.pass = false;
    }
  }
  return rep;
}

bool lp_min(const Mat& a, const Vec& b, const Vec& c, double& out_value) {
  int m = a.rows, n = a.cols;
  // Phase 1 tableau with artificial variables; rows scaled so b >= 0.
  int cols = n + m + 1;
  Mat t(m + 1, cols);
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) {
    double s = b[i] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) t(i, j) = s * a(i, j);
    t(i, n + i) = 1.0;
    t(i, cols - 1) = s * b[i];
    basis[i] = n + i;
  }
  // phase-1 objective: sum of artificials
  for (int j = 0; j < cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += t(i, j);
    t(m, j) = (j >= n && j < n + m) ? 0.0 : -s;
  }
  {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += t(i, cols - 1);
    t(m, cols - 1) = -s;
  }

  auto pivot = [&](int pr, int pc) {
    double pv = t(pr, pc);
    for (int j = 0; j < cols; ++j) t(pr, j) /= pv;
    for (int i = 0; i <= m; ++i) {
      if (i == pr) continue;
      double f = t(i, pc);
      if (f == 0.0) continue;
      for (int j = 0; j < cols; ++j) t(i, j) -= f * t(pr, j);
    }
    basis[pr] = pc;
  };

  auto run_simplex = [&](int allowed_cols) {
    for (int iter = 0; iter < 10000; ++iter) {
      // Bland's rule: smallest index with a negative reduced cost
      int pc = -1;
      for (int j = 0; j < allowed_cols; ++j)
        if (t(m, j) < -1e-11) {
          pc = j;
          break;
        }
      if (pc < 0) return true;
      int pr = -1;
      double best = 0.0;
      for (int i = 0; i < m; ++i) {
        if (t(i, pc) <= 1e-11) continue;
        double ratio = t(i, cols - 1) / t(i, pc);
        if (pr < 0 || ratio < best - 1e-14 ||
            (std::abs(ratio - best) <= 1e-14 && basis[i] < basis[pr])) {
          pr = i;
          best = ratio;
        }
      }
      if (pr < 0) return false;  // unbounded
      pivot(pr, pc);
    }
    return false;
  };

  if (!run_simplex(n + m)) throw ConstructionFailed("simplex did not terminate");
  double scale = 1.0;
  for (double v : b) scale = std::max(scale, std::abs(v));
  if (t(m, cols - 1) < -1e-9 * scale) return false;  // infeasible

  // Drive leftover artificials out of the basis where possible.
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) continue;
    int pc = -1;
    for (int j = 0; j < n; ++j)
      if (std::abs(t(i, j)) > 1e-9) {
        pc = j;
        break;
      }
    if (pc >= 0) pivot(i, pc);
  }

  // Phase 2 objective over the original variables.
  for (int j = 0; j < cols; ++j) t(m, j) = j < n ? c[j] : 0.0;
  t(m, cols - 1) = 0.0;
  for (int i = 0; i < m; ++i) {
    if (basis[i] >= n) continue;
    double f = t(m, basis[i]);
    if (f == 0.0) continue;
    for (int j = 0; j < cols; ++j) t(m, j) -= f * t(i, j);
  }
  // forbid re-entering artificial columns
  if (!run_simplex(n)) throw ConstructionFailed("objective unbounded on a bounded set");
  out_value = -t(m, cols - 1);
  return true;
}

}  // namespace nsiss
