#include "nsiss/kfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nsiss {

std::string tag_name(FnTag tag) {
  switch (tag) {
    case FnTag::K: return "K";
    case FnTag::Kinf: return "Kinf";
    case FnTag::PD: return "PD";
    case FnTag::NonDecreasing: return "NonDecreasing";
  }
  return "NonDecreasing";
}

FnTag tag_from_name(const std::string& name) {
  if (name == "K") return FnTag::K;
  if (name == "Kinf") return FnTag::Kinf;
  if (name == "PD") return FnTag::PD;
  if (name == "NonDecreasing") return FnTag::NonDecreasing;
  throw SchemaError("unknown function tag: " + name);
}

namespace detail {

struct FnNode {
  virtual ~FnNode() = default;
  virtual double eval(double s) const = 0;
  virtual EvalDeriv eval_deriv(double s) const = 0;
  virtual FnForm form() const = 0;
  /// Closed-form inverse where the node structure admits one.
  virtual std::optional<double> analytic_invert(double /*y*/) const { return std::nullopt; }
};

}  // namespace detail

namespace {

using detail::FnNode;

bool is_k_class(FnTag t) { return t == FnTag::K || t == FnTag::Kinf; }
bool vanishes_at_zero(FnTag t) { return t != FnTag::NonDecreasing; }

FnTag compose_tag(FnTag outer, FnTag inner) {
  if (outer == FnTag::Kinf && inner == FnTag::Kinf) return FnTag::Kinf;
  if (is_k_class(outer) && is_k_class(inner)) return FnTag::K;
  if (vanishes_at_zero(outer) && vanishes_at_zero(inner)) return FnTag::PD;
  return FnTag::NonDecreasing;
}

FnTag sum_tag(FnTag a, FnTag b) {
  if (!vanishes_at_zero(a) || !vanishes_at_zero(b)) return FnTag::NonDecreasing;
  if (a == FnTag::Kinf && is_k_class(b)) return FnTag::Kinf;
  if (b == FnTag::Kinf && is_k_class(a)) return FnTag::Kinf;
  if (is_k_class(a) && is_k_class(b)) return FnTag::K;
  return FnTag::PD;
}

FnTag max_tag(FnTag a, FnTag b) {
  if (!vanishes_at_zero(a) || !vanishes_at_zero(b)) return FnTag::NonDecreasing;
  if (a == FnTag::Kinf || b == FnTag::Kinf) {
    if (is_k_class(a) && is_k_class(b)) return FnTag::Kinf;
  }
  if (is_k_class(a) && is_k_class(b)) return FnTag::K;
  return FnTag::PD;
}

FnTag min_tag(FnTag a, FnTag b) {
  if (!vanishes_at_zero(a) || !vanishes_at_zero(b)) return FnTag::NonDecreasing;
  if (a == FnTag::Kinf && b == FnTag::Kinf) return FnTag::Kinf;
  if (is_k_class(a) && is_k_class(b)) return FnTag::K;
  return FnTag::PD;
}

FnTag product_tag(FnTag a, FnTag b) {
  if (!vanishes_at_zero(a) || !vanishes_at_zero(b)) return FnTag::NonDecreasing;
  if (a == FnTag::Kinf && b == FnTag::Kinf) return FnTag::Kinf;
  if (a == FnTag::Kinf && b == FnTag::K) return FnTag::Kinf;
  if (a == FnTag::K && b == FnTag::Kinf) return FnTag::Kinf;
  if (is_k_class(a) && is_k_class(b)) return FnTag::K;
  return FnTag::PD;
}

struct LinearNode final : FnNode {
  double c;
  explicit LinearNode(double c_) : c(c_) {}
  double eval(double s) const override { return c * s; }
  EvalDeriv eval_deriv(double s) const override { return {c * s, c, false}; }
  FnForm form() const override { return {"linear", {c}, {}, {}, ""}; }
  std::optional<double> analytic_invert(double y) const override {
    if (c <= 0.0) return std::nullopt;
    return y / c;
  }
};

struct PowerNode final : FnNode {
  double c, p;
  PowerNode(double c_, double p_) : c(c_), p(p_) {}
  double eval(double s) const override { return c * std::pow(s, p); }
  EvalDeriv eval_deriv(double s) const override {
    double d;
    if (p == 1.0)
      d = c;
    else if (s == 0.0)
      d = p > 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
    else
      d = c * p * std::pow(s, p - 1.0);
    return {c * std::pow(s, p), d, false};
  }
  FnForm form() const override { return {"power", {c, p}, {}, {}, ""}; }
  std::optional<double> analytic_invert(double y) const override {
    return std::pow(y / c, 1.0 / p);
  }
};

struct ConstNode final : FnNode {
  double a;
  explicit ConstNode(double a_) : a(a_) {}
  double eval(double) const override { return a; }
  EvalDeriv eval_deriv(double) const override { return {a, 0.0, false}; }
  FnForm form() const override { return {"constant", {a}, {}, {}, ""}; }
};

struct PwLinearNode final : FnNode {
  std::vector<double> s, v;
  PwLinearNode(std::vector<double> s_, std::vector<double> v_)
      : s(std::move(s_)), v(std::move(v_)) {}

  double slope(size_t k) const { return (v[k + 1] - v[k]) / (s[k + 1] - s[k]); }

  double eval(double x) const override {
    size_t n = s.size();
    if (x <= s[0]) return v[0] + slope(0) * (x - s[0]);
    if (x >= s[n - 1]) return v[n - 1] + slope(n - 2) * (x - s[n - 1]);
    size_t k = std::upper_bound(s.begin(), s.end(), x) - s.begin() - 1;
    return v[k] + slope(k) * (x - s[k]);
  }

  EvalDeriv eval_deriv(double x) const override {
    size_t n = s.size();
    bool at_knot = false;
    for (double sk : s)
      if (x == sk) at_knot = true;
    double d;
    if (x < s[0])
      d = slope(0);
    else if (x >= s[n - 1])
      d = slope(n - 2);
    else {
      size_t k = std::upper_bound(s.begin(), s.end(), x) - s.begin() - 1;
      d = slope(k);
    }
    return {eval(x), d, at_knot};
  }

  FnForm form() const override {
    FnForm f{"pwl", {}, {}, {}, ""};
    for (size_t k = 0; k < s.size(); ++k) f.knots.push_back({s[k], v[k], 0.0});
    return f;
  }

  std::optional<double> analytic_invert(double y) const override {
    size_t n = s.size();
    if (y <= v[0]) {
      double m = slope(0);
      if (m <= 0.0) return std::nullopt;
      return s[0] + (y - v[0]) / m;
    }
    if (y >= v[n - 1]) {
      double m = slope(n - 2);
      if (m <= 0.0) return std::nullopt;
      return s[n - 1] + (y - v[n - 1]) / m;
    }
    size_t k = std::upper_bound(v.begin(), v.end(), y) - v.begin() - 1;
    double m = slope(k);
    if (m <= 0.0) return std::nullopt;
    return s[k] + (y - v[k]) / m;
  }
};

struct InterpNode final : FnNode {
  std::vector<double> s, v, d;
  InterpNode(std::vector<double> s_, std::vector<double> v_, std::vector<double> d_)
      : s(std::move(s_)), v(std::move(v_)), d(std::move(d_)) {}

  EvalDeriv eval_deriv(double x) const override {
    size_t n = s.size();
    if (x <= s[0]) return {v[0] + d[0] * (x - s[0]), d[0], false};
    if (x >= s[n - 1]) return {v[n - 1] + d[n - 1] * (x - s[n - 1]), d[n - 1], false};
    size_t k = std::upper_bound(s.begin(), s.end(), x) - s.begin() - 1;
    double h = s[k + 1] - s[k];
    double t = (x - s[k]) / h;
    double t2 = t * t, t3 = t2 * t;
    double val = v[k] * (2 * t3 - 3 * t2 + 1) + h * d[k] * (t3 - 2 * t2 + t) +
                 v[k + 1] * (-2 * t3 + 3 * t2) + h * d[k + 1] * (t3 - t2);
    double der = (v[k] * (6 * t2 - 6 * t) + h * d[k] * (3 * t2 - 4 * t + 1) +
                  v[k + 1] * (-6 * t2 + 6 * t) + h * d[k + 1] * (3 * t2 - 2 * t)) /
                 h;
    return {val, der, false};
  }

  double eval(double x) const override { return eval_deriv(x).value; }

  FnForm form() const override {
    FnForm f{"interp", {}, {}, {}, ""};
    for (size_t k = 0; k < s.size(); ++k) f.knots.push_back({s[k], v[k], d[k]});
    return f;
  }
};

struct UnaryChildNode : FnNode {
  ComparisonFn f;
  explicit UnaryChildNode(ComparisonFn f_) : f(std::move(f_)) {}
};

struct BinaryChildNode : FnNode {
  ComparisonFn a, b;
  BinaryChildNode(ComparisonFn a_, ComparisonFn b_) : a(std::move(a_)), b(std::move(b_)) {}
  FnForm child_form(const char* kind) const {
    return {kind, {}, {}, {a.describe(), b.describe()}, ""};
  }
};

struct ComposeNode final : BinaryChildNode {
  using BinaryChildNode::BinaryChildNode;  // a = outer, b = inner
  double eval(double s) const override { return a(b(s)); }
  EvalDeriv eval_deriv(double s) const override {
    EvalDeriv in = b.eval_and_derivative(s);
    EvalDeriv out = a.eval_and_derivative(in.value);
    return {out.value, out.derivative * in.derivative, in.one_sided || out.one_sided};
  }
  FnForm form() const override { return child_form("compose"); }
  std::optional<double> analytic_invert(double y) const override {
    if (!is_k_class(a.tag()) || !is_k_class(b.tag())) return std::nullopt;
    return invert(b, invert(a, y));
  }
};

struct SumNode final : BinaryChildNode {
  using BinaryChildNode::BinaryChildNode;
  double eval(double s) const override { return a(s) + b(s); }
  EvalDeriv eval_deriv(double s) const override {
    EvalDeriv x = a.eval_and_derivative(s), y = b.eval_and_derivative(s);
    return {x.value + y.value, x.derivative + y.derivative, x.one_sided || y.one_sided};
  }
  FnForm form() const override { return child_form("sum"); }
};

struct MaxNode final : BinaryChildNode {
  using BinaryChildNode::BinaryChildNode;
  double eval(double s) const override { return std::max(a(s), b(s)); }
  EvalDeriv eval_deriv(double s) const override {
    EvalDeriv x = a.eval_and_derivative(s), y = b.eval_and_derivative(s);
    bool tie = std::abs(x.value - y.value) <= 1e-14 * (1.0 + std::abs(x.value));
    const EvalDeriv& w = x.value >= y.value ? x : y;
    return {w.value, w.derivative, tie || w.one_sided};
  }
  FnForm form() const override { return child_form("max"); }
};

struct MinNode final : BinaryChildNode {
  using BinaryChildNode::BinaryChildNode;
  double eval(double s) const override { return std::min(a(s), b(s)); }
  EvalDeriv eval_deriv(double s) const override {
    EvalDeriv x = a.eval_and_derivative(s), y = b.eval_and_derivative(s);
    bool tie = std::abs(x.value - y.value) <= 1e-14 * (1.0 + std::abs(x.value));
    const EvalDeriv& w = x.value <= y.value ? x : y;
    return {w.value, w.derivative, tie || w.one_sided};
  }
  FnForm form() const override { return child_form("min"); }
};

struct ScaleNode final : UnaryChildNode {
  double a;
  ScaleNode(double a_, ComparisonFn f_) : UnaryChildNode(std::move(f_)), a(a_) {}
  double eval(double s) const override { return a * f(s); }
  EvalDeriv eval_deriv(double s) const override {
    EvalDeriv x = f.eval_and_derivative(s);
    return {a * x.value, a * x.derivative, x.one_sided};
  }
  FnForm form() const override { return {"scale", {a}, {}, {f.describe()}, ""}; }
  std::optional<double> analytic_invert(double y) const override {
    if (a <= 0.0 || !is_k_class(f.tag())) return std::nullopt;
    return invert(f, y / a);
  }
};

struct ProductNode final : BinaryChildNode {
  using BinaryChildNode::BinaryChildNode;
  double eval(double s) const override { return a(s) * b(s); }
  EvalDeriv eval_deriv(double s) const override {
    EvalDeriv x = a.eval_and_derivative(s), y = b.eval_and_derivative(s);
    return {x.value * y.value, x.derivative * y.value + x.value * y.derivative,
            x.one_sided || y.one_sided};
  }
  FnForm form() const override { return child_form("product"); }
};

struct InverseNode final : UnaryChildNode {
  using UnaryChildNode::UnaryChildNode;
  double eval(double s) const override { return invert(f, s); }
  EvalDeriv eval_deriv(double s) const override {
    double t = invert(f, s);
    double fp = f.eval_and_derivative(t).derivative;
    double d = fp > 0.0 ? 1.0 / fp : std::numeric_limits<double>::infinity();
    return {t, d, false};
  }
  FnForm form() const override { return {"inverse", {}, {}, {f.describe()}, ""}; }
  std::optional<double> analytic_invert(double y) const override { return f(y); }
};

double adaptive_simpson(const ComparisonFn& g, double a, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = g(lm), frm = g(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const ComparisonFn& g, double s, double tol) {
  if (s == 0.0) return 0.0;
  double fa = g(0.0), fb = g(s), fm = g(0.5 * s);
  double whole = s / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(g, 0.0, s, fa, fm, fb, whole, tol, 48);
}

struct IntegralNode final : UnaryChildNode {
  using UnaryChildNode::UnaryChildNode;
  double eval(double s) const override { return integrate(f, s, 1e-10); }
  EvalDeriv eval_deriv(double s) const override { return {eval(s), f(s), false}; }
  FnForm form() const override { return {"integral", {}, {}, {f.describe()}, ""}; }
};

struct RatePullbackNode final : BinaryChildNode {
  using BinaryChildNode::BinaryChildNode;  // a = sigma, b = rho
  double eval(double s) const override {
    if (s == 0.0) return 0.0;
    double t = invert(a, s);
    return a.eval_and_derivative(t).derivative * b(t);
  }
  EvalDeriv eval_deriv(double s) const override {
    // The value is exact; the slope is a finite difference since the
    // scaling's second derivative is not exposed.
    double h = 1e-6 * std::max(1.0, std::abs(s));
    double d;
    if (s >= h)
      d = (eval(s + h) - eval(s - h)) / (2.0 * h);
    else
      d = (eval(s + h) - eval(s)) / h;
    return {eval(s), d, false};
  }
  FnForm form() const override { return child_form("rate_pullback"); }
};

ComparisonFn make_fn(std::shared_ptr<const FnNode> node, FnTag tag) {
  struct Access : ComparisonFn {
    Access(std::shared_ptr<const FnNode> n, FnTag t) : ComparisonFn(std::move(n), t) {}
  };
  return Access(std::move(node), tag);
}

}  // namespace

double ComparisonFn::operator()(double s) const {
  if (!node_) throw Error("uninitialized comparison function");
  if (s < 0.0) throw NegativeArgument("comparison function argument must be >= 0");
  return node_->eval(s);
}

EvalDeriv ComparisonFn::eval_and_derivative(double s) const {
  if (!node_) throw Error("uninitialized comparison function");
  if (s < 0.0) throw NegativeArgument("comparison function argument must be >= 0");
  return node_->eval_deriv(s);
}

double ComparisonFn::derivative(double s) const { return eval_and_derivative(s).derivative; }

FnForm ComparisonFn::describe() const {
  if (!node_) throw Error("uninitialized comparison function");
  FnForm f = node_->form();
  f.tag = tag_name(tag_);
  return f;
}

ComparisonFn ComparisonFn::linear(double c) {
  if (c < 0.0) throw NegativeArgument("linear coefficient must be >= 0");
  return make_fn(std::make_shared<LinearNode>(c),
                 c > 0.0 ? FnTag::Kinf : FnTag::NonDecreasing);
}

ComparisonFn ComparisonFn::power(double c, double p) {
  if (c <= 0.0 || p <= 0.0) throw NegativeArgument("power form needs c > 0 and p > 0");
  return make_fn(std::make_shared<PowerNode>(c, p), FnTag::Kinf);
}

ComparisonFn ComparisonFn::constant(double a) {
  if (a < 0.0) throw NegativeArgument("constant must be >= 0");
  return make_fn(std::make_shared<ConstNode>(a), FnTag::NonDecreasing);
}

ComparisonFn ComparisonFn::piecewise_linear(const std::vector<std::array<double, 2>>& knots,
                                            FnTag tag) {
  if (knots.size() < 2) throw EmptyGrid("piecewise_linear needs at least two knots");
  std::vector<double> s, v;
  for (const auto& k : knots) {
    s.push_back(k[0]);
    v.push_back(k[1]);
  }
  if (s[0] < 0.0) throw NegativeArgument("knot abscissae must be >= 0");
  for (size_t k = 1; k < s.size(); ++k)
    if (s[k] <= s[k - 1]) throw TagMismatch("knot abscissae must be strictly increasing");
  for (double x : v)
    if (x < 0.0) throw NegativeArgument("knot values must be >= 0");
  double last_slope = (v.back() - v[v.size() - 2]) / (s.back() - s[s.size() - 2]);
  bool strictly_increasing = true, nondecreasing = true;
  for (size_t k = 1; k < v.size(); ++k) {
    if (v[k] <= v[k - 1]) strictly_increasing = false;
    if (v[k] < v[k - 1]) nondecreasing = false;
  }
  switch (tag) {
    case FnTag::K:
    case FnTag::Kinf:
      if (s[0] != 0.0 || v[0] != 0.0 || !strictly_increasing)
        throw TagMismatch("class K knots must start at (0,0) and strictly increase");
      if (tag == FnTag::Kinf && last_slope <= 0.0)
        throw TagMismatch("class Kinf needs a positive final slope");
      break;
    case FnTag::PD:
      if (s[0] != 0.0 || v[0] != 0.0)
        throw TagMismatch("positive definite knots must start at (0,0)");
      for (size_t k = 1; k < v.size(); ++k)
        if (v[k] <= 0.0) throw TagMismatch("positive definite knot values must be > 0");
      if (last_slope < 0.0) throw TagMismatch("final slope must be >= 0");
      break;
    case FnTag::NonDecreasing:
      if (!nondecreasing) throw TagMismatch("knot values must be nondecreasing");
      if (last_slope < 0.0) throw TagMismatch("final slope must be >= 0");
      break;
  }
  return make_fn(std::make_shared<PwLinearNode>(std::move(s), std::move(v)), tag);
}

ComparisonFn ComparisonFn::monotone_interpolant(const std::vector<std::array<double, 3>>& knots,
                                                FnTag tag) {
  if (knots.size() < 2) throw EmptyGrid("monotone_interpolant needs at least two knots");
  std::vector<double> s, v, d;
  for (const auto& k : knots) {
    s.push_back(k[0]);
    v.push_back(k[1]);
    d.push_back(k[2]);
  }
  if (s[0] < 0.0) throw NegativeArgument("knot abscissae must be >= 0");
  for (size_t k = 1; k < s.size(); ++k)
    if (s[k] <= s[k - 1]) throw TagMismatch("knot abscissae must be strictly increasing");
  for (double x : d)
    if (x < 0.0) throw TagMismatch("knot derivatives must be >= 0 for a monotone interpolant");
  if (is_k_class(tag)) {
    if (s[0] != 0.0 || v[0] != 0.0)
      throw TagMismatch("class K knots must start at (0,0)");
    for (size_t k = 1; k < v.size(); ++k)
      if (v[k] <= v[k - 1]) throw TagMismatch("class K knot values must strictly increase");
    if (tag == FnTag::Kinf && d.back() <= 0.0)
      throw TagMismatch("class Kinf needs a positive final slope");
  }
  return make_fn(std::make_shared<InterpNode>(std::move(s), std::move(v), std::move(d)), tag);
}

ComparisonFn ComparisonFn::retag(const ComparisonFn& f, FnTag tag) {
  if (!f.node_) throw Error("uninitialized comparison function");
  return make_fn(f.node_, tag);
}

ComparisonFn ComparisonFn::from_form(const FnForm& form) {
  auto need_params = [&](size_t n) {
    if (form.params.size() < n) throw SchemaError("form '" + form.kind + "' is missing parameters");
  };
  auto need_children = [&](size_t n) {
    if (form.children.size() != n)
      throw SchemaError("form '" + form.kind + "' expects " + std::to_string(n) + " children");
  };
  FnTag tag = form.tag.empty() ? FnTag::NonDecreasing : tag_from_name(form.tag);
  ComparisonFn out;
  if (form.kind == "linear") {
    need_params(1);
    out = linear(form.params[0]);
  } else if (form.kind == "power") {
    need_params(2);
    out = power(form.params[0], form.params[1]);
  } else if (form.kind == "constant") {
    need_params(1);
    out = constant(form.params[0]);
  } else if (form.kind == "pwl") {
    std::vector<std::array<double, 2>> knots;
    for (const auto& k : form.knots) knots.push_back({k[0], k[1]});
    out = piecewise_linear(knots, tag);
  } else if (form.kind == "interp") {
    out = monotone_interpolant(form.knots, tag);
  } else if (form.kind == "compose") {
    need_children(2);
    out = compose_chain(from_form(form.children[0]), from_form(form.children[1]));
  } else if (form.kind == "sum") {
    need_children(2);
    out = fn_sum(from_form(form.children[0]), from_form(form.children[1]));
  } else if (form.kind == "max") {
    need_children(2);
    out = fn_max(from_form(form.children[0]), from_form(form.children[1]));
  } else if (form.kind == "min") {
    need_children(2);
    out = fn_min(from_form(form.children[0]), from_form(form.children[1]));
  } else if (form.kind == "scale") {
    need_params(1);
    need_children(1);
    out = fn_scale(form.params[0], from_form(form.children[0]));
  } else if (form.kind == "product") {
    need_children(2);
    out = fn_product(from_form(form.children[0]), from_form(form.children[1]));
  } else if (form.kind == "inverse") {
    need_children(1);
    out = inverse_fn(from_form(form.children[0]));
  } else if (form.kind == "integral") {
    need_children(1);
    out = integral_transform(from_form(form.children[0]));
  } else if (form.kind == "rate_pullback") {
    need_children(2);
    out = rate_pullback(from_form(form.children[0]), from_form(form.children[1]));
  } else {
    throw SchemaError("unknown function form: " + form.kind);
  }
  if (!form.tag.empty() && out.tag() != tag) out = retag(out, tag);
  return out;
}

ComparisonFn compose_chain(const ComparisonFn& outer, const ComparisonFn& inner) {
  return make_fn(std::make_shared<ComposeNode>(outer, inner),
                 compose_tag(outer.tag(), inner.tag()));
}

ComparisonFn fn_sum(const ComparisonFn& f, const ComparisonFn& g) {
  return make_fn(std::make_shared<SumNode>(f, g), sum_tag(f.tag(), g.tag()));
}

ComparisonFn fn_max(const ComparisonFn& f, const ComparisonFn& g) {
  return make_fn(std::make_shared<MaxNode>(f, g), max_tag(f.tag(), g.tag()));
}

ComparisonFn fn_min(const ComparisonFn& f, const ComparisonFn& g) {
  return make_fn(std::make_shared<MinNode>(f, g), min_tag(f.tag(), g.tag()));
}

ComparisonFn fn_scale(double a, const ComparisonFn& f) {
  if (a < 0.0) throw NegativeArgument("scale factor must be >= 0");
  FnTag tag = a > 0.0 ? f.tag() : FnTag::NonDecreasing;
  return make_fn(std::make_shared<ScaleNode>(a, f), tag);
}

ComparisonFn fn_product(const ComparisonFn& f, const ComparisonFn& g) {
  return make_fn(std::make_shared<ProductNode>(f, g), product_tag(f.tag(), g.tag()));
}

double invert(const ComparisonFn& f, double y) {
  if (!f.valid()) throw Error("uninitialized comparison function");
  if (!is_k_class(f.tag()))
    throw NotInvertible("invert requires a class K or Kinf function");
  if (y < 0.0) throw OutOfRange("invert target must be >= 0");
  if (y == 0.0) return 0.0;
  if (auto s = f.node_->analytic_invert(y)) return *s;

  double hi = 1.0;
  while (f(hi) < y) {
    hi *= 2.0;
    if (hi > 1e300) throw OutOfRange("value is above the function's range");
  }
  double lo = 0.0;
  double tol = 1e-10 * std::max(1.0, std::abs(y));
  double mid = hi;
  for (int it = 0; it < 240; ++it) {
    mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (std::abs(fm - y) <= tol) return mid;
    if (fm < y)
      lo = mid;
    else
      hi = mid;
  }
  if (std::abs(f(mid) - y) <= 1e-8 * std::max(1.0, std::abs(y))) return mid;
  throw ConstructionFailed("inversion did not converge");
}

ComparisonFn inverse_fn(const ComparisonFn& f) {
  if (!is_k_class(f.tag()))
    throw NotInvertible("inverse_fn requires a class K or Kinf function");
  return make_fn(std::make_shared<InverseNode>(f), f.tag());
}

ComparisonFn integral_transform(const ComparisonFn& nu) {
  if (nu.tag() == FnTag::PD)
    throw TagMismatch("integral_transform needs a nondecreasing integrand");
  const double probes[] = {1e-9, 1e-6, 1e-3, 1e-1, 1.0, 1e1, 1e3};
  for (double t : probes)
    if (nu(t) < 0.0) throw NonPositiveIntegrand("integrand is negative");
  if (nu(1e3) <= 0.0) throw NonPositiveIntegrand("integrand is not eventually positive");
  return make_fn(std::make_shared<IntegralNode>(nu), FnTag::Kinf);
}

ComparisonFn rate_pullback(const ComparisonFn& sigma, const ComparisonFn& rho) {
  if (!is_k_class(sigma.tag()))
    throw NotInvertible("rate_pullback needs an invertible scaling");
  FnTag tag = vanishes_at_zero(rho.tag()) ? FnTag::PD : FnTag::NonDecreasing;
  return make_fn(std::make_shared<RatePullbackNode>(sigma, rho), tag);
}

SmallGainCheck small_gain_holds(const ComparisonFn& chi1, const ComparisonFn& chi2,
                                const std::vector<double>& grid) {
  if (grid.empty()) throw EmptyGrid("small-gain grid is empty");
  SmallGainCheck out;
  out.worst_margin = std::numeric_limits<double>::infinity();
  for (double r : grid) {
    if (r <= 0.0) throw NegativeArgument("small-gain grid radii must be > 0");
    double margin = r - chi1(chi2(r));
    if (margin < out.worst_margin) {
      out.worst_margin = margin;
      out.worst_r = r;
    }
  }
  out.holds = out.worst_margin > 0.0;
  return out;
}

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    g[i] = std::exp(llo + (lhi - llo) * i / static_cast<double>(n - 1));
  g.back() = hi;
  return g;
}

// PCHIP-style derivative assignment; secants at the ends, weighted
// harmonic mean inside, so the cubic stays monotone on each segment.
std::vector<double> monotone_derivatives(const std::vector<double>& s,
                                         const std::vector<double>& v) {
  size_t n = s.size();
  std::vector<double> delta(n - 1), d(n);
  for (size_t k = 0; k + 1 < n; ++k) delta[k] = (v[k + 1] - v[k]) / (s[k + 1] - s[k]);
  d[0] = delta[0];
  d[n - 1] = delta[n - 2];
  for (size_t k = 1; k + 1 < n; ++k) {
    if (delta[k - 1] <= 0.0 || delta[k] <= 0.0) {
      d[k] = 0.0;
      continue;
    }
    double w1 = 2.0 * delta[k] + delta[k - 1];
    double w2 = delta[k] + 2.0 * delta[k - 1];
    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
  }
  return d;
}

}  // namespace

ComparisonFn construct_sigma(const ComparisonFn& chi1, const ComparisonFn& chi2,
                             double domain_max) {
  if (!(domain_max > 0.0)) throw OutOfRange("domain_max must be > 0");
  std::vector<double> probe = log_grid(domain_max * 1e-8, domain_max, 200);
  SmallGainCheck sg = small_gain_holds(chi1, chi2, probe);
  if (!sg.holds) throw SmallGainViolated("contraction condition fails on the probe grid");

  bool chi1_zero = chi1(domain_max) == 0.0 && chi1(domain_max * 1e-3) == 0.0;
  const double slope_floor = 1e-9;

  int n_grid = 160;
  for (int densify = 0; densify < 4; ++densify, n_grid *= 2) {
    std::vector<double> r = log_grid(domain_max * 1e-8, domain_max, n_grid);
    size_t n = r.size();
    std::vector<double> lower(n), upper(n), cand(n);
    for (size_t k = 0; k < n; ++k) {
      lower[k] = chi2(r[k]);
      if (chi1_zero) {
        upper[k] = std::numeric_limits<double>::infinity();
        cand[k] = 2.0 * lower[k] + 1e-6 * r[k];
      } else {
        try {
          upper[k] = invert(chi1, r[k]);
        } catch (const OutOfRange&) {
          // r exceeds the range of a bounded chi1, so any value
          // satisfies chi1(sigma(r)) < r.
          upper[k] = std::numeric_limits<double>::infinity();
        }
        cand[k] = std::isfinite(upper[k]) ? std::sqrt(lower[k] * upper[k])
                                          : 2.0 * lower[k] + 1e-6 * r[k];
      }
    }

    for (int shrink = 0; shrink < 20; ++shrink) {
      // Nondecreasing sweep with a positive slope floor.
      std::vector<double> c(cand);
      for (size_t k = 1; k < n; ++k)
        c[k] = std::max(c[k], c[k - 1] + slope_floor * (r[k] - r[k - 1]));

      std::vector<std::array<double, 3>> knots;
      knots.reserve(n + 1);
      std::vector<double> s_full{0.0}, v_full{0.0};
      for (size_t k = 0; k < n; ++k) {
        s_full.push_back(r[k]);
        v_full.push_back(c[k]);
      }
      std::vector<double> d_full = monotone_derivatives(s_full, v_full);
      for (size_t k = 0; k < s_full.size(); ++k)
        knots.push_back({s_full[k], v_full[k], std::max(d_full[k], 0.0)});
      ComparisonFn sigma = ComparisonFn::monotone_interpolant(knots, FnTag::Kinf);

      bool upper_ok = true, lower_ok = true;
      // Validate only where the knot grid reaches: below the first knot a
      // cubic tail with finite slope cannot dominate a concave chi2 anyway.
      std::vector<double> val = log_grid(domain_max * 1e-8, domain_max, 1200);
      for (double rv : val) {
        double sv = sigma(rv);
        if (!(sv - chi2(rv) > 1e-15 * (1.0 + std::abs(sv)))) lower_ok = false;
        if (!(rv - chi1(sv) > 1e-15 * (1.0 + rv))) upper_ok = false;
        if (!lower_ok && !upper_ok) break;
      }
      if (lower_ok && upper_ok) return sigma;
      if (!lower_ok) break;  // interpolant dips toward chi2: refine the grid
      for (size_t k = 0; k < n; ++k) cand[k] = 0.5 * (cand[k] + lower[k]);
    }
  }
  throw ConstructionFailed("no valid scaling found after grid refinement");
}

}  // namespace nsiss
