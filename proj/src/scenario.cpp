#include "nsiss/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nsiss/certify.hpp"
#include "nsiss/compose.hpp"
#include "nsiss/errors.hpp"
#include "nsiss/kfun.hpp"
#include "nsiss/linmat.hpp"

namespace nsiss {

using nlohmann::json;

namespace {

// ---------- canonical writer ----------

std::string fmt_float(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0.0 ? "\"inf\"" : "\"-inf\"";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12e", v);
  return buf;
}

bool is_scalar_array(const json& a) {
  for (const auto& v : a)
    if (v.is_array() || v.is_object()) return false;
  return true;
}

void write_node(const json& j, std::string& out, int depth) {
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      const std::string pad(2 * (depth + 1), ' ');
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        out += json(it.key()).dump();
        out += ": ";
        write_node(it.value(), out, depth + 1);
      }
      out += "\n";
      out.append(2 * depth, ' ');
      out += "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      if (is_scalar_array(j)) {
        out += "[";
        bool first = true;
        for (const auto& v : j) {
          if (!first) out += ", ";
          first = false;
          write_node(v, out, depth);
        }
        out += "]";
        return;
      }
      const std::string pad(2 * (depth + 1), ' ');
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        write_node(v, out, depth + 1);
      }
      out += "\n";
      out.append(2 * depth, ' ');
      out += "]";
      return;
    }
    case json::value_t::string:
      out += j.dump();
      return;
    case json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      return;
    case json::value_t::number_integer:
      out += std::to_string(j.get<int64_t>());
      return;
    case json::value_t::number_unsigned:
      out += std::to_string(j.get<uint64_t>());
      return;
    case json::value_t::number_float:
      out += fmt_float(j.get<double>());
      return;
    default:
      out += "null";
      return;
  }
}

// ---------- schema access ----------

const json& need(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object()) throw SchemaError(ctx + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(ctx + ": missing field '" + key + "'");
  return *it;
}

double as_double(const json& j, const std::string& ctx) {
  if (!j.is_number()) throw SchemaError(ctx + ": expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& ctx) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw SchemaError(ctx + ": expected an integer");
  return j.get<int>();
}

uint64_t as_seed(const json& j, const std::string& ctx) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw SchemaError(ctx + ": expected an integer seed");
  return j.get<uint64_t>();
}

std::string as_string(const json& j, const std::string& ctx) {
  if (!j.is_string()) throw SchemaError(ctx + ": expected a string");
  return j.get<std::string>();
}

Vec as_vec(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw SchemaError(ctx + ": expected an array of numbers");
  Vec v;
  v.reserve(j.size());
  for (const auto& e : j) v.push_back(as_double(e, ctx));
  return v;
}

Mat as_mat(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.empty())
    throw SchemaError(ctx + ": expected a nonempty array of rows");
  const Vec first = as_vec(j.front(), ctx);
  if (first.empty()) throw SchemaError(ctx + ": rows must be nonempty");
  Mat m(static_cast<int>(j.size()), static_cast<int>(first.size()));
  for (int r = 0; r < m.rows; ++r) {
    const Vec row = as_vec(j.at(r), ctx);
    if (static_cast<int>(row.size()) != m.cols)
      throw SchemaError(ctx + ": rows differ in length");
    for (int c = 0; c < m.cols; ++c) m(r, c) = row[c];
  }
  return m;
}

// ---------- comparison functions, fields, systems ----------

FnForm form_from_json(const json& j, const std::string& ctx) {
  FnForm f;
  f.kind = as_string(need(j, "form", ctx), ctx + ".form");
  if (j.contains("tag")) f.tag = as_string(j.at("tag"), ctx + ".tag");
  if (f.kind == "linear") {
    f.params = {as_double(need(j, "c", ctx), ctx + ".c")};
  } else if (f.kind == "power") {
    f.params = {as_double(need(j, "c", ctx), ctx + ".c"),
                as_double(need(j, "p", ctx), ctx + ".p")};
  } else if (f.kind == "constant") {
    f.params = {as_double(need(j, "a", ctx), ctx + ".a")};
  } else if (f.kind == "scale") {
    f.params = {as_double(need(j, "a", ctx), ctx + ".a")};
  } else if (f.kind == "pwl" || f.kind == "interp") {
    const json& knots = need(j, "knots", ctx);
    if (!knots.is_array()) throw SchemaError(ctx + ".knots: expected an array");
    for (const auto& k : knots) {
      const Vec row = as_vec(k, ctx + ".knots");
      if (f.kind == "pwl" && row.size() == 2)
        f.knots.push_back({row[0], row[1], 0.0});
      else if (f.kind == "interp" && row.size() == 3)
        f.knots.push_back({row[0], row[1], row[2]});
      else
        throw SchemaError(ctx + ".knots: wrong knot arity for '" + f.kind + "'");
    }
  }
  if (j.contains("children")) {
    const json& kids = j.at("children");
    if (!kids.is_array()) throw SchemaError(ctx + ".children: expected an array");
    int idx = 0;
    for (const auto& k : kids)
      f.children.push_back(form_from_json(k, ctx + ".children[" + std::to_string(idx++) + "]"));
  }
  return f;
}

ComparisonFn parse_fn(const json& j, const std::string& ctx) {
  return ComparisonFn::from_form(form_from_json(j, ctx));
}

ScalarField parse_field(const json& j, const std::string& ctx) {
  const std::string form = as_string(need(j, "form", ctx), ctx + ".form");
  if (form == "linear") return ScalarField::linear_form(as_vec(need(j, "v", ctx), ctx + ".v"));
  if (form == "quadratic")
    return ScalarField::quadratic_form(as_mat(need(j, "m", ctx), ctx + ".m"));
  throw SchemaError(ctx + ": unknown field form '" + form + "'");
}

std::map<std::string, ScalarField> parse_fields(const json& j, const std::string& ctx) {
  std::map<std::string, ScalarField> out;
  if (!j.is_object()) throw SchemaError(ctx + ": expected an object of named fields");
  for (auto it = j.begin(); it != j.end(); ++it)
    out.insert({it.key(), parse_field(it.value(), ctx + "." + it.key())});
  return out;
}

std::vector<Region> parse_regions(const json& j,
                                  const std::map<std::string, ScalarField>& fields,
                                  const std::string& ctx) {
  if (!j.is_array() || j.empty())
    throw SchemaError(ctx + ": expected a nonempty array of regions");
  std::set<std::string> labels;
  std::vector<Region> regions;
  int idx = 0;
  for (const auto& rj : j) {
    const std::string rctx = ctx + "[" + std::to_string(idx) + "]";
    const std::string label =
        rj.contains("label") ? as_string(rj.at("label"), rctx + ".label")
                             : "r" + std::to_string(idx);
    if (!labels.insert(label).second)
      throw SchemaError(rctx + ": duplicate region label '" + label + "'");
    Region region;
    const json& cons = need(rj, "constraints", rctx);
    if (!cons.is_array()) throw SchemaError(rctx + ".constraints: expected an array");
    for (const auto& cj : cons) {
      const std::string fname = as_string(need(cj, "field", rctx), rctx + ".field");
      auto it = fields.find(fname);
      if (it == fields.end())
        throw SchemaError(rctx + ": unknown field '" + fname + "'");
      const std::string sign = as_string(need(cj, "sign", rctx), rctx + ".sign");
      if (sign == ">=0")
        region.constraints.push_back({it->second, Sign::NonNegative});
      else if (sign == "<=0")
        region.constraints.push_back({it->second, Sign::NonPositive});
      else
        throw SchemaError(rctx + ": sign must be '>=0' or '<=0'");
    }
    regions.push_back(std::move(region));
    ++idx;
  }
  return regions;
}

ProperPartition parse_partition(const json& j, int dim, const std::string& ctx) {
  std::map<std::string, ScalarField> fields;
  if (j.contains("fields")) fields = parse_fields(j.at("fields"), ctx + ".fields");
  return ProperPartition(dim, parse_regions(need(j, "regions", ctx), fields, ctx + ".regions"));
}

SwitchedSystem parse_system(const json& j, const std::string& ctx) {
  const json& modes_j = need(j, "modes", ctx);
  if (!modes_j.is_array() || modes_j.empty())
    throw SchemaError(ctx + ".modes: expected a nonempty array");
  std::vector<Mode> modes;
  int dim = 0;
  int input_dim = -1;
  int idx = 0;
  for (const auto& mj : modes_j) {
    const std::string mctx = ctx + ".modes[" + std::to_string(idx++) + "]";
    Mat a = as_mat(need(mj, "A", mctx), mctx + ".A");
    if (dim == 0) dim = a.rows;
    Mat b = mj.contains("B") ? as_mat(mj.at("B"), mctx + ".B") : Mat(a.rows, 0);
    if (input_dim < 0) input_dim = b.cols;
    if (mj.contains("b"))
      modes.push_back(Mode::affine(std::move(a), as_vec(mj.at("b"), mctx + ".b"),
                                   std::move(b)));
    else
      modes.push_back(Mode::linear(std::move(a), std::move(b)));
  }
  if (j.contains("input_dim")) input_dim = as_int(j.at("input_dim"), ctx + ".input_dim");
  return SwitchedSystem(parse_partition(j, dim, ctx), std::move(modes), input_dim);
}

SamplePlan parse_plan(const json& j, int dim, const std::string& ctx) {
  SamplePlan plan;
  plan.state_box.lo = as_vec(need(j, "box_lo", ctx), ctx + ".box_lo");
  plan.state_box.hi = as_vec(need(j, "box_hi", ctx), ctx + ".box_hi");
  if (plan.state_box.dim() != dim ||
      static_cast<int>(plan.state_box.hi.size()) != dim)
    throw SchemaError(ctx + ": box bounds must have the state dimension");
  plan.n_state = j.contains("n_state") ? as_int(j.at("n_state"), ctx + ".n_state") : 1;
  plan.n_input = j.contains("n_input") ? as_int(j.at("n_input"), ctx + ".n_input") : 1;
  if (j.contains("input_ball_radius"))
    plan.input_ball_radius = as_double(j.at("input_ball_radius"), ctx + ".input_ball_radius");
  plan.n_surface = j.contains("n_surface") ? as_int(j.at("n_surface"), ctx + ".n_surface") : 1;
  if (j.contains("surface_pairs")) {
    const json& pairs = j.at("surface_pairs");
    if (!pairs.is_array()) throw SchemaError(ctx + ".surface_pairs: expected an array");
    for (const auto& pj : pairs) {
      const Vec p = as_vec(pj, ctx + ".surface_pairs");
      if (p.size() != 2) throw SchemaError(ctx + ".surface_pairs: entries are [i, j]");
      plan.surface_pairs.push_back({static_cast<int>(p[0]), static_cast<int>(p[1])});
    }
  }
  if (j.contains("seed")) plan.seed = as_seed(j.at("seed"), ctx + ".seed");
  return plan;
}

PiecewiseC1Fn parse_piecewise(const json& j, const ProperPartition* fallback,
                              const std::string& ctx) {
  const json& pieces_j = need(j, "pieces", ctx);
  if (!pieces_j.is_array() || pieces_j.empty())
    throw SchemaError(ctx + ".pieces: expected a nonempty array of matrices");
  std::vector<Mat> pieces;
  for (const auto& pj : pieces_j) pieces.push_back(as_mat(pj, ctx + ".pieces"));
  if (j.contains("regions")) {
    const int dim = j.contains("dim") ? as_int(j.at("dim"), ctx + ".dim") : pieces.front().rows;
    return PiecewiseC1Fn::piecewise_quadratic(parse_partition(j, dim, ctx),
                                              std::move(pieces));
  }
  if (fallback == nullptr)
    throw SchemaError(ctx + ": needs its own regions (no system partition to reuse)");
  return PiecewiseC1Fn::piecewise_quadratic(*fallback, std::move(pieces));
}

ISSCertificate parse_certificate(const json& j, const ProperPartition* fallback,
                                 const std::string& ctx) {
  return ISSCertificate{as_candidate(parse_piecewise(j, fallback, ctx)),
                        parse_fn(need(j, "alpha_lo", ctx), ctx + ".alpha_lo"),
                        parse_fn(need(j, "alpha_hi", ctx), ctx + ".alpha_hi"),
                        parse_fn(need(j, "rho", ctx), ctx + ".rho"),
                        parse_fn(need(j, "gamma", ctx), ctx + ".gamma")};
}

SubsystemCertificate parse_subsystem(const json& j, const std::string& ctx) {
  ComparisonFn chi = j.contains("chi") ? parse_fn(j.at("chi"), ctx + ".chi")
                                       : ComparisonFn::linear(1.0);
  return SubsystemCertificate{parse_piecewise(j, nullptr, ctx),
                              parse_fn(need(j, "alpha_lo", ctx), ctx + ".alpha_lo"),
                              parse_fn(need(j, "alpha_hi", ctx), ctx + ".alpha_hi"),
                              parse_fn(need(j, "rho", ctx), ctx + ".rho"),
                              std::move(chi),
                              parse_fn(need(j, "gamma", ctx), ctx + ".gamma")};
}

InputSignal parse_input(const json& j, int input_dim, const std::string& ctx) {
  const std::string form = as_string(need(j, "form", ctx), ctx + ".form");
  if (form == "zero") return InputSignal::zero(input_dim);
  if (form == "constant")
    return InputSignal::constant(as_vec(need(j, "value", ctx), ctx + ".value"));
  if (form == "sinusoid")
    return InputSignal::sinusoid(as_vec(need(j, "amplitude", ctx), ctx + ".amplitude"),
                                 as_double(need(j, "omega", ctx), ctx + ".omega"),
                                 j.contains("phase") ? as_double(j.at("phase"), ctx) : 0.0);
  if (form == "piecewise_constant") {
    const json& vj = need(j, "values", ctx);
    if (!vj.is_array()) throw SchemaError(ctx + ".values: expected an array");
    std::vector<Vec> values;
    for (const auto& v : vj) values.push_back(as_vec(v, ctx + ".values"));
    return InputSignal::piecewise_constant(
        as_vec(need(j, "times", ctx), ctx + ".times"), std::move(values));
  }
  throw SchemaError(ctx + ": unknown input form '" + form + "'");
}

SimOptions parse_sim_options(const json& j, const std::string& ctx) {
  SimOptions opts;
  if (j.contains("dt_max")) opts.dt_max = as_double(j.at("dt_max"), ctx + ".dt_max");
  if (j.contains("event_tol")) opts.event_tol = as_double(j.at("event_tol"), ctx + ".event_tol");
  if (j.contains("state_bound"))
    opts.state_bound = as_double(j.at("state_bound"), ctx + ".state_bound");
  return opts;
}

LinearSwitchedPlant parse_plant(const json& j, const std::string& ctx) {
  return LinearSwitchedPlant::make(as_mat(need(j, "a1", ctx), ctx + ".a1"),
                                   as_mat(need(j, "a2", ctx), ctx + ".a2"),
                                   as_mat(need(j, "b", ctx), ctx + ".b"),
                                   as_mat(need(j, "c", ctx), ctx + ".c"),
                                   parse_field(need(j, "q", ctx), ctx + ".q"));
}

ControllerDesign parse_design(const json& j, const std::string& ctx) {
  ControllerDesign d;
  d.k = as_mat(need(j, "k", ctx), ctx + ".k");
  d.l1 = as_mat(need(j, "l1", ctx), ctx + ".l1");
  d.l2 = as_mat(need(j, "l2", ctx), ctx + ".l2");
  d.p1 = as_mat(need(j, "p1", ctx), ctx + ".p1");
  d.p2 = as_mat(need(j, "p2", ctx), ctx + ".p2");
  d.pe = as_mat(need(j, "pe", ctx), ctx + ".pe");
  d.mu1 = as_double(need(j, "mu1", ctx), ctx + ".mu1");
  d.mu2 = as_double(need(j, "mu2", ctx), ctx + ".mu2");
  d.mu12 = as_double(need(j, "mu12", ctx), ctx + ".mu12");
  d.mu21 = as_double(need(j, "mu21", ctx), ctx + ".mu21");
  d.mu_q = as_double(need(j, "mu_q", ctx), ctx + ".mu_q");
  d.a_x = as_double(need(j, "a_x", ctx), ctx + ".a_x");
  d.a_e = as_double(need(j, "a_e", ctx), ctx + ".a_e");
  if (j.contains("eps_share")) d.eps_share = as_double(j.at("eps_share"), ctx + ".eps_share");
  return d;
}

// ---------- report builders ----------

json vec_json(const Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

json condition_json(const ConditionStat& c) {
  json w;
  w["x"] = vec_json(c.worst.x);
  w["u"] = vec_json(c.worst.u);
  w["value"] = c.worst.value;
  w["bound"] = c.worst.bound;
  json iv;
  iv["empty"] = c.worst.interval.empty;
  if (!c.worst.interval.empty) {
    iv["lo"] = c.worst.interval.lo;
    iv["hi"] = c.worst.interval.hi;
  }
  w["interval"] = std::move(iv);
  json out;
  out["name"] = c.name;
  out["pass"] = c.pass;
  out["checked"] = c.checked;
  out["gated_out"] = c.gated_out;
  out["empty_intervals"] = c.empty_intervals;
  out["worst_margin"] = c.worst_margin;
  out["witness"] = std::move(w);
  return out;
}

json check_json(const CheckReport& r) {
  json out;
  out["pass"] = r.pass;
  out["total_samples"] = r.total_samples;
  json conds = json::array();
  for (const auto& c : r.conditions) conds.push_back(condition_json(c));
  out["conditions"] = std::move(conds);
  if (!std::isnan(r.terminal_residual)) out["terminal_residual"] = r.terminal_residual;
  return out;
}

json gains_json(const ClosedLoopGains& g) {
  json out;
  out["gamma_x_slope"] = g.gamma_x_slope;
  out["gamma_e_slope"] = g.gamma_e_slope;
  out["eta1_slope"] = g.eta1_slope;
  out["eta2_slope"] = g.eta2_slope;
  out["small_gain_value"] = g.small_gain_value;
  out["pass"] = g.pass;
  out["lambda_x_min"] = g.lambda_x_min;
  out["lambda_x_max"] = g.lambda_x_max;
  out["lambda_e_min"] = g.lambda_e_min;
  out["lambda_e_max"] = g.lambda_e_max;
  return out;
}

json sampled_fn(const ComparisonFn& f, const std::vector<double>& grid) {
  json a = json::array();
  for (double s : grid) a.push_back(f(s));
  return a;
}

// ---------- kind runners ----------

struct RunResult {
  bool pass = false;
  json body;
};

SwitchedVariant variant_from_name(const std::string& m) {
  if (m == "general") return SwitchedVariant::General;
  if (m == "aligned") return SwitchedVariant::Aligned;
  if (m == "clarke") return SwitchedVariant::Clarke;
  throw SchemaError("unknown check method '" + m + "'");
}

RunResult run_check(const json& sc) {
  SwitchedSystem sys = parse_system(need(sc, "system", "scenario"), "system");
  ISSCertificate cert =
      parse_certificate(need(sc, "certificate", "scenario"), &sys.partition(), "certificate");
  SamplePlan plan = parse_plan(need(sc, "plan", "scenario"), sys.dim(), "plan");
  const std::string method = as_string(need(sc, "method", "scenario"), "method");

  CheckReport r;
  if (method == "main")
    r = check_main_iss(sys, cert, plan);
  else if (method == "dissipation_state")
    r = check_dissipation(sys, cert, plan, DissipationForm::State);
  else if (method == "dissipation_level")
    r = check_dissipation(sys, cert, plan, DissipationForm::Level);
  else
    r = check_switched_iss(sys, cert, plan, variant_from_name(method));

  RunResult out;
  out.pass = r.pass;
  out.body["method"] = method;
  out.body["check"] = check_json(r);
  return out;
}

std::string sanitize_name(const std::string& name) {
  if (name.empty()) throw SchemaError("scenario name must not be empty");
  for (char ch : name)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_'))
      throw SchemaError("scenario name may use letters, digits, '-', '_'");
  return name;
}

std::string sanitize_filename(const std::string& name) {
  if (name.empty()) throw SchemaError("output filename must not be empty");
  for (char ch : name)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.'))
      throw SchemaError("output filename may use letters, digits, '-', '_', '.'");
  if (name.find("..") != std::string::npos)
    throw SchemaError("output filename must not contain '..'");
  return name;
}

RunResult run_simulate(const json& sc, const std::string& out_dir,
                       const std::string& name, std::string& csv_path) {
  SwitchedSystem sys = parse_system(need(sc, "system", "scenario"), "system");
  const json& sj = need(sc, "sim", "scenario");
  const Vec x0 = as_vec(need(sj, "x0", "sim"), "sim.x0");
  const double horizon = as_double(need(sj, "horizon", "sim"), "sim.horizon");
  InputSignal u = parse_input(need(sj, "input", "sim"), sys.input_dim(), "sim.input");
  SimOptions opts = parse_sim_options(sj, "sim");

  Trajectory traj = simulate(sys, x0, u, horizon, opts);

  // Largest drift off a surface while two regions stay active.
  double sliding_residual = 0.0;
  for (size_t r = 0; r < traj.t.size(); ++r) {
    if (traj.active[r].size() < 2) continue;
    try {
      SignConstraint surf = sys.partition().shared_surface(traj.active[r][0], traj.active[r][1]);
      sliding_residual = std::max(sliding_residual, std::abs(surf.field.value(traj.x[r])));
    } catch (const NoCrossingFound&) {
    }
  }

  const std::string csv_name = sc.contains("trajectory_csv")
                                   ? sanitize_filename(as_string(sc.at("trajectory_csv"), "trajectory_csv"))
                                   : name + "-trajectory.csv";
  std::filesystem::create_directories(out_dir);
  csv_path = (std::filesystem::path(out_dir) / csv_name).string();
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot open " + csv_path);
  write_trajectory_csv(traj, csv);
  if (!csv.good()) throw IoError("failed writing " + csv_path);

  json tj;
  tj["steps"] = static_cast<int>(traj.t.size());
  tj["t_end"] = traj.t.empty() ? 0.0 : traj.t.back();
  tj["x_end"] = vec_json(traj.x.empty() ? Vec{} : traj.x.back());
  tj["final_norm"] = traj.x.empty() ? 0.0 : norm2(traj.x.back());
  tj["complete"] = traj.complete;
  tj["max_sliding_residual"] = sliding_residual;
  json events = json::array();
  for (const auto& e : traj.events) {
    json ej;
    ej["t"] = e.t;
    ej["kind"] = e.kind;
    ej["from"] = e.from_region;
    ej["to"] = e.to_region;
    events.push_back(std::move(ej));
  }
  tj["events"] = std::move(events);
  json warnings = json::array();
  for (const auto& w : traj.warnings) warnings.push_back(w);
  tj["warnings"] = std::move(warnings);

  RunResult out;
  out.pass = traj.complete;
  out.body["trajectory"] = std::move(tj);
  out.body["csv"] = csv_name;

  if (sc.contains("certificate")) {
    ISSCertificate cert = parse_certificate(sc.at("certificate"), &sys.partition(), "certificate");
    const double margin_tol =
        sc.contains("margin_tol") ? as_double(sc.at("margin_tol"), "margin_tol") : 1e-6;
    CheckReport tr = trajectory_check(traj, u, cert, margin_tol);
    out.body["check"] = check_json(tr);
    out.pass = out.pass && tr.pass;
  }
  return out;
}

RunResult run_compose(const json& sc) {
  const std::string method = as_string(need(sc, "method", "scenario"), "method");
  SubsystemCertificate c1 = parse_subsystem(need(sc, "first", "scenario"), "first");
  SubsystemCertificate c2 = parse_subsystem(need(sc, "second", "scenario"), "second");

  CompositeLyapunov composite =
      method == "small_gain"
          ? small_gain_compose(c1, c2,
                               as_double(need(sc, "domain_max", "scenario"), "domain_max"))
      : method == "cascade"
          ? cascade_compose(c1, c2,
                            sc.contains("m_cap") ? as_double(sc.at("m_cap"), "m_cap") : 100.0)
          : throw SchemaError("unknown compose method '" + method + "'");

  const std::vector<double> grid = {0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  json derived;
  derived["grid"] = sampled_fn(ComparisonFn::linear(1.0), grid);
  derived["gamma"] = sampled_fn(composite.gamma, grid);
  derived["rho"] = sampled_fn(composite.rho, grid);
  derived["alpha_lo"] = sampled_fn(composite.alpha_lo, grid);
  derived["alpha_hi"] = sampled_fn(composite.alpha_hi, grid);
  if (composite.kind == CompositeLyapunov::Kind::MaxSmallGain) {
    derived["sigma"] = sampled_fn(composite.sigma, grid);
  } else {
    derived["nu"] = sampled_fn(composite.nu, grid);
    derived["ell"] = sampled_fn(composite.ell, grid);
  }

  RunResult out;
  out.pass = true;
  out.body["method"] = method;
  out.body["derived"] = std::move(derived);

  if (sc.contains("system")) {
    SwitchedSystem sys = parse_system(sc.at("system"), "system");
    SamplePlan plan = parse_plan(need(sc, "plan", "scenario"), sys.dim(), "plan");
    const std::string form_name =
        sc.contains("form") ? as_string(sc.at("form"), "form") : "level";
    DissipationForm form;
    if (form_name == "level")
      form = DissipationForm::Level;
    else if (form_name == "state")
      form = DissipationForm::State;
    else
      throw SchemaError("form must be 'level' or 'state'");
    CheckReport r = check_dissipation(sys, composite_certificate(composite), plan, form);
    out.body["check"] = check_json(r);
    out.pass = r.pass;
  }
  return out;
}

RunResult run_lmi(const json& sc) {
  LinearSwitchedPlant plant = parse_plant(need(sc, "plant", "scenario"), "plant");
  ControllerDesign design = parse_design(need(sc, "design", "scenario"), "design");
  const double tol = sc.contains("tol") ? as_double(sc.at("tol"), "tol") : 1e-8;

  CheckReport rp = verify_plant_lmis(plant, design, tol);
  CheckReport ro = verify_observer_lmis(plant, design, tol);
  RunResult out;
  out.body["plant"] = check_json(rp);
  out.body["observer"] = check_json(ro);
  out.pass = rp.pass && ro.pass;
  if (out.pass) {
    ClosedLoopGains g = closed_loop_gains(plant, design);
    out.body["gains"] = gains_json(g);
    out.pass = g.pass;
  }
  return out;
}

RunResult run_flower(const json& sc) {
  FlowerInstance fl = flower_instance(as_double(need(sc, "a1", "scenario"), "a1"),
                                      as_double(need(sc, "a2", "scenario"), "a2"),
                                      as_double(need(sc, "eps", "scenario"), "eps"),
                                      as_mat(need(sc, "b", "scenario"), "b"));
  SwitchedSystem sys = plant_system(fl.plant);
  SamplePlan plan = parse_plan(need(sc, "plan", "scenario"), sys.dim(), "plan");
  CheckReport r = check_switched_iss(sys, fl.certificate, plan, SwitchedVariant::Aligned);

  RunResult out;
  out.pass = r.pass;
  out.body["threshold_slope"] = fl.threshold_slope;
  out.body["b_slope"] = fl.b_slope;
  out.body["check"] = check_json(r);
  return out;
}

RunResult run_closed_loop(const json& sc) {
  LinearSwitchedPlant plant = parse_plant(need(sc, "plant", "scenario"), "plant");
  ControllerDesign design = parse_design(need(sc, "design", "scenario"), "design");
  const double tol = sc.contains("tol") ? as_double(sc.at("tol"), "tol") : 1e-8;

  CheckReport rp = verify_plant_lmis(plant, design, tol);
  CheckReport ro = verify_observer_lmis(plant, design, tol);
  if (!(rp.pass && ro.pass)) {
    RunResult out;
    out.body["plant"] = check_json(rp);
    out.body["observer"] = check_json(ro);
    out.pass = false;
    return out;
  }
  ClosedLoopGains g = closed_loop_gains(plant, design);
  SwitchedSystem loop = build_closed_loop(plant, design);

  const json& sj = need(sc, "sims", "scenario");
  const int count = as_int(need(sj, "count", "sims"), "sims.count");
  const double radius = as_double(need(sj, "radius", "sims"), "sims.radius");
  const double horizon = as_double(need(sj, "horizon", "sims"), "sims.horizon");
  const double bound = sj.contains("terminal_bound")
                           ? as_double(sj.at("terminal_bound"), "sims.terminal_bound")
                           : std::numeric_limits<double>::infinity();
  SimOptions opts = parse_sim_options(sj, "sims");
  const uint64_t seed = sj.contains("seed") ? as_seed(sj.at("seed"), "sims.seed") : 0;

  const int n = plant.dim();
  Rng rng(seed);
  double max_terminal = 0.0;
  bool all_complete = true;
  for (int k = 0; k < count; ++k) {
    const Vec x0 = rng.in_ball(n, radius);
    const Vec z0 = rng.in_ball(n, radius);
    Trajectory traj = simulate(loop, concat(x0, sub(x0, z0)), InputSignal::zero(0),
                               horizon, opts);
    all_complete = all_complete && traj.complete;
    if (traj.x.empty()) continue;
    const Vec& xe = traj.x.back();
    Vec xs(xe.begin(), xe.begin() + n);
    Vec es(xe.begin() + n, xe.end());
    max_terminal = std::max(max_terminal, norm2(xs) + norm2(es));
  }

  RunResult out;
  out.body["plant"] = check_json(rp);
  out.body["observer"] = check_json(ro);
  out.body["gains"] = gains_json(g);
  json sims;
  sims["count"] = count;
  sims["radius"] = radius;
  sims["horizon"] = horizon;
  sims["all_complete"] = all_complete;
  sims["max_terminal"] = max_terminal;
  sims["terminal_bound"] = bound;
  out.body["sims"] = std::move(sims);
  out.pass = rp.pass && ro.pass && g.pass && all_complete && max_terminal <= bound;
  return out;
}

void override_seeds(json& j, uint64_t seed) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "seed")
        it.value() = seed;
      else
        override_seeds(it.value(), seed);
    }
  } else if (j.is_array()) {
    for (auto& v : j) override_seeds(v, seed);
  }
}

}  // namespace

std::string canonical_json(const json& j) {
  std::string out;
  write_node(j, out, 0);
  out += "\n";
  return out;
}

void write_canonical_json(const json& j, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path);
  const std::string text = canonical_json(j);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os.good()) throw IoError("failed writing " + path);
}

std::vector<std::string> builtin_scenario_names() {
  return {"flower", "sign1d", "cascade-linear", "closed-loop-fixture"};
}

nlohmann::json builtin_scenario(const std::string& name) {
  if (name == "flower")
    return json::parse(R"({
      "kind": "flower",
      "name": "flower",
      "a1": 1.0, "a2": 5.0, "eps": 0.1,
      "b": [[1.0, 0.0], [0.0, 1.0]],
      "plan": {
        "box_lo": [-5.0, -5.0], "box_hi": [5.0, 5.0],
        "n_state": 5000, "n_input": 1, "input_ball_radius": 1.0,
        "surface_pairs": [[0, 1]], "n_surface": 1000, "seed": 91
      }
    })");
  if (name == "sign1d")
    return json::parse(R"({
      "kind": "simulate",
      "name": "sign1d",
      "system": {
        "fields": {"s": {"form": "linear", "v": [1.0]}},
        "regions": [
          {"label": "pos", "constraints": [{"field": "s", "sign": ">=0"}]},
          {"label": "neg", "constraints": [{"field": "s", "sign": "<=0"}]}
        ],
        "modes": [{"A": [[0.0]], "b": [-1.0]}, {"A": [[0.0]], "b": [1.0]}],
        "input_dim": 0
      },
      "sim": {
        "x0": [1.0], "horizon": 2.0, "input": {"form": "zero"},
        "dt_max": 0.01, "event_tol": 1e-9, "state_bound": 1e6
      }
    })");
  if (name == "cascade-linear")
    return json::parse(R"({
      "kind": "compose",
      "name": "cascade-linear",
      "method": "cascade",
      "m_cap": 10.0,
      "first": {
        "dim": 1,
        "regions": [{"label": "all", "constraints": []}],
        "pieces": [[[1.0]]],
        "alpha_lo": {"form": "power", "c": 1.0, "p": 2.0},
        "alpha_hi": {"form": "power", "c": 1.0, "p": 2.0},
        "rho": {"form": "linear", "c": 1.0},
        "chi": {"form": "linear", "c": 1.0},
        "gamma": {"form": "linear", "c": 1.0}
      },
      "second": {
        "dim": 1,
        "regions": [{"label": "all", "constraints": []}],
        "pieces": [[[1.0]]],
        "alpha_lo": {"form": "power", "c": 1.0, "p": 2.0},
        "alpha_hi": {"form": "power", "c": 1.0, "p": 2.0},
        "rho": {"form": "linear", "c": 2.0},
        "gamma": {"form": "linear", "c": 1.0}
      },
      "system": {
        "regions": [{"label": "all", "constraints": []}],
        "modes": [{"A": [[-1.0, 1.0], [0.0, -1.0]], "B": [[0.5], [0.5]]}],
        "input_dim": 1
      },
      "plan": {
        "box_lo": [-3.0, -3.0], "box_hi": [3.0, 3.0],
        "n_state": 10000, "n_input": 1, "input_ball_radius": 1.0, "seed": 17
      },
      "form": "level"
    })");
  if (name == "closed-loop-fixture")
    return json::parse(R"({
      "kind": "closed_loop",
      "name": "closed-loop-fixture",
      "plant": {
        "a1": [[-0.5, 1.0], [-1.2, -0.5]],
        "a2": [[-0.5, 1.2], [-1.0, -0.5]],
        "b": [[0.0], [1.0]],
        "c": [[1.0, 0.0], [0.0, 1.0]],
        "q": {"form": "quadratic", "m": [[-1.0, 0.0], [0.0, 1.0]]}
      },
      "design": {
        "k": [[-0.02, -0.02]],
        "l1": [[0.0, 1.0], [-1.2, 0.0]],
        "l2": [[0.0, 1.2], [-1.0, 0.0]],
        "p1": [[1.2, 0.0], [0.0, 1.0]],
        "p2": [[1.0, 0.0], [0.0, 1.2]],
        "pe": [[1.0, 0.0], [0.0, 1.0]],
        "mu1": 0.0, "mu2": 0.0, "mu12": -0.1, "mu21": 0.1, "mu_q": -0.2,
        "a_x": 0.3, "a_e": 0.5
      },
      "tol": 1e-8,
      "sims": {
        "count": 100, "radius": 1.0, "horizon": 60.0,
        "dt_max": 0.005, "event_tol": 1e-9,
        "seed": 5, "terminal_bound": 1e-3
      }
    })");
  throw SchemaError("unknown builtin scenario '" + name + "'");
}

ScenarioOutcome run_scenario_json(const nlohmann::json& scenario,
                                  const std::string& out_dir,
                                  std::optional<uint64_t> seed) {
  ScenarioOutcome outcome;
  try {
    json sc = scenario;
    if (seed) override_seeds(sc, *seed);
    const std::string kind = as_string(need(sc, "kind", "scenario"), "kind");
    const std::string name =
        sanitize_name(sc.contains("name") ? as_string(sc.at("name"), "name") : kind);

    RunResult result;
    std::string csv_path;
    if (kind == "check")
      result = run_check(sc);
    else if (kind == "simulate")
      result = run_simulate(sc, out_dir, name, csv_path);
    else if (kind == "compose")
      result = run_compose(sc);
    else if (kind == "lmi")
      result = run_lmi(sc);
    else if (kind == "flower")
      result = run_flower(sc);
    else if (kind == "closed_loop")
      result = run_closed_loop(sc);
    else
      throw SchemaError("unknown scenario kind '" + kind + "'");

    json report = std::move(result.body);
    report["kind"] = kind;
    report["name"] = name;
    report["pass"] = result.pass;

    const std::string report_path =
        (std::filesystem::path(out_dir) / (name + "-report.json")).string();
    write_canonical_json(report, report_path);

    outcome.exit_code = result.pass ? 0 : 1;
    outcome.report = std::move(report);
    outcome.report_path = report_path;
    outcome.csv_path = csv_path;
  } catch (const json::exception& e) {
    outcome.exit_code = 2;
    outcome.diagnostic = std::string("invalid scenario JSON: ") + e.what();
  } catch (const Error& e) {
    outcome.exit_code = 2;
    outcome.diagnostic = e.what();
  }
  return outcome;
}

json load_scenario(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    const auto names = builtin_scenario_names();
    if (std::find(names.begin(), names.end(), path) != names.end())
      return builtin_scenario(path);
    throw SchemaError("no such scenario file or builtin: " + path);
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SchemaError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("parse error in ") + path + ": " + e.what());
  }
}

ScenarioOutcome run_scenario(const std::string& path, const std::string& out_dir,
                             std::optional<uint64_t> seed) {
  json sc;
  try {
    sc = load_scenario(path);
  } catch (const Error& e) {
    ScenarioOutcome outcome;
    outcome.exit_code = 2;
    outcome.diagnostic = e.what();
    return outcome;
  }
  return run_scenario_json(sc, out_dir, seed);
}

}  // namespace nsiss
