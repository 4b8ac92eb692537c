#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "roughkit/constants.hpp"
#include "roughkit/fbundle.hpp"
#include "roughkit/flow_rpde.hpp"
#include "roughkit/nonlinear_integral.hpp"
#include "roughkit/parallel.hpp"
#include "roughkit/rde.hpp"
#include "suite.hpp"

namespace roughkit::cli {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string join(const std::vector<std::string>& v, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

// Schema checker that keeps going after the first violation.
class Checker {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& msg) { errors.push_back(msg); }

  void keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key())) fail(where + ": unknown key '" + it.key() + "'");
  }

  bool object(const json& parent, const std::string& key, const std::string& where) {
    if (!parent.contains(key)) return false;
    if (!parent[key].is_object()) {
      fail(where + key + ": expected an object");
      return false;
    }
    return true;
  }

  void number(const json& obj, const std::string& key, const std::string& where, double& out) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number()) return fail(where + key + ": expected a number");
    out = obj[key].get<double>();
    if (!std::isfinite(out)) fail(where + key + ": must be finite");
  }

  void integer(const json& obj, const std::string& key, const std::string& where, int& out, int lo, int hi) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number_integer()) return fail(where + key + ": expected an integer");
    out = obj[key].get<int>();
    if (out < lo || out > hi) fail(where + key + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }

  void boolean(const json& obj, const std::string& key, const std::string& where, bool& out) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_boolean()) return fail(where + key + ": expected true or false");
    out = obj[key].get<bool>();
  }

  void string(const json& obj, const std::string& key, const std::string& where, std::string& out) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_string()) return fail(where + key + ": expected a string");
    out = obj[key].get<std::string>();
  }

  bool numbers(const json& v, const std::string& what, std::vector<double>& out) {
    if (!v.is_array()) {
      fail(what + ": expected an array of numbers");
      return false;
    }
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) {
        fail(what + ": expected an array of numbers");
        return false;
      }
      out.push_back(e.get<double>());
    }
    return true;
  }
};

struct ParamKeys {
  std::set<std::string> keys;
};

const std::map<std::string, ParamKeys>& driver_schema() {
  static const std::map<std::string, ParamKeys> s{
      {"exponential", {{"a", "dim"}}},
      {"pure_area", {{"a"}}},
      {"exp_product", {{"dim", "amplitude", "frequency", "phase", "area", "refine"}}},
      {"rotation", {{"radius", "area", "refine"}}},
      {"matrix_linear", {{"amplitude", "frequency", "phase", "area", "refine"}}},
      {"zero", {{"dim"}}},
  };
  return s;
}

std::size_t driver_dim(const RunConfig& c) {
  const json& p = c.driver_params;
  if (c.driver_kind == "exponential" || c.driver_kind == "exp_product" || c.driver_kind == "zero")
    return p.contains("dim") && p["dim"].is_number_integer() ? p["dim"].get<std::size_t>() : 1;
  return 2;
}

void check_driver(Checker& ck, RunConfig& c, const json& d) {
  if (!d.contains("kind") || !d["kind"].is_string()) {
    ck.fail("driver.kind: required, one of " + join(kDriverKinds));
    return;
  }
  c.driver_kind = d["kind"].get<std::string>();
  const auto& schema = driver_schema();
  const auto it = schema.find(c.driver_kind);
  if (it == schema.end()) {
    ck.fail("driver.kind: unknown kind '" + c.driver_kind + "'; catalog: " + join(kDriverKinds));
    return;
  }
  // parameters either under "params" or inline next to "kind"
  json params = json::object();
  for (auto e = d.begin(); e != d.end(); ++e)
    if (e.key() != "kind" && e.key() != "params") params[e.key()] = e.value();
  if (d.contains("params")) {
    if (!d["params"].is_object())
      ck.fail("driver.params: expected an object");
    else
      for (auto e = d["params"].begin(); e != d["params"].end(); ++e) params[e.key()] = e.value();
  }
  ck.keys(params, "driver (" + c.driver_kind + ")", it->second.keys);
  for (auto e = params.begin(); e != params.end(); ++e) {
    const std::string& k = e.key();
    if (!it->second.keys.count(k)) continue;
    const std::string where = "driver." + k;
    if (k == "dim" || k == "refine") {
      int v = 0;
      ck.integer(params, k, "driver.", v, k == "dim" ? 1 : 0, k == "dim" ? static_cast<int>(kMaxDim) : 8);
    } else if (k == "amplitude" && c.driver_kind == "matrix_linear") {
      std::vector<double> a;
      if (ck.numbers(e.value(), where, a) && a.size() != 2) ck.fail(where + ": expected 2 entries");
    } else {
      double v = 0.0;
      ck.number(params, k, "driver.", v);
      if ((k == "radius" || k == "frequency") && v <= 0.0 && e.value().is_number()) ck.fail(where + ": must be positive");
    }
  }
  c.driver_params = params;
}

template <class T>
T param(const json& p, const char* key, T fallback) {
  return p.contains(key) ? p[key].get<T>() : fallback;
}

Vec to_vec(const std::vector<double>& v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<Eigen::Index>(i)] = v[i];
  return x;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Mat antisym(double a) {
  Mat A(2, 2);
  A << 0.0, a, -a, 0.0;
  return A;
}

// W(t, x) = a t x componentwise in d dimensions
SmoothField exponential_field(double a, std::size_t d) {
  SmoothField W;
  W.dim = d;
  W.value = [a, d](double t, const Vec& x, int k) -> Tensor {
    Tensor out(static_cast<std::size_t>(std::pow(d, k + 1)), 0.0);
    if (k == 0)
      for (std::size_t i = 0; i < d; ++i) out[i] = a * t * x[static_cast<Eigen::Index>(i)];
    if (k == 1)
      for (std::size_t i = 0; i < d; ++i) out[i * d + i] = a * t;
    return out;
  };
  W.rate = [a, d](double, const Vec& x, int k) -> Tensor {
    Tensor out(static_cast<std::size_t>(std::pow(d, k + 1)), 0.0);
    if (k == 0)
      for (std::size_t i = 0; i < d; ++i) out[i] = a * x[static_cast<Eigen::Index>(i)];
    if (k == 1)
      for (std::size_t i = 0; i < d; ++i) out[i * d + i] = a;
    return out;
  };
  return W;
}

std::vector<Mat> planar_B() {
  Mat B1(2, 2), B2(2, 2);
  B1 << 0.5, 0.2, -0.3, 0.4;
  B2 << -0.2, 0.5, 0.4, 0.1;
  return {B1, B2};
}

AnalysisParams analysis_params(const RunConfig& c) {
  AnalysisParams p;
  p.alpha = c.alpha;
  p.T = c.T;
  p.beta = c.beta;
  return p;
}

Vec initial_value(const RunConfig& c, std::size_t dim) {
  if (c.xi.empty()) return zeros(dim);
  require(c.xi.size() == dim, "rde.xi: has " + std::to_string(c.xi.size()) + " entries, driver dimension is " + std::to_string(dim));
  return to_vec(c.xi);
}

// ---------------------------------------------------------------- output

class Output {
 public:
  explicit Output(const RunConfig& c) : cfg_(c) {
    if (c.write_csv || c.write_json) std::filesystem::create_directories(c.output_dir);
  }

  void table(const std::string& name, const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    if (!cfg_.write_csv) return;
    std::ofstream f(std::filesystem::path(cfg_.output_dir) / (name + ".csv"), std::ios::binary);
    f << join(header, ",") << '\n';
    for (const auto& r : rows) f << join(r, ",") << '\n';
    files_.push_back(name + ".csv");
  }

  void summary(json s) {
    s["outputs"] = files_;
    if (!cfg_.write_json) return;
    std::ofstream f(std::filesystem::path(cfg_.output_dir) / (cfg_.command + "_summary.json"), std::ios::binary);
    f << s.dump(2) << '\n';
  }

 private:
  const RunConfig& cfg_;
  std::vector<std::string> files_;
};

json constants_json(const ConstantsReport& c) {
  return {{"k_alpha", c.k_alpha}, {"C1", c.C1},       {"h1", c.h1},         {"h2", c.h2},
          {"C6", c.C6},           {"C7", c.C7},       {"K0", c.K0},         {"gamma1", c.gamma1},
          {"gamma2", c.gamma2},   {"hypothesis_value", c.hypothesis_value}, {"hypothesis_H_holds", c.hypothesis_H_holds},
          {"driver_norm", c.driver_norm}, {"xi_norm", c.xi_norm}};
}

json base_summary(const RunConfig& c, const BuiltDriver& d, const ConstantsReport& k) {
  return {{"command", c.command},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"T", c.T},
          {"level", c.level},
          {"driver", {{"kind", c.driver_kind}, {"params", c.driver_params}, {"dim", d.dim}}},
          {"constants", constants_json(k)}};
}

std::vector<std::string> path_row(double t, const Vec& v) {
  std::vector<std::string> r{format_number(t)};
  for (Eigen::Index i = 0; i < v.size(); ++i) r.push_back(format_number(v[i]));
  return r;
}

std::vector<std::string> indexed(const std::string& stem, std::size_t n) {
  std::vector<std::string> h;
  for (std::size_t i = 0; i < n; ++i) h.push_back(stem + std::to_string(i + 1));
  return h;
}

NLControlledPath frozen_start(const DriverPtr& drv, const Vec& c) {
  const TimeGrid& g = drv->grid();
  SampledPath Y(g, drv->dim()), Yd(g, drv->dim());
  for (std::size_t k = 0; k < g.size(); ++k) {
    Y.set(k, k == 0 ? zeros(drv->dim()) : drv->W(0, k, c));
    Yd.set(k, c);
  }
  return make_nl_controlled(drv, Y, Yd);
}

RDEOptions rde_options(const RunConfig& c, double norm) {
  RDEOptions o;
  o.mode = parse_rde_mode(c.rde_mode);
  o.params = analysis_params(c);
  o.global = c.rde_global;
  o.driver_norm = norm;
  return o;
}

SpatialGrid spatial_grid(const RunConfig& c, std::size_t dim) {
  Vec lo = c.grid_lo.empty() ? Vec(-Vec::Ones(static_cast<Eigen::Index>(dim))) : to_vec(c.grid_lo);
  Vec hi = c.grid_hi.empty() ? Vec(Vec::Ones(static_cast<Eigen::Index>(dim))) : to_vec(c.grid_hi);
  require(static_cast<std::size_t>(lo.size()) == dim && static_cast<std::size_t>(hi.size()) == dim,
          "flow.spatial_grid: bounds must have the driver dimension " + std::to_string(dim));
  return make_spatial_grid(lo, hi, c.grid_count);
}

SmoothMap initial_condition(const std::string& name, std::size_t dim) {
  if (name == "square") {
    require(dim == 1, "rpde.h: 'square' acts on one dimension");
    return square_map();
  }
  if (name == "identity") return identity_map(dim);
  if (name == "exp") return exp_map(dim);
  throw ValidationError("rpde.h: unknown initial condition '" + name + "'; choose square, identity or exp");
}

// ---------------------------------------------------------------- commands

int cmd_lift(const RunConfig& c, const BuiltDriver& d, json s, Output& out) {
  require(d.rough_path.has_value(), "lift: driver kind '" + c.driver_kind + "' has no rough path; use a composition kind");
  const RoughPath& rp = *d.rough_path;
  const auto chen = chen_residual(rp);
  const std::size_t n = rp.dim();
  std::vector<std::string> header{"t"};
  for (auto& h : indexed("X", n)) header.push_back(h);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) header.push_back("XX" + std::to_string(a + 1) + std::to_string(b + 1));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < rp.grid().size(); ++k) {
    auto r = path_row(rp.grid().times[k], rp.X(k));
    const Mat XX = k == 0 ? zeros(n, n) : rp.XX(0, k);
    for (Eigen::Index a = 0; a < XX.rows(); ++a)
      for (Eigen::Index b = 0; b < XX.cols(); ++b) r.push_back(format_number(XX(a, b)));
    rows.push_back(std::move(r));
  }
  out.table("lift", header, rows);
  s["lift"] = {{"kind", to_string(rp.provenance())},
               {"chen_residual", chen.residual},
               {"chen_scale", chen.scale},
               {"chen_triples", chen.triples},
               {"chen_ok", chen.residual <= 1e-10 * chen.scale},
               {"holder_X", holder_seminorm(rp.path(), c.alpha)},
               {"holder_XX", holder_seminorm(rp.second_level(), 2 * c.alpha)}};
  out.summary(s);
  return 0;
}

SmoothCurve scaled_cosine(int n) {
  SmoothCurve cv;
  const double w = 2.0 * M_PI * n * n;
  cv.value = [n, w](double t) { Vec v(1); v << std::cos(w * t) / n; return v; };
  cv.deriv = [n, w](double t) { Vec v(1); v << -w * std::sin(w * t) / n; return v; };
  return cv;
}

int cmd_young(const RunConfig& c, json s, Output& out) {
  const TimeGrid g = make_grid(1.0, 0);
  std::vector<std::vector<std::string>> rows;
  std::vector<double> gaps;
  for (int n = 1; n <= c.young_n_max; ++n) {
    const SmoothField W = field_from_bundle(exp_product_bundle(1), scaled_cosine(n));
    const double w = 2.0 * M_PI * n * n;
    YoungOptions opt;
    opt.extra_levels = 8;
    opt.max_extra = 22;
    const double I = nl_young_integral(W, [n, w](double t) { Vec v(1); v << std::sin(w * t) / n; return v; }, g, opt).I.at(1)[0];
    rows.push_back({std::to_string(n), format_number(I), format_number(I + M_PI)});
    gaps.push_back(std::abs(I + M_PI));
  }
  out.table("young", {"n", "I_n", "I_n+pi"}, rows);
  bool monotone = true;
  for (std::size_t k = 1; k < gaps.size(); ++k) monotone = monotone && gaps[k] < gaps[k - 1];
  s["young"] = {{"n_max", c.young_n_max}, {"limit", -M_PI}, {"last_gap", gaps.back()}, {"monotone", monotone}};
  out.summary(s);
  return 0;
}

int cmd_integrate(const RunConfig& c, const BuiltDriver& d, json s, Output& out) {
  const Vec xi = initial_value(c, d.dim);
  const AnalysisParams p = analysis_params(c);
  const auto res = nl_rough_integral(frozen_start(d.driver, xi), p);
  std::vector<std::string> header{"t"};
  for (auto& h : indexed("Z", d.dim)) header.push_back(h);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < res.Z.Y.size(); ++k) rows.push_back(path_row(res.Z.Y.grid.times[k], res.Z.Y.at(k)));
  out.table("integrate", header, rows);
  const auto& r = res.report;
  s["nonlinear"] = {{"C1", r.C1},
                    {"violations", r.violations},
                    {"bound_holds", r.bound_holds},
                    {"sewing_observed_C", r.sew.observed_C},
                    {"sewing_constant", r.sew.sewing_const},
                    {"sewing_violations", r.sew.violations},
                    {"max_ratio", r.sew.max_ratio},
                    {"remainder", r.R_out},
                    {"remainder_bound", r.R_out_bound},
                    {"remainder_holds", r.remainder_holds},
                    {"driver_norm", r.driver_norms.total}};
  if (d.rough_path) {
    const auto lin = rough_integral(identity_controlled(*d.rough_path), *d.rough_path, c.alpha);
    s["linear"] = {{"integral", "X dX"},
                   {"bound_C", lin.report.bound_C},
                   {"violations", lin.report.violations},
                   {"bound_holds", lin.report.bound_holds},
                   {"sewing_violations", lin.report.sew.violations}};
  }
  out.summary(s);
  return 0;
}

int cmd_rde(const RunConfig& c, const BuiltDriver& d, double norm, json s, Output& out) {
  const Vec xi = initial_value(c, d.dim);
  const auto sol = solve_rde(d.driver, xi, rde_options(c, norm));
  std::vector<std::string> header{"t"};
  for (auto& h : indexed("Y", d.dim)) header.push_back(h);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < sol.Y.Y.size(); ++k) rows.push_back(path_row(sol.Y.Y.grid.times[k], sol.Y.Y.at(k)));
  out.table("rde", header, rows);
  const auto ap = apriori_report(sol, analysis_params(c), xi);
  json windows = json::array();
  for (const auto& w : sol.diag.windows) {
    double worst = 0.0;
    for (double f : w.factors) worst = std::max(worst, f);
    windows.push_back({{"start", w.i0}, {"end", w.i1}, {"iterations", w.iterations}, {"max_factor", worst}, {"harmonic_ok", w.harmonic_ok}});
  }
  s["rde"] = {{"mode", c.rde_mode},
              {"xi", to_std(xi)},
              {"holder_norm", sol.diag.holder_norm},
              {"self_consistency", sol.diag.self_consistency},
              {"last_index", sol.diag.last_index},
              {"warning", sol.diag.warning},
              {"windows", windows},
              {"apriori", {{"local_norm", ap.local_norm},
                           {"local_bound", ap.local_bound},
                           {"local_holds", ap.local_holds},
                           {"global_norm", ap.global_norm},
                           {"global_bound", ap.global_bound},
                           {"global_holds", ap.global_holds}}}};
  s["constants"] = constants_json(sol.diag.constants);
  out.summary(s);
  return 0;
}

int cmd_flow(const RunConfig& c, const BuiltDriver& d, double norm, json s, Output& out) {
  FlowOptions fo;
  fo.rde = rde_options(c, norm);
  fo.rde.mode = RDEMode::onestep;
  fo.second_derivatives = true;
  auto flow = solve_flow(d.driver, spatial_grid(c, d.dim), fo);
  jacobians(flow);
  const std::size_t last = flow.times() - 1;
  // round trip through the inverse; points whose inverse path leaves the grid are skipped
  std::vector<double> rt(flow.space.size(), std::nan(""));
  int iterations = 0;
  double expansion = 0.0;
  std::size_t inverted = 0;
  for (std::size_t p = 0; p < flow.space.size(); ++p) {
    const Vec y = flow.Y[p].at(last);
    if (!flow.space.contains(y)) continue;
    try {
      const InverseFlow inv = invert_flow(flow, {y}, last);
      rt[p] = (inv.Z[0] - flow.space.point(p)).norm();
      iterations = std::max(iterations, inv.max_iterations);
      expansion = std::max(expansion, inv.zst2_constant);
      ++inverted;
    } catch (const ConvergenceError&) {
    }
  }
  std::vector<std::string> header{"point"};
  for (auto& h : indexed("x", d.dim)) header.push_back(h);
  for (auto& h : indexed("Y_T", d.dim)) header.push_back(h);
  for (std::size_t a = 0; a < d.dim; ++a)
    for (std::size_t b = 0; b < d.dim; ++b) header.push_back("DY" + std::to_string(a + 1) + std::to_string(b + 1));
  header.push_back("product_gap");
  header.push_back("round_trip");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t p = 0; p < flow.space.size(); ++p) {
    std::vector<std::string> r{std::to_string(p)};
    const Vec x = flow.space.point(p), y = flow.Y[p].at(last);
    for (Eigen::Index i = 0; i < x.size(); ++i) r.push_back(format_number(x[i]));
    for (Eigen::Index i = 0; i < y.size(); ++i) r.push_back(format_number(y[i]));
    const Mat& J = flow.jac[p].DY[last];
    for (Eigen::Index a = 0; a < J.rows(); ++a)
      for (Eigen::Index b = 0; b < J.cols(); ++b) r.push_back(format_number(J(a, b)));
    r.push_back(format_number((J * flow.jac[p].M[last] - Mat::Identity(J.rows(), J.cols())).norm()));
    r.push_back(format_number(rt[p]));
    rows.push_back(std::move(r));
  }
  out.table("flow", header, rows);
  double worst_rt = 0.0;
  for (double v : rt)
    if (!std::isnan(v)) worst_rt = std::max(worst_rt, v);
  s["flow"] = {{"points", flow.space.size()},
               {"product_gap", flow.product_gap},
               {"printed_inverse_gap", flow.printed_gap},
               {"symmetric_inverse_gap", flow.symmetric_gap},
               {"round_trip_points", inverted},
               {"round_trip", worst_rt},
               {"newton_iterations", iterations},
               {"second_order_expansion_constant", expansion}};
  out.summary(s);
  return 0;
}

int cmd_rpde(const RunConfig& c, const BuiltDriver& d, double norm, json s, Output& out) {
  FlowOptions fo;
  fo.rde = rde_options(c, norm);
  fo.rde.mode = RDEMode::onestep;
  fo.second_derivatives = true;
  auto flow = solve_flow(d.driver, spatial_grid(c, d.dim), fo);
  jacobians(flow);
  std::vector<Vec> queries;
  for (const auto& qv : c.queries) {
    require(qv.size() == d.dim, "rpde.queries: every query needs " + std::to_string(d.dim) + " entries");
    queries.push_back(to_vec(qv));
  }
  if (queries.empty()) queries.push_back(0.5 * (flow.space.lo + flow.space.hi));
  const SmoothMap h = initial_condition(c.rpde_h, d.dim);
  const auto sol = rpde_solution(h, flow, queries);
  const auto res = rpde_residual(sol);
  std::vector<std::string> header{"query", "t"};
  for (auto& x : indexed("Z", d.dim)) header.push_back(x);
  for (auto& x : indexed("u", h.out_dim)) header.push_back(x);
  header.push_back("defect");
  std::vector<std::vector<std::string>> rows;
  const auto& t = flow.driver->grid().times;
  for (std::size_t q = 0; q < queries.size(); ++q)
    for (std::size_t k = 0; k < flow.times(); ++k) {
      std::vector<std::string> r{std::to_string(q), format_number(t[k])};
      for (Eigen::Index i = 0; i < sol.Z[q][k].size(); ++i) r.push_back(format_number(sol.Z[q][k][i]));
      for (Eigen::Index i = 0; i < sol.u[q][k].size(); ++i) r.push_back(format_number(sol.u[q][k][i]));
      r.push_back(format_number(res.defect_path[q][k]));
      rows.push_back(std::move(r));
    }
  out.table("rpde", header, rows);
  s["rpde"] = {{"h", c.rpde_h},
               {"queries", queries.size()},
               {"rough_integral", res.rough_integral},
               {"bracket_DW_W", res.bracket_DW_W},
               {"bracket_W_DW", res.bracket_W_DW},
               {"bracket_W", res.bracket_W},
               {"defect", res.defect},
               {"naive_defect", res.naive_defect},
               {"constancy_drift", res.constancy_drift}};
  out.summary(s);
  return 0;
}

int cmd_check(json s, Output& out) {
  std::vector<std::vector<std::string>> rows;
  json crit = json::array();
  bool fatal = false;
  for (const auto& c : suite::criteria()) {
    const auto r = suite::run_timed(c);
    fatal = fatal || r.fatal_failure();
    for (const auto& row : r.rows)
      rows.push_back({std::to_string(r.id), "\"" + row.name + "\"", format_number(row.value), suite::to_string(row.relation),
                      format_number(row.bound), row.pass ? "pass" : (row.known_failure ? "known_failure" : "fail")});
    if (!r.error.empty()) rows.push_back({std::to_string(r.id), "\"error\"", "nan", "holds", "1", "fail"});
    crit.push_back({{"id", r.id}, {"title", r.title}, {"pass", r.pass()}, {"fatal", r.fatal_failure()}, {"seconds", r.seconds},
                    {"budget_seconds", r.budget_s}, {"error", r.error}});
  }
  out.table("check", {"criterion", "name", "value", "relation", "bound", "status"}, rows);
  s["check"] = {{"criteria", crit}, {"all_fatal_checks_pass", !fatal}};
  out.summary(s);
  return fatal ? 1 : 0;
}

// Sup error against the closed form for the exponential family, otherwise
// against the finest level on the coarsest grid's times.
int cmd_convergence(const RunConfig& c, json s, Output& out) {
  std::vector<SampledPath> paths;
  std::size_t dim = 1;
  Vec xi;
  for (int L : c.levels) {
    const BuiltDriver d = build_driver(c, L);
    dim = d.dim;
    xi = c.xi.empty() ? Vec(Vec::Ones(static_cast<Eigen::Index>(dim))) : initial_value(c, dim);
    RDEOptions o = rde_options(c, 1.0);
    o.mode = RDEMode::onestep;  // one-step output does not use the driver norm
    paths.push_back(solve_rde(d.driver, xi, o).Y.Y);
  }
  const bool closed = c.driver_kind == "exponential";
  const double a = param<double>(c.driver_params, "a", 1.0);
  const int coarse = *std::min_element(c.levels.begin(), c.levels.end());
  std::vector<int> levels;
  std::vector<double> errors;
  for (std::size_t i = 0; i < c.levels.size(); ++i) {
    if (!closed && c.levels[i] == *std::max_element(c.levels.begin(), c.levels.end())) continue;
    const SampledPath& Y = paths[i];
    const std::size_t stride = std::size_t{1} << (c.levels[i] - coarse);
    double e = 0.0;
    for (std::size_t k = 0; k < Y.size(); k += stride) {
      Vec ref;
      if (closed) {
        ref = xi * std::exp(a * Y.grid.times[k]);
      } else {
        const std::size_t top = static_cast<std::size_t>(std::max_element(c.levels.begin(), c.levels.end()) - c.levels.begin());
        ref = paths[top].at(k << (c.levels[top] - c.levels[i]));
      }
      e = std::max(e, (Y.at(k) - ref).norm());
    }
    levels.push_back(c.levels[i]);
    errors.push_back(e);
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const std::string order = i == 0 ? "" : format_number(std::log2(errors[i - 1] / errors[i]) / (levels[i] - levels[i - 1]));
    rows.push_back({std::to_string(levels[i]), format_number(errors[i]), order});
  }
  out.table("convergence", {"level", "error", "fitted_order"}, rows);
  s["convergence"] = {{"reference", closed ? "closed form" : "finest level"},
                      {"levels", levels},
                      {"errors", errors},
                      {"fitted_order", levels.size() >= 2 ? fitted_order(levels, errors) : std::nan("")}};
  out.summary(s);
  return 0;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: JSON parse error: ") + e.what());
  }
  Checker ck;
  RunConfig c;
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  ck.keys(j, "config", {"command", "alpha", "beta", "T", "level", "driver", "rde", "flow", "rpde", "output", "young", "convergence"});

  if (!j.contains("command") || !j["command"].is_string())
    ck.fail("command: required, one of " + join(kCommands));
  else {
    c.command = j["command"].get<std::string>();
    if (std::find(kCommands.begin(), kCommands.end(), c.command) == kCommands.end())
      ck.fail("command: unknown '" + c.command + "'; choose one of " + join(kCommands));
  }
  ck.number(j, "alpha", "", c.alpha);
  if (!(c.alpha > 1.0 / 3.0 && c.alpha <= 0.5)) ck.fail("alpha: must lie in (1/3, 1/2], got " + format_number(c.alpha));
  ck.number(j, "T", "", c.T);
  if (!(c.T > 0.0)) ck.fail("T: must be positive");
  ck.integer(j, "level", "", c.level, 1, 14);
  if (j.contains("beta")) {
    std::vector<double> b;
    if (ck.numbers(j["beta"], "beta", b)) {
      if (b.size() != 4)
        ck.fail("beta: expected 4 entries");
      else
        for (std::size_t i = 0; i < 4; ++i) {
          if (b[i] < 0.0) ck.fail("beta[" + std::to_string(i) + "]: must be non-negative");
          c.beta[i] = b[i];
        }
    }
  }

  const bool needs_driver = c.command != "young" && c.command != "check";
  if (ck.object(j, "driver", ""))
    check_driver(ck, c, j["driver"]);
  else if (!j.contains("driver") && needs_driver)
    ck.fail("driver: required for command '" + c.command + "'; catalog: " + join(kDriverKinds));

  if (ck.object(j, "rde", "")) {
    const json& r = j["rde"];
    ck.keys(r, "rde", {"xi", "mode", "global"});
    if (r.contains("xi")) ck.numbers(r["xi"], "rde.xi", c.xi);
    ck.string(r, "mode", "rde.", c.rde_mode);
    if (c.rde_mode != "onestep" && c.rde_mode != "picard") ck.fail("rde.mode: choose onestep or picard");
    ck.boolean(r, "global", "rde.", c.rde_global);
  }
  if (!c.xi.empty() && !c.driver_kind.empty() && c.xi.size() != driver_dim(c))
    ck.fail("rde.xi: has " + std::to_string(c.xi.size()) + " entries, driver dimension is " + std::to_string(driver_dim(c)));

  if (ck.object(j, "flow", "")) {
    const json& f = j["flow"];
    ck.keys(f, "flow", {"spatial_grid"});
    if (ck.object(f, "spatial_grid", "flow.")) {
      const json& g = f["spatial_grid"];
      ck.keys(g, "flow.spatial_grid", {"lo", "hi", "count"});
      if (g.contains("lo")) ck.numbers(g["lo"], "flow.spatial_grid.lo", c.grid_lo);
      if (g.contains("hi")) ck.numbers(g["hi"], "flow.spatial_grid.hi", c.grid_hi);
      int count = static_cast<int>(c.grid_count);
      ck.integer(g, "count", "flow.spatial_grid.", count, 2, 65);
      c.grid_count = static_cast<std::size_t>(count);
      if (c.grid_lo.size() != c.grid_hi.size()) ck.fail("flow.spatial_grid: lo and hi differ in length");
      for (std::size_t i = 0; i < std::min(c.grid_lo.size(), c.grid_hi.size()); ++i)
        if (!(c.grid_hi[i] > c.grid_lo[i])) ck.fail("flow.spatial_grid: hi must exceed lo on axis " + std::to_string(i));
    }
  }
  if (ck.object(j, "rpde", "")) {
    const json& r = j["rpde"];
    ck.keys(r, "rpde", {"h", "queries"});
    ck.string(r, "h", "rpde.", c.rpde_h);
    if (c.rpde_h != "square" && c.rpde_h != "identity" && c.rpde_h != "exp") ck.fail("rpde.h: choose square, identity or exp");
    if (r.contains("queries")) {
      if (!r["queries"].is_array())
        ck.fail("rpde.queries: expected an array of points");
      else
        for (const auto& q : r["queries"]) {
          std::vector<double> v;
          if (ck.numbers(q, "rpde.queries[]", v)) c.queries.push_back(v);
        }
    }
  }
  if (ck.object(j, "young", "")) {
    ck.keys(j["young"], "young", {"n_max"});
    ck.integer(j["young"], "n_max", "young.", c.young_n_max, 1, 12);
  }
  if (ck.object(j, "convergence", "")) {
    const json& cv = j["convergence"];
    ck.keys(cv, "convergence", {"levels"});
    if (cv.contains("levels")) {
      std::vector<double> lv;
      if (ck.numbers(cv["levels"], "convergence.levels", lv)) {
        c.levels.clear();
        for (double v : lv) {
          if (v != std::floor(v) || v < 1 || v > 14) ck.fail("convergence.levels: integers in [1, 14] required");
          c.levels.push_back(static_cast<int>(v));
        }
        if (c.levels.size() < 2) ck.fail("convergence.levels: at least two levels");
        if (std::set<int>(c.levels.begin(), c.levels.end()).size() != c.levels.size()) ck.fail("convergence.levels: duplicates");
      }
    }
  }
  if (ck.object(j, "output", "")) {
    const json& o = j["output"];
    ck.keys(o, "output", {"dir", "formats"});
    ck.string(o, "dir", "output.", c.output_dir);
    if (o.contains("formats")) {
      if (!o["formats"].is_array()) {
        ck.fail("output.formats: expected an array");
      } else {
        c.write_csv = c.write_json = false;
        for (const auto& f : o["formats"]) {
          if (f == "csv")
            c.write_csv = true;
          else if (f == "json")
            c.write_json = true;
          else
            ck.fail("output.formats: choose from csv, json");
        }
      }
    }
  }
  if (!ck.errors.empty()) throw ValidationError("config: " + std::to_string(ck.errors.size()) + " error(s)\n  " + join(ck.errors, "\n  "));
  return c;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

BuiltDriver build_driver(const RunConfig& c, int level) {
  const json& p = c.driver_params;
  const TimeGrid g = make_grid(c.T, level);
  const int refine = param<int>(p, "refine", 4);
  BuiltDriver out;
  if (c.driver_kind == "exponential") {
    out.dim = param<std::size_t>(p, "dim", 1);
    out.driver = smooth_driver(exponential_field(param<double>(p, "a", 1.0), out.dim), g, 4);
  } else if (c.driver_kind == "zero") {
    out.dim = param<std::size_t>(p, "dim", 1);
    out.driver = zero_driver(g, out.dim);
  } else if (c.driver_kind == "pure_area") {
    out.rough_path = make_pure_area_lift(antisym(param<double>(p, "a", 1.0)), g);
    out.driver = composition_driver(matrix_linear_bundle(planar_B()), *out.rough_path, level);
    out.dim = 2;
  } else if (c.driver_kind == "exp_product") {
    out.dim = param<std::size_t>(p, "dim", 1);
    const double area = param<double>(p, "area", 0.0);
    Mat A = zeros(out.dim, out.dim);
    if (out.dim == 1)
      A(0, 0) = area;
    else
      A.topLeftCorner(2, 2) = antisym(area);
    const Vec amp = Vec::Constant(static_cast<Eigen::Index>(out.dim), param<double>(p, "amplitude", 0.5));
    out.rough_path = make_perturbed_lift(sine_curve(amp, param<double>(p, "frequency", 3.0), param<double>(p, "phase", 0.2)), A, g, refine);
    out.driver = composition_driver(exp_product_bundle(out.dim), *out.rough_path, level);
  } else if (c.driver_kind == "rotation") {
    out.rough_path = make_perturbed_lift(circle_curve(param<double>(p, "radius", 0.7)), antisym(param<double>(p, "area", 0.0)), g, refine);
    out.driver = composition_driver(rotation_bundle(2), *out.rough_path, level);
    out.dim = 2;
  } else if (c.driver_kind == "matrix_linear") {
    Vec amp(2);
    amp << 0.4, -0.2;
    if (p.contains("amplitude")) amp = to_vec(p["amplitude"].get<std::vector<double>>());
    Mat A = zeros(2, 2);
    const double area = param<double>(p, "area", 0.3);
    A(0, 1) = area;
    A(1, 0) = -area / 3.0;
    out.rough_path = make_perturbed_lift(sine_curve(amp, param<double>(p, "frequency", 3.0), param<double>(p, "phase", 0.2)), A, g, refine);
    out.driver = composition_driver(matrix_linear_bundle(planar_B()), *out.rough_path, level);
    out.dim = 2;
  } else {
    throw ValidationError("driver.kind: unknown kind '" + c.driver_kind + "'; catalog: " + join(kDriverKinds));
  }
  return out;
}

int run(const RunConfig& cfg) {
  const int threads = configure_threads();
  Output out(cfg);
  const AnalysisParams p = analysis_params(cfg);
  p.validate();
  if (cfg.command == "check" || cfg.command == "young" || cfg.driver_kind.empty()) {
    // no driver: constants for a unit driver norm
    json s = {{"command", cfg.command}, {"alpha", cfg.alpha}, {"beta", cfg.beta}, {"T", cfg.T}, {"level", cfg.level},
              {"constants", constants_json(bound_constants(p, 1.0, 0.0))}, {"threads", threads}};
    s["constants_driver_norm_note"] = "unit driver norm";
    return cfg.command == "check" ? cmd_check(s, out) : cmd_young(cfg, s, out);
  }
  const BuiltDriver d = build_driver(cfg, cfg.level);
  const Vec xi = initial_value(cfg, d.dim);
  const double norm = driver_norm_around(*d.driver, p, xi);
  json s = base_summary(cfg, d, bound_constants(p, norm, xi.norm()));
  s["threads"] = threads;
  if (cfg.command == "lift") return cmd_lift(cfg, d, s, out);
  if (cfg.command == "integrate") return cmd_integrate(cfg, d, s, out);
  if (cfg.command == "rde") return cmd_rde(cfg, d, norm, s, out);
  if (cfg.command == "flow") return cmd_flow(cfg, d, norm, s, out);
  if (cfg.command == "rpde") return cmd_rpde(cfg, d, norm, s, out);
  if (cfg.command == "convergence") return cmd_convergence(cfg, s, out);
  throw ValidationError("command: unknown '" + cfg.command + "'");
}

}  // namespace roughkit::cli
