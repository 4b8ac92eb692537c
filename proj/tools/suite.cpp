#include "suite.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "roughkit/fbundle.hpp"
#include "roughkit/flow_rpde.hpp"
#include "roughkit/nonlinear_integral.hpp"
#include "roughkit/rde.hpp"

namespace roughkit::suite {

namespace {

constexpr double kAlpha = 0.45;

Vec v1(double a) {
  Vec x(1);
  x << a;
  return x;
}

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

Mat antisym(double a) {
  Mat A(2, 2);
  A << 0.0, a, -a, 0.0;
  return A;
}

CriterionResult start(int id, std::string title, double budget) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  r.budget_s = budget;
  return r;
}

CheckRow at_most(std::string name, double value, double bound, bool known = false) {
  return {std::move(name), value, bound, Relation::at_most, value <= bound, known};
}

CheckRow at_least(std::string name, double value, double bound) {
  return {std::move(name), value, bound, Relation::at_least, value >= bound, false};
}

CheckRow holds(std::string name, bool ok) { return {std::move(name), ok ? 1.0 : 0.0, 1.0, Relation::holds, ok, false}; }

AnalysisParams params(double alpha = kAlpha, double T = 1.0) {
  AnalysisParams p;
  p.alpha = alpha;
  p.T = T;
  return p;
}

// W(t, x) = a t x componentwise
SmoothField exponential_field(double a) {
  SmoothField W;
  W.dim = 1;
  W.value = [a](double t, const Vec& x, int k) -> Tensor {
    if (k == 0) return {a * t * x[0]};
    if (k == 1) return {a * t};
    return Tensor(1, 0.0);
  };
  W.rate = [a](double, const Vec& x, int k) -> Tensor {
    if (k == 0) return {a * x[0]};
    if (k == 1) return {a};
    return Tensor(1, 0.0);
  };
  return W;
}

DriverPtr exponential(int level, double a = 1.0, double T = 1.0) { return smooth_driver(exponential_field(a), make_grid(T, level), 4); }

NLControlledPath frozen_start(DriverPtr drv, const Vec& c) {
  const TimeGrid& g = drv->grid();
  SampledPath Y(g, drv->dim()), Yd(g, drv->dim());
  for (std::size_t k = 0; k < g.size(); ++k) {
    Y.set(k, k == 0 ? zeros(drv->dim()) : drv->W(0, k, c));
    Yd.set(k, c);
  }
  return make_nl_controlled(drv, Y, Yd);
}

SmoothCurve scaled_cosine(int n) {
  SmoothCurve c;
  const double w = 2.0 * M_PI * n * n;
  c.value = [n, w](double t) { return v1(std::cos(w * t) / n); };
  c.deriv = [n, w](double t) { return v1(-w * std::sin(w * t) / n); };
  return c;
}

const SmoothCurve& sine1() {
  static const SmoothCurve c = sine_curve(v1(0.8), 2.0, 0.3);
  return c;
}

std::vector<RoughPath> linear_family(int level) {
  const TimeGrid g = make_grid(1.0, level);
  return {make_canonical_lift(sine1(), g), make_canonical_lift(circle_curve(1.0), g), make_pure_area_lift(antisym(0.6), g),
          make_perturbed_lift(circle_curve(0.7), antisym(0.6), g)};
}

struct NamedDriver {
  std::string name;
  DriverPtr driver;
};

std::vector<Mat> planar_B() {
  Mat B1(2, 2), B2(2, 2);
  B1 << 0.5, 0.2, -0.3, 0.4;
  B2 << -0.2, 0.5, 0.4, 0.1;
  return {B1, B2};
}

std::vector<NamedDriver> nonlinear_family(int level) {
  const TimeGrid g = make_grid(1.0, level);
  std::vector<Mat> A{Mat::Constant(2, 2, 0.0), Mat::Constant(2, 2, 0.0)};
  A[0] << 0.3, -0.2, 0.1, 0.4;
  A[1] << -0.5, 0.2, 0.3, 0.1;
  return {{"exp_product canonical", composition_driver(exp_product_bundle(1), make_canonical_lift(sine1(), g), level)},
          {"rotation perturbed", composition_driver(rotation_bundle(2), make_perturbed_lift(circle_curve(0.7), antisym(0.6), g), level)},
          {"matrix_linear pure area", composition_driver(matrix_linear_bundle(planar_B()), make_pure_area_lift(antisym(0.5), g), level)},
          {"bilinear circle", linear_adapter(make_canonical_lift(circle_curve(1.0), g), A, level)}};
}

std::vector<PointPair> random_pairs(std::size_t dim, std::size_t count, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<PointPair> pairs;
  for (std::size_t q = 0; q < count; ++q) {
    Vec a(static_cast<Eigen::Index>(dim)), b(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = u(gen);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(gen);
    pairs.emplace_back(a, b);
  }
  return pairs;
}

// the nonlinear integral family of the bound checks, with norms from one level finer
struct NLCase {
  std::string name;
  NLIntegralResult result;
};

std::vector<NLCase> nonlinear_integrals() {
  const TimeGrid fine = make_grid(1.0, 10);
  const AnalysisParams p = params();
  std::vector<NLCase> out;
  for (const RoughPath& rp : {make_canonical_lift(sine1(), fine), make_perturbed_lift(circle_curve(0.7), antisym(0.6), fine)}) {
    const FBundle f = rp.dim() == 1 ? exp_product_bundle(1) : rotation_bundle(2);
    const auto drv = composition_driver(f, rp, 8);
    const auto finer = composition_driver(f, rp, 9);
    const Vec c = rp.dim() == 1 ? v1(0.7) : v2(0.7, -0.4);
    const NLControlledPath ctrl = frozen_start(drv, c);
    NLIntegralOptions o;
    o.norms = weighted_driver_norm(*finer, p, path_samples(ctrl), 2);
    out.push_back({f.name + " " + to_string(rp.provenance()), nl_rough_integral(ctrl, p, o)});
  }
  return out;
}

double sup_gap(const SampledPath& Y, const std::function<Vec(double)>& exact) {
  double e = 0.0;
  for (std::size_t k = 0; k < Y.size(); ++k) e = std::max(e, (Y.at(k) - exact(Y.grid.times[k])).norm());
  return e;
}

DriverPtr planar_driver(int level) {
  Mat A = zeros(2, 2);
  A(0, 1) = 0.3;
  A(1, 0) = -0.1;
  const auto rp = make_perturbed_lift(sine_curve(v2(0.4, -0.2), 3.0, 0.2), A, make_grid(1.0, level), 0);
  return composition_driver(matrix_linear_bundle(planar_B()), rp, level);
}

DriverPtr scalar_driver(int level, double c) {
  Mat A(1, 1);
  A << c;
  const auto rp = make_perturbed_lift(sine_curve(v1(0.5), 3.0, 0.2), A, make_grid(1.0, level), 0);
  return composition_driver(exp_product_bundle(1), rp, level);
}

FlowOptions flow_options() {
  FlowOptions o;
  o.rde.params = params();
  o.rde.driver_norm = 1.0;  // one-step flows do not depend on it
  o.second_derivatives = true;
  return o;
}

}  // namespace

const char* to_string(Relation r) {
  switch (r) {
    case Relation::at_most: return "<=";
    case Relation::at_least: return ">=";
    case Relation::holds: return "holds";
  }
  return "?";
}

bool CriterionResult::pass() const {
  if (!error.empty()) return false;
  for (const auto& r : rows)
    if (!r.pass) return false;
  return true;
}

bool CriterionResult::fatal_failure() const {
  if (!error.empty()) return true;
  for (const auto& r : rows)
    if (!r.pass && !r.known_failure) return true;
  return false;
}

CriterionResult young_limit() {
  auto res = start(1, "nonlinear Young counterexample", 5.0);
  const TimeGrid out = make_grid(1.0, 0);
  std::vector<double> gaps;
  double I1 = 0.0;
  for (int n = 1; n <= 8; ++n) {
    const SmoothField W = field_from_bundle(exp_product_bundle(1), scaled_cosine(n));
    const double w = 2.0 * M_PI * n * n;
    YoungOptions opt;
    opt.extra_levels = 8;
    opt.max_extra = 22;
    const double I = nl_young_integral(W, [n, w](double t) { return v1(std::sin(w * t) / n); }, out, opt).I.at(1)[0];
    if (n == 1) I1 = I;
    gaps.push_back(std::abs(I + M_PI));
  }
  bool monotone = true;
  for (std::size_t k = 1; k < gaps.size(); ++k) monotone = monotone && gaps[k] < gaps[k - 1];
  res.rows.push_back(at_most("|I_1 + 3.3410|", std::abs(I1 + 3.3410), 1e-4));
  res.rows.push_back(at_most("|I_8 + pi|", gaps.back(), 1e-3));
  res.rows.push_back(holds("|I_n + pi| strictly decreasing", monotone));
  return res;
}

CriterionResult chen_relations() {
  auto res = start(2, "Chen relations at level 8", 10.0);
  for (const RoughPath& rp : linear_family(8)) {
    const auto r = chen_residual(rp);
    res.rows.push_back(at_most("linear " + to_string(rp.provenance()) + " d=" + std::to_string(rp.dim()), r.residual / r.scale, 1e-10));
  }
  for (const auto& nd : nonlinear_family(8)) {
    const auto r = nl_chen_residual(*nd.driver, random_pairs(nd.driver->dim(), 50, 17));
    res.rows.push_back(at_most("nonlinear " + nd.name, r.residual / r.scale, 1e-10));
  }
  return res;
}

CriterionResult sewing_bounds() {
  auto res = start(3, "sewing bound on dyadic intervals", 20.0);
  for (const RoughPath& rp : linear_family(8)) {
    const auto r = rough_integral(identity_controlled(rp), rp, kAlpha);
    res.rows.push_back(at_most("rough integral " + to_string(rp.provenance()) + " d=" + std::to_string(rp.dim()) + " violations",
                               static_cast<double>(r.report.sew.violations), 0.0));
  }
  for (const auto& c : nonlinear_integrals())
    res.rows.push_back(at_most("nonlinear integral " + c.name + " violations", static_cast<double>(c.result.report.sew.violations), 0.0));
  return res;
}

CriterionResult nonlinear_bound() {
  auto res = start(4, "nonlinear integral defect bound", 20.0);
  for (const auto& c : nonlinear_integrals()) {
    res.rows.push_back(at_most(c.name + " violations of C1 |t-s|^{3a}", static_cast<double>(c.result.report.violations), 0.0));
    res.rows.push_back(at_least(c.name + " C1", c.result.report.C1, 0.0));
    res.rows.push_back(holds(c.name + " remainder bound", c.result.report.remainder_holds));
  }
  return res;
}

CriterionResult integral_equivalence() {
  auto res = start(5, "nonlinear and linear integrals agree", 30.0);
  std::vector<int> levels;
  std::vector<double> gaps;
  double end_gap = 0.0;
  for (int L = 8; L <= 12; ++L) {
    const RoughPath rp = make_canonical_lift(sine1(), make_grid(1.0, L));
    const auto e = eqlnri_check(frozen_start(composition_driver(exp_product_bundle(1), rp, L), v1(0.7)), kAlpha);
    levels.push_back(L);
    gaps.push_back(e.gap);
    end_gap = e.end_gap;
  }
  res.rows.push_back(at_most("sup gap at level 12", gaps.back(), 1e-8, true));
  res.rows.push_back(at_most("final-time gap at level 12", end_gap, 1e-8));
  res.rows.push_back(at_least("fitted order of the gap, levels 8..12", fitted_order(levels, gaps), 3 * kAlpha - 1 - 0.1));
  return res;
}

CriterionResult rde_oracles() {
  auto res = start(6, "RDE oracles", 60.0);
  RDEOptions o;
  o.params = params();
  o.driver_norm = 1.0;
  {
    const auto sol = solve_rde(exponential(12), v1(1.0), o);
    res.rows.push_back(at_most("exponential sup error, level 12", sup_gap(sol.Y.Y, [](double t) { return v1(std::exp(t)); }), 1e-6));
  }
  {
    const Mat A = antisym(0.5);
    const auto Bs = planar_B();
    const int level = 12;
    auto drv = composition_driver(matrix_linear_bundle(Bs), make_pure_area_lift(A, make_grid(1.0, level)), level);
    const Vec xi = v2(0.7, -0.4);
    // reduced field sum_ab A_ab B_b diag(cos y) B_a sin y
    auto field = [&](const Vec& y) {
      const Vec s = y.array().sin().matrix();
      const Mat c = y.array().cos().matrix().asDiagonal();
      Vec out = zeros(2);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) out += A(a, b) * (Bs[static_cast<std::size_t>(b)] * (c * (Bs[static_cast<std::size_t>(a)] * s)));
      return out;
    };
    const int steps = 2000;
    const double h = 1.0 / steps;
    std::vector<Vec> rk{xi};
    for (int k = 0; k < steps; ++k) {
      const Vec& y = rk.back();
      const Vec k1 = field(y), k2 = field(y + 0.5 * h * k1), k3 = field(y + 0.5 * h * k2), k4 = field(y + h * k3);
      rk.push_back(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    }
    auto oracle = [&](double t) {
      const double u = t * steps;
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(u), steps - 1);
      const double th = u - static_cast<double>(k);
      const Vec &y0 = rk[k], &y1 = rk[k + 1];
      const double h00 = 2 * th * th * th - 3 * th * th + 1, h10 = th * th * th - 2 * th * th + th;
      const double h01 = -2 * th * th * th + 3 * th * th, h11 = th * th * th - th * th;
      return Vec(h00 * y0 + h10 * h * field(y0) + h01 * y1 + h11 * h * field(y1));
    };
    const auto sol = solve_rde(drv, xi, o);
    res.rows.push_back(at_most("pure area sup error vs RK4, level 12", sup_gap(sol.Y.Y, oracle), 1e-5));
  }
  {
    const Vec xi = v1(1.0);
    const double norm = driver_norm_around(*exponential(8), params(), xi);
    const ConstantsReport c = bound_constants(params(), norm, xi.norm());
    RDEOptions po;
    po.params = params(kAlpha, c.h2);
    po.mode = RDEMode::picard;
    po.window_intervals = 256;
    po.driver_norm = norm;
    const auto sol = solve_rde(exponential(8, 1.0, c.h2), xi, po);
    double worst = 0.0;
    for (const auto& w : sol.diag.windows)
      for (double f : w.factors) worst = std::max(worst, f);
    res.rows.push_back(at_most("Picard contraction factor on a window of length h2", worst, 0.6));
  }
  return res;
}

CriterionResult flow_invariants() {
  auto res = start(7, "flow invariants, 5x5 grid, level 10", 60.0);
  auto flow = solve_flow(planar_driver(10), make_spatial_grid(v2(-1.5, -1.5), v2(1.5, 1.5), 5), flow_options());
  jacobians(flow);
  res.rows.push_back(at_most("sup |DY M - I|", flow.product_gap, 1e-8));

  const double h = 1e-5;
  const std::size_t last = flow.times() - 1;
  double fd = 0.0;
  for (std::size_t p = 0; p < flow.space.size(); ++p) {
    const Vec x = flow.space.point(p);
    for (Eigen::Index l = 0; l < 2; ++l) {
      Vec e = zeros(2);
      e[l] = h;
      const Vec up = solve_rde(flow.driver, x + e, flow.options.rde).Y.Y.at(last);
      const Vec dn = solve_rde(flow.driver, x - e, flow.options.rde).Y.Y.at(last);
      fd = std::max(fd, ((up - dn) / (2 * h) - flow.jac[p].DY[last].col(l)).norm());
    }
  }
  res.rows.push_back(at_most("DY vs central differences of Y", fd, 1e-5));

  const auto inner = make_spatial_grid(v2(-0.5, -0.5), v2(0.5, 0.5), 5);
  std::vector<Vec> q;
  for (std::size_t p = 0; p < inner.size(); ++p) q.push_back(solve_rde(flow.driver, inner.point(p), flow.options.rde).Y.Y.at(last));
  const auto inv = invert_flow(flow, q, last);
  double rt = 0.0;
  for (std::size_t p = 0; p < inner.size(); ++p) rt = std::max(rt, (inv.Z[p] - inner.point(p)).norm());
  res.rows.push_back(at_most("round trip |Z(Y_T(x)) - x|", rt, 1e-10));
  return res;
}

CriterionResult rpde_identity() {
  auto res = start(8, "transport RPDE identity", 90.0);
  const std::vector<Vec> queries{v1(-0.3), v1(0.0), v1(0.25)};
  const SpatialGrid space = make_spatial_grid(v1(-0.6), v1(0.6), 9);
  {
    auto flow = solve_flow(scalar_driver(10, 0.0), space, flow_options());
    jacobians(flow);
    const auto r = rpde_residual(rpde_solution(square_map(), flow, queries));
    res.rows.push_back(at_most("canonical d=1 max bracket term", std::max({r.bracket_DW_W, r.bracket_W_DW, r.bracket_W}), 1e-12));
  }
  std::vector<int> levels;
  std::vector<double> defects, drifts;
  double naive = 0.0;
  for (int L = 8; L <= 12; ++L) {
    auto flow = solve_flow(scalar_driver(L, 0.3), space, flow_options());
    jacobians(flow);
    const auto r = rpde_residual(rpde_solution(square_map(), flow, queries));
    levels.push_back(L);
    defects.push_back(r.defect);
    drifts.push_back(r.constancy_drift);
    naive = r.naive_defect;
  }
  res.rows.push_back(at_least("fitted order of the full defect, levels 8..12", fitted_order(levels, defects), 3 * kAlpha - 1 - 0.1));
  res.rows.push_back(at_least("naive / full defect at level 12", naive / defects.back(), 10.0));
  // C fixed at level 8, floored at the Newton tolerance
  const double C = drifts.front() / std::pow(2.0, -8 * (3 * kAlpha - 1));
  double worst = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double bound = std::max(C * std::pow(2.0, -levels[i] * (3 * kAlpha - 1)), kNewtonTol);
    worst = std::max(worst, drifts[i] / bound);
  }
  res.rows.push_back(at_most("constancy drift / max(C 2^{-level(3a-1)}, 1e-12)", worst, 1.0));
  return res;
}

CriterionResult uniqueness() {
  auto res = start(9, "uniqueness and sensitivity", 30.0);
  auto drv = exponential(9, 1.3);
  const Vec xi = v1(0.8);
  RDEOptions o;
  o.params = params();
  o.mode = RDEMode::picard;
  o.driver_norm = driver_norm_around(*drv, o.params, xi);
  const auto automatic = solve_rde(drv, xi, o);
  o.window_intervals = 7;
  const auto seven = solve_rde(drv, xi, o);
  o.window_intervals = 64;
  const auto wide = solve_rde(drv, xi, o);
  double gap = 0.0;
  for (std::size_t k = 0; k < drv->grid().size(); ++k) {
    gap = std::max(gap, (seven.Y.Y.at(k) - automatic.Y.Y.at(k)).norm());
    gap = std::max(gap, (wide.Y.Y.at(k) - automatic.Y.Y.at(k)).norm());
  }
  res.rows.push_back(at_most("window decompositions 7 / 64 / automatic", gap, 1e-9));

  RDEOptions so;
  so.params = params();
  const auto s = sensitivity_sweep(exponential(10), v1(1.0), v1(1.0), {1e-2, 1e-3, 1e-4}, so, 0.05);
  res.rows.push_back(at_most("sensitivity ratio spread over 1e-2..1e-4", s.spread, 0.05));
  return res;
}

std::vector<Criterion> criteria() {
  return {{1, young_limit},          {2, chen_relations}, {3, sewing_bounds},   {4, nonlinear_bound}, {5, integral_equivalence},
          {6, rde_oracles},          {7, flow_invariants}, {8, rpde_identity}, {9, uniqueness}};
}

CriterionResult run_timed(const Criterion& c) {
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = c.run();
  } catch (const std::exception& e) {
    r.id = c.id;
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace roughkit::suite
