#include <cmath>

#include "doctest.h"
#include "roughkit/rde.hpp"

using namespace roughkit;

namespace {

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

// W(t, x) = a t x in one dimension, so W(dr, Y) = a Y dr.
SmoothField linear_field(double a) {
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

// W(t, x) = t x^2, blows up from x = 10 at t = 0.1.
SmoothField quadratic_field() {
  SmoothField W;
  W.dim = 1;
  W.value = [](double t, const Vec& x, int k) -> Tensor {
    if (k == 0) return {t * x[0] * x[0]};
    if (k == 1) return {2.0 * t * x[0]};
    if (k == 2) return {2.0 * t};
    return {0.0};
  };
  W.rate = [](double, const Vec& x, int k) -> Tensor {
    if (k == 0) return {x[0] * x[0]};
    if (k == 1) return {2.0 * x[0]};
    if (k == 2) return {2.0};
    return {0.0};
  };
  return W;
}

AnalysisParams params(double T = 1.0, double alpha = 0.45) {
  AnalysisParams p;
  p.alpha = alpha;
  p.T = T;
  return p;
}

DriverPtr exponential(int level, double a = 1.0, double T = 1.0) {
  return smooth_driver(linear_field(a), make_grid(T, level), 4);
}

double sup_error(const SampledPath& Y, const std::function<Vec(double)>& exact) {
  double e = 0.0;
  for (std::size_t k = 0; k < Y.size(); ++k) e = std::max(e, (Y.at(k) - exact(Y.grid.times[k])).norm());
  return e;
}

}  // namespace

TEST_CASE("rde exponential example") {
  RDEOptions o;
  o.params = params();
  const auto sol = solve_rde(exponential(12), v1(1.0), o);
  CHECK(sup_error(sol.Y.Y, [](double t) { return v1(std::exp(t)); }) <= 1e-6);
  CHECK(sol.Y.Ydot.data == sol.Y.Y.data);
  CHECK(sol.diag.last_index == 4096);
  CHECK(sol.diag.holder_norm > 0.0);
  // halving the resolution moves the end value by O(h^2)
  CHECK(sol.diag.self_consistency < 1e-6);
  CHECK(sol.diag.self_consistency > 0.0);
}

TEST_CASE("rde pure area driver against RK4 on the reduced field") {
  const double amp = 0.5;
  Mat B1(2, 2), B2(2, 2), A(2, 2);
  B1 << 0.5, 0.2, -0.3, 0.4;
  B2 << -0.2, 0.5, 0.4, 0.1;
  A << 0.0, amp, -amp, 0.0;
  const int level = 12;
  const TimeGrid g = make_grid(1.0, level);
  auto drv = composition_driver(matrix_linear_bundle({B1, B2}), make_pure_area_lift(A, g), level);
  const Vec xi = v2(0.7, -0.4);

  // Y' = sum_ab A_ab B_b diag(cos Y) B_a sin(Y)
  const std::vector<Mat> Bs{B1, B2};
  auto field = [&](const Vec& y) {
    Vec s = y.array().sin().matrix();
    Mat c = y.array().cos().matrix().asDiagonal();
    Vec out = zeros(2);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) out += A(a, b) * (Bs[b] * (c * (Bs[a] * s)));
    return out;
  };
  const int steps = 2000;
  std::vector<Vec> rk{xi};
  const double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    const Vec& y = rk.back();
    const Vec k1 = field(y), k2 = field(y + 0.5 * h * k1), k3 = field(y + 0.5 * h * k2), k4 = field(y + h * k3);
    rk.push_back(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  }
  auto exact = [&](double t) {
    // cubic interpolation between RK4 nodes is far below the tolerance
    const double u = t * steps;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(u), steps - 1);
    const double th = u - static_cast<double>(k);
    const Vec& y0 = rk[k];
    const Vec& y1 = rk[k + 1];
    const Vec f0 = field(y0), f1 = field(y1);
    const double h00 = 2 * th * th * th - 3 * th * th + 1, h10 = th * th * th - 2 * th * th + th;
    const double h01 = -2 * th * th * th + 3 * th * th, h11 = th * th * th - th * th;
    return Vec(h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1);
  };
  RDEOptions o;
  o.params = params();
  o.driver_norm = 1.0;  // one-step output does not depend on it
  const auto sol = solve_rde(drv, xi, o);
  CHECK(sup_error(sol.Y.Y, exact) <= 1e-5);
  // the field moves the solution, so the comparison is not vacuous
  CHECK((sol.Y.Y.at(4096) - xi).norm() > 1e-3);
}

TEST_CASE("rde hypothesis H refusal and local mode") {
  AnalysisParams p = params(1.0, 0.4);
  p.beta = {2.0, 2.0, 2.0, 2.0};
  CHECK(p.gamma2() == doctest::Approx(6.0));
  CHECK(hypothesis_value(p) == doctest::Approx(11.0));
  RDEOptions o;
  o.params = p;
  o.driver_norm = 1.0;
  auto drv = exponential(8);
  CHECK_THROWS_AS(solve_rde(drv, v1(1.0), o), HypothesisError);

  o.global = false;
  const auto sol = solve_rde(drv, v1(1.0), o);
  CHECK_FALSE(sol.diag.warning.empty());
  const std::size_t expect = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(sol.diag.constants.h1 * 256.0 * (1 + 1e-12))));
  CHECK(sol.diag.last_index == std::min<std::size_t>(expect, 256));
  CHECK(sol.diag.last_index < 256);
  // values past the local horizon are held at the last computed state
  CHECK(sol.Y.Y.at(256)[0] == sol.Y.Y.at(sol.diag.last_index)[0]);
}

TEST_CASE("rde picard contraction on a window of length h2") {
  const AnalysisParams p1 = params();
  auto unit = exponential(8);
  const Vec xi = v1(1.0);
  const double norm = driver_norm_around(*unit, p1, xi);
  const ConstantsReport c = bound_constants(p1, norm, xi.norm());
  REQUIRE(c.h2 > 0.0);
  REQUIRE(c.h2 < 1.0);

  // same field on [0, h2], one window over the whole horizon
  auto drv = exponential(8, 1.0, c.h2);
  RDEOptions o;
  o.params = params(c.h2);
  o.mode = RDEMode::picard;
  o.window_intervals = 256;
  o.driver_norm = norm;
  const auto sol = solve_rde(drv, xi, o);
  REQUIRE(sol.diag.windows.size() == 1);
  const auto& w = sol.diag.windows.front();
  REQUIRE_FALSE(w.factors.empty());
  for (double f : w.factors) CHECK(f <= 0.6);
  CHECK(w.distances.back() < 1e-10);

  // a large driver on a long window does not contract
  RDEOptions bad = o;
  bad.params = params();
  bad.driver_norm = 1.0;
  CHECK_THROWS_AS(solve_rde(exponential(8, 60.0), xi, bad), ConvergenceError);
}

TEST_CASE("rde window decompositions and modes agree") {
  auto drv = exponential(9, 1.3);
  const Vec xi = v1(0.8);
  RDEOptions o;
  o.params = params();
  o.mode = RDEMode::picard;
  o.driver_norm = driver_norm_around(*drv, o.params, xi);
  const auto automatic = solve_rde(drv, xi, o);
  CHECK(automatic.diag.windows.size() >= 1);
  for (const auto& w : automatic.diag.windows) CHECK(w.harmonic_ok);
  o.window_intervals = 7;
  const auto seven = solve_rde(drv, xi, o);
  o.window_intervals = 64;
  const auto wide = solve_rde(drv, xi, o);
  CHECK(seven.diag.windows.size() == 74);
  double gap = 0.0;
  for (std::size_t k = 0; k < drv->grid().size(); ++k) {
    gap = std::max(gap, std::abs(seven.Y.Y.at(k)[0] - automatic.Y.Y.at(k)[0]));
    gap = std::max(gap, std::abs(wide.Y.Y.at(k)[0] - automatic.Y.Y.at(k)[0]));
  }
  CHECK(gap <= 1e-9);

  o.mode = RDEMode::onestep;
  const auto one = solve_rde(drv, xi, o);
  double mode_gap = 0.0;
  for (std::size_t k = 0; k < drv->grid().size(); ++k)
    mode_gap = std::max(mode_gap, std::abs(one.Y.Y.at(k)[0] - automatic.Y.Y.at(k)[0]));
  const double rate = std::pow(2.0, -9.0 * (3.0 * o.params.alpha - 1.0));
  CHECK(mode_gap <= 1e-8 * rate);
}

TEST_CASE("rde errors") {
  RDEOptions o;
  o.params = params();
  o.driver_norm = 1.0;
  auto blow = smooth_driver(quadratic_field(), make_grid(1.0, 8), 4);
  CHECK_THROWS_AS(solve_rde(blow, v1(10.0), o), ConvergenceError);
  CHECK_THROWS_AS(solve_rde(blow, v2(1.0, 1.0), o), ValidationError);
  o.params.T = 2.0;
  CHECK_THROWS_AS(solve_rde(blow, v1(1.0), o), ValidationError);
  CHECK(parse_rde_mode("picard") == RDEMode::picard);
  CHECK_THROWS_AS(parse_rde_mode("rk4"), ValidationError);
}

TEST_CASE("rde a priori bounds") {
  RDEOptions o;
  o.params = params();
  auto zero = zero_driver(make_grid(1.0, 8), 2);
  const auto z = solve_rde(zero, v2(0.3, -1.0), o);
  CHECK(sup_error(z.Y.Y, [](double) { return v2(0.3, -1.0); }) == 0.0);
  const auto rz = apriori_report(z, o.params, v2(0.3, -1.0));
  CHECK(rz.local_norm == 0.0);
  CHECK(rz.local_holds);
  CHECK(rz.global_holds);

  for (double xi : {0.5, 1.0, 2.0}) {
    const auto sol = solve_rde(exponential(10), v1(xi), o);
    const auto r = apriori_report(sol, o.params, v1(xi));
    CHECK(r.local_holds);
    CHECK(r.margin >= 1.0);
    CHECK(r.global_holds);
    // measured norm of xi e^t on [0, 1] is at least its smallest slope xi
    CHECK(r.global_norm >= xi);
  }
}

TEST_CASE("rde sensitivity to the initial value") {
  RDEOptions o;
  o.params = params();
  o.driver_norm = 1.0;
  auto drv = exponential(12);
  const auto same = sensitivity_report(drv, v1(1.0), v1(1.0), o);
  CHECK(same.d == 0.0);
  CHECK(same.ratio == 0.0);

  const double eps = 1e-2;
  const auto r = sensitivity_report(drv, v1(1.0), v1(1.0 + eps), o);
  CHECK(std::abs(r.sup_gap - std::exp(1.0) * eps) <= 1e-6);
  CHECK(r.ratio > 0.0);

  o.driver_norm.reset();
  const auto s = sensitivity_sweep(exponential(10), v1(1.0), v1(1.0), {1e-2, 1e-3, 1e-4}, o);
  REQUIRE(s.ratios.size() == 3);
  CHECK(s.linear);
  CHECK(std::abs(s.ratios[1] - s.ratios[2]) <= 0.05 * s.ratios[2]);

  // bounded on a ball of initial values
  o.driver_norm = 1.0;
  double worst = 0.0;
  for (double a : {-1.0, 0.0, 0.5, 1.0})
    for (double b : {-0.5, 0.25, 1.0})
      if (a != b) worst = std::max(worst, sensitivity_report(exponential(8), v1(a), v1(b), o).ratio);
  CHECK(std::isfinite(worst));
  CHECK(worst < 10.0);
}
