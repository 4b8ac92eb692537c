#include <cmath>

#include "doctest.h"
#include "roughkit/fbundle.hpp"
#include "roughkit/flow_rpde.hpp"
#include "roughkit/rough_path.hpp"

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

SmoothField scaled_identity(double a) {
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

FlowOptions options(bool second = true) {
  FlowOptions o;
  o.rde.params.alpha = 0.45;
  o.second_derivatives = second;
  o.rde.driver_norm = 1.0;
  return o;
}

DriverPtr planar_driver(int level) {
  Mat B1(2, 2), B2(2, 2);
  B1 << .5, .2, -.3, .4;
  B2 << -.2, .5, .4, .1;
  Mat A = zeros(2, 2);
  A(0, 1) = 0.3;
  A(1, 0) = -0.1;
  const auto rp = make_perturbed_lift(sine_curve(v2(0.4, -0.2), 3.0, 0.2), A, make_grid(1.0, level), 0);
  return composition_driver(matrix_linear_bundle({B1, B2}), rp, level);
}

DriverPtr scalar_driver(int level, double c) {
  Mat A(1, 1);
  A << c;
  const auto rp = make_perturbed_lift(sine_curve(v1(0.5), 3.0, 0.2), A, make_grid(1.0, level), 0);
  return composition_driver(exp_product_bundle(1), rp, level);
}

}  // namespace

TEST_CASE("flow spatial grid") {
  const auto g = make_spatial_grid(v2(-1, 0), v2(1, 2), 3);
  CHECK(g.size() == 9);
  CHECK(g.spacing(0) == 1.0);
  CHECK((g.point(0) - v2(-1, 0)).norm() == 0.0);
  CHECK((g.point(5) - v2(1, 1)).norm() == 0.0);
  CHECK(g.contains(v2(0.5, 1.5)));
  CHECK_FALSE(g.contains(v2(1.1, 1.0)));
  CHECK_THROWS_AS(make_spatial_grid(v1(0), v1(0), 3), ValidationError);
  CHECK_THROWS_AS(make_spatial_grid(v1(0), v1(1), 1), ValidationError);
}

TEST_CASE("flow of a linear driver in closed form") {
  const double a = 0.7;
  auto flow = solve_flow(smooth_driver(scaled_identity(a), make_grid(1.0, 10), 4), make_spatial_grid(v1(-1), v1(1), 9), options());
  jacobians(flow);
  const auto& t = flow.driver->grid().times;
  double ey = 0, edy = 0, em = 0, ed2 = 0;
  for (std::size_t p = 0; p < flow.space.size(); ++p) {
    const double x = flow.space.point(p)[0];
    for (std::size_t k = 0; k < flow.times(); ++k) {
      ey = std::max(ey, std::abs(flow.Y[p].at(k)[0] - x * std::exp(a * t[k])));
      edy = std::max(edy, std::abs(flow.jac[p].DY[k](0, 0) - std::exp(a * t[k])));
      em = std::max(em, std::abs(flow.jac[p].M[k](0, 0) - std::exp(-a * t[k])));
      ed2 = std::max(ed2, std::abs(flow.jac[p].D2Y[k][0](0, 0)));
    }
  }
  CHECK(ey <= 1e-6);
  CHECK(edy <= 1e-6);
  CHECK(em <= 1e-6);
  CHECK(ed2 <= 1e-7);
  CHECK(flow.product_gap <= 1e-12);

  // u(t, x) = (x e^{-a t})^2
  const std::vector<Vec> q{v1(-0.35), v1(0.1), v1(0.3)};
  const auto sol = rpde_solution(square_map(), flow, q);
  double eu = 0, edu = 0;
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t k = 0; k < flow.times(); ++k) {
      const double z = q[i][0] * std::exp(-a * t[k]);
      eu = std::max(eu, std::abs(sol.u[i][k][0] - z * z));
      edu = std::max(edu, std::abs(sol.Du[i][k](0, 0) - 2.0 * z * std::exp(-a * t[k])));
    }
  CHECK(eu <= 1e-6);
  CHECK(edu <= 1e-6);
}

TEST_CASE("flow of the zero driver is the identity") {
  const auto g = make_grid(1.0, 6);
  auto flow = solve_flow(zero_driver(g, 2), make_spatial_grid(v2(-1, -1), v2(1, 1), 3), options(false));
  jacobians(flow);
  CHECK(flow.product_gap == 0.0);
  CHECK(flow.symmetric_gap == 0.0);
  for (std::size_t p = 0; p < flow.space.size(); ++p) CHECK((flow.Y[p].at(64) - flow.space.point(p)).norm() == 0.0);
  const auto inv = invert_flow(flow, {v2(0.3, -0.2)}, 64, false);
  CHECK((inv.Z[0] - v2(0.3, -0.2)).norm() <= 1e-14);
  CHECK((inv.DZ[0] - Mat::Identity(2, 2)).norm() <= 1e-14);
}

TEST_CASE("flow invariants in the plane") {
  auto flow = solve_flow(planar_driver(8), make_spatial_grid(v2(-1.5, -1.5), v2(1.5, 1.5), 5), options());
  jacobians(flow);
  CHECK(flow.product_gap <= 1e-8);
  // the symmetrized compensator tracks the inverse, the printed one does not
  CHECK(flow.symmetric_gap < 0.01 * flow.printed_gap);

  // DY against central differences of Y
  const double h = 1e-5;
  const std::size_t last = flow.times() - 1;
  double fd = 0.0;
  for (std::size_t p : {6, 12, 18}) {
    const Vec x = flow.space.point(p);
    for (Eigen::Index l = 0; l < 2; ++l) {
      Vec e = zeros(2);
      e[l] = h;
      const auto up = solve_rde(flow.driver, x + e, flow.options.rde).Y.Y.at(last);
      const auto dn = solve_rde(flow.driver, x - e, flow.options.rde).Y.Y.at(last);
      fd = std::max(fd, ((up - dn) / (2 * h) - flow.jac[p].DY[last].col(l)).norm());
    }
  }
  CHECK(fd <= 1e-5);

  // round trip Z(Y_T(x)) = x
  const auto inner = make_spatial_grid(v2(-0.5, -0.5), v2(0.5, 0.5), 5);
  std::vector<Vec> q;
  for (std::size_t p = 0; p < inner.size(); ++p) q.push_back(solve_rde(flow.driver, inner.point(p), flow.options.rde).Y.Y.at(last));
  const auto inv = invert_flow(flow, q, last);
  double rt = 0.0, dz = 0.0;
  for (std::size_t p = 0; p < inner.size(); ++p) {
    rt = std::max(rt, (inv.Z[p] - inner.point(p)).norm());
    dz = std::max(dz, (inv.DZ[p] * flow_local(flow, last, inner.point(p)).DY - Mat::Identity(2, 2)).norm());
  }
  CHECK(rt <= 1e-10);
  CHECK(dz <= 0.05);
  CHECK(inv.max_iterations <= kNewtonMaxIter);
  CHECK(std::isfinite(inv.zst2_constant));
  CHECK(inv.zst2_constant > 0.0);
  CHECK_THROWS_AS(invert_flow(flow, {v2(2.0, 0.0)}, last), ValidationError);
}

TEST_CASE("flow interpolation reproduces nodes and scalar slopes") {
  auto flow = solve_flow(scalar_driver(7, 0.3), make_spatial_grid(v1(-0.6), v1(0.6), 9), options());
  jacobians(flow);
  for (std::size_t p = 0; p < flow.space.size(); ++p) {
    const auto L = flow_local(flow, 100, flow.space.point(p));
    CHECK(std::abs(L.Y[0] - flow.Y[p].at(100)[0]) <= 1e-14);
    CHECK(std::abs(L.DY(0, 0) - flow.jac[p].DY[100](0, 0)) <= 1e-12);
  }
  // Y is the antiderivative of DY along x
  const auto a = flow_local(flow, 100, v1(0.1)), b = flow_local(flow, 100, v1(0.1 + 1e-5));
  CHECK(std::abs((b.Y[0] - a.Y[0]) / 1e-5 - a.DY(0, 0)) <= 1e-4);
  CHECK(std::abs((b.M(0, 0) - a.M(0, 0)) / 1e-5 - a.DM[0](0, 0)) <= 1e-3);
}

TEST_CASE("rpde brackets vanish for the canonical scalar lift") {
  auto flow = solve_flow(scalar_driver(8, 0.0), make_spatial_grid(v1(-0.6), v1(0.6), 9), options());
  jacobians(flow);
  const auto r = rpde_residual(rpde_solution(square_map(), flow, {v1(-0.3), v1(0.2)}));
  CHECK(r.bracket_DW_W <= 1e-12);
  CHECK(r.bracket_W_DW <= 1e-12);
  CHECK(r.bracket_W <= 1e-12);
  CHECK(r.defect == doctest::Approx(r.naive_defect).epsilon(1e-9));
  CHECK(r.rough_integral > 0.01);
}

TEST_CASE("rpde defect with a symmetric perturbation") {
  std::vector<double> defect;
  double naive = 0.0, drift = 0.0;
  for (int level : {7, 8, 9}) {
    auto flow = solve_flow(scalar_driver(level, 0.3), make_spatial_grid(v1(-0.6), v1(0.6), 9), options());
    jacobians(flow);
    const auto r = rpde_residual(rpde_solution(square_map(), flow, {v1(-0.3), v1(0.0), v1(0.25)}));
    defect.push_back(r.defect);
    naive = r.naive_defect;
    drift = std::max(drift, r.constancy_drift);
    CHECK(r.bracket_W > 0.01);
  }
  CHECK(fitted_order({7, 8, 9}, defect) >= 0.25);
  CHECK(naive > 10.0 * defect.back());
  CHECK(drift <= 1e-12);
}

TEST_CASE("flow serial and parallel agree bitwise") {
  auto o = options();
  auto a = solve_flow(planar_driver(6), make_spatial_grid(v2(-1, -1), v2(1, 1), 3), o);
  o.parallel = false;
  auto b = solve_flow(planar_driver(6), make_spatial_grid(v2(-1, -1), v2(1, 1), 3), o);
  jacobians(a);
  jacobians(b);
  for (std::size_t p = 0; p < a.space.size(); ++p) {
    CHECK(a.Y[p].data == b.Y[p].data);
    for (std::size_t k = 0; k < a.times(); ++k) CHECK((a.jac[p].M[k] - b.jac[p].M[k]).norm() == 0.0);
  }
}

TEST_CASE("flow errors") {
  auto flow = solve_flow(scalar_driver(5, 0.3), make_spatial_grid(v1(-0.6), v1(0.6), 3), options(false));
  CHECK_THROWS_AS(flow_local(flow, 0, v1(0.0)), ValidationError);
  jacobians(flow);
  CHECK_THROWS_AS(rpde_solution(square_map(), flow, {v1(0.0)}), ValidationError);
  CHECK_THROWS_AS(invert_flow(flow, {v1(0.0)}, 32, true), ValidationError);
  CHECK_THROWS_AS(invert_flow(flow, {v1(0.0)}, 99), ValidationError);
  CHECK_THROWS_AS(solve_flow(scalar_driver(5, 0.3), make_spatial_grid(v2(0, 0), v2(1, 1), 3), options()), ValidationError);
  // blow-up at some base point is reported per point
  CHECK_THROWS_AS(solve_flow(scalar_driver(8, 0.3), make_spatial_grid(v1(-1), v1(9), 3), options()), ConvergenceError);
}
