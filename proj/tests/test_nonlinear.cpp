#include <cmath>
#include <random>

#include "doctest.h"
#include "roughkit/nonlinear_integral.hpp"

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

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int q = 1; q < n; ++q) s += (q % 2 ? 4.0 : 2.0) * f(a + q * h);
  return s * h / 3.0;
}

// Closed form of the oscillating e^{xy} example at index n.
double oscillation_oracle(int n) {
  return -0.25 * simpson([n](double s) { return std::exp(std::sin(s) / (2.0 * n * n)); }, 0.0, 4.0 * M_PI, 4096);
}

SmoothCurve scaled_cosine(int n) {
  SmoothCurve c;
  const double w = 2.0 * M_PI * n * n;
  c.value = [n, w](double t) { return v1(std::cos(w * t) / n); };
  c.deriv = [n, w](double t) { return v1(-w * std::sin(w * t) / n); };
  return c;
}

// Y_t = W_{0,t}(c) is controlled with Ydot = c and zero remainder.
NLControlledPath frozen_start(DriverPtr drv, const Vec& c) {
  const TimeGrid& g = drv->grid();
  SampledPath Y(g, drv->dim()), Yd(g, drv->dim());
  for (std::size_t k = 0; k < g.size(); ++k) {
    Y.set(k, k == 0 ? zeros(drv->dim()) : drv->W(0, k, c));
    Yd.set(k, c);
  }
  return make_nl_controlled(drv, Y, Yd);
}

Mat antisym(double a) {
  Mat A(2, 2);
  A << 0.0, a, -a, 0.0;
  return A;
}

}  // namespace

TEST_CASE("nonlinear Young integral of the oscillating example") {
  const TimeGrid out = make_grid(1.0, 0);
  std::vector<double> gaps;
  for (int n = 1; n <= 8; ++n) {
    const SmoothField W = field_from_bundle(exp_product_bundle(1), scaled_cosine(n));
    const double w = 2.0 * M_PI * n * n;
    YoungOptions opt;
    opt.extra_levels = 8;
    opt.max_extra = 22;
    const auto res = nl_young_integral(W, [n, w](double t) { return v1(std::sin(w * t) / n); }, out, opt);
    const double I = res.I.at(1)(0);
    CHECK(I == doctest::Approx(oscillation_oracle(n)).epsilon(1e-8));
    if (n == 1) CHECK(I == doctest::Approx(-3.341031).epsilon(1e-6));
    gaps.push_back(std::abs(I + M_PI));
  }
  for (std::size_t k = 1; k < gaps.size(); ++k) CHECK(gaps[k] < gaps[k - 1]);
  CHECK(gaps.back() < 1e-3);
  // |I_n + pi| ~ pi / (16 n^4)
  CHECK(gaps[7] * std::pow(8.0, 4) == doctest::Approx(M_PI / 16).epsilon(1e-2));
}

TEST_CASE("nonlinear Young integral of a space-free field") {
  SmoothField W;
  W.dim = 1;
  W.value = [](double t, const Vec&, int k) { return k == 0 ? Tensor{std::exp(t)} : Tensor(std::size_t(1) << k, 0.0); };
  W.rate = W.value;
  const auto res = nl_young_integral(W, [](double t) { return v1(std::sin(30 * t)); }, make_grid(1.0, 3));
  CHECK(res.I.at(8)(0) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
  CHECK(res.I.at(4)(0) == doctest::Approx(std::exp(0.5) - 1.0).epsilon(1e-12));
}

TEST_CASE("nonlinear rough integral examples") {
  SUBCASE("space-free driver") {
    SmoothField W;
    W.dim = 1;
    W.value = [](double t, const Vec&, int k) { return k == 0 ? Tensor{t * t} : Tensor(std::size_t(1) << k, 0.0); };
    W.rate = [](double t, const Vec&, int k) { return k == 0 ? Tensor{2 * t} : Tensor(std::size_t(1) << k, 0.0); };
    const auto drv = smooth_driver(W, make_grid(1.0, 6));
    const SampledPath Y = sample_path(drv->grid(), 1, [](double t) { return v1(std::cos(5 * t)); });
    AnalysisParams p;
    const auto res = nl_rough_integral(make_nl_controlled(drv, Y, Y), p);
    for (std::size_t k = 0; k <= 64; k += 16) CHECK(res.Z.Y.at(k)(0) == doctest::Approx(std::pow(drv->grid().times[k], 2)).epsilon(1e-14));
  }
  SUBCASE("bilinear composition equals the linear integral") {
    std::mt19937 gen(5);
    std::normal_distribution<double> nd;
    std::vector<Mat> A(2, zeros(2, 2));
    for (auto& a : A)
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) a(r, c) = nd(gen);
    for (const RoughPath& rp : {make_canonical_lift(circle_curve(1.0), make_grid(1.0, 8)),
                                make_perturbed_lift(circle_curve(1.0), antisym(0.5), make_grid(1.0, 8))}) {
      const auto drv = linear_adapter(rp, A, 8);
      const SampledPath Y = sample_path(rp.grid(), 2, [](double t) { return v2(std::cos(3 * t), t * t); });
      const SampledPath Yd = sample_path(rp.grid(), 2, [](double t) { return v2(1.0 + t, std::sin(t)); });
      AnalysisParams p;
      const auto nl = nl_rough_integral(make_nl_controlled(drv, Y, Yd), p);
      ControlledPath lin;
      lin.Y = SampledPath(rp.grid(), 4);
      for (std::size_t k = 0; k < rp.grid().size(); ++k) {
        Vec v(4);
        Mat P = zeros(4, 2);
        for (int a = 0; a < 2; ++a) {
          const Vec ay = A[static_cast<std::size_t>(a)] * Y.at(k);
          for (int r = 0; r < 2; ++r) {
            v(r * 2 + a) = ay(r);
            for (int b = 0; b < 2; ++b) P(r * 2 + a, b) = (A[static_cast<std::size_t>(a)] * A[static_cast<std::size_t>(b)] * Yd.at(k))(r);
          }
        }
        lin.Y.set(k, v);
        lin.Yp.push_back(P);
      }
      const auto li = rough_integral(lin, rp, 0.45);
      double gap = 0.0;
      for (std::size_t k = 0; k < rp.grid().size(); ++k) gap = std::max(gap, (nl.Z.Y.at(k) - li.Z.Y.at(k)).norm());
      CHECK(gap <= 1e-12);
    }
  }
  SUBCASE("smooth driver against classical quadrature") {
    const SmoothCurve c = sine_curve(v1(0.8), 2.0, 0.3);
    const SmoothField W = field_from_bundle(exp_product_bundle(1), c);
    const auto drv = smooth_driver(W, make_grid(1.0, 12), 8);
    const Vec c0 = v1(0.7);
    const NLControlledPath ctrl = frozen_start(drv, c0);
    AnalysisParams p;
    NLIntegralOptions o;
    o.check_bounds = false;
    const auto res = nl_rough_integral(ctrl, p, o);
    auto y_of = [&](double r) { return W.value(r, c0, 0)[0] - W.value(0.0, c0, 0)[0]; };
    const double oracle = simpson([&](double r) { return W.rate(r, v1(y_of(r)), 0)[0]; }, 0.0, 1.0, 20000);
    CHECK(std::abs(res.Z.Y.at(4096)(0) - oracle) < 1e-6);
  }
}

TEST_CASE("nonlinear rough integral bounds") {
  const TimeGrid fine = make_grid(1.0, 10);
  AnalysisParams p;
  p.alpha = 0.45;
  for (const RoughPath& rp : {make_canonical_lift(sine_curve(v1(0.8), 2.0, 0.3), fine),
                              make_perturbed_lift(circle_curve(0.7), antisym(0.6), fine)}) {
    const FBundle f = rp.dim() == 1 ? exp_product_bundle(1) : rotation_bundle(2);
    const auto drv = composition_driver(f, rp, 8);
    const auto finer = composition_driver(f, rp, 9);
    const Vec c = rp.dim() == 1 ? v1(0.7) : v2(0.7, -0.4);
    const NLControlledPath ctrl = frozen_start(drv, c);
    NLIntegralOptions o;
    o.norms = weighted_driver_norm(*finer, p, path_samples(ctrl), 2);
    const auto res = nl_rough_integral(ctrl, p, o);
    INFO(f.name);
    CHECK(res.report.C1 > 0.0);
    CHECK(res.report.violations == 0);
    CHECK(res.report.remainder_holds);
    // output remainder is refinement-stable
    const auto coarse = nl_rough_integral(frozen_start(composition_driver(f, rp, 7), c), p, o);
    const double r8 = res.report.R_out, r7 = coarse.report.R_out;
    CHECK(r8 <= 2.0 * r7);
    CHECK(r7 <= 2.0 * r8);
  }
}

TEST_CASE("stability distance") {
  const RoughPath rp = make_canonical_lift(sine_curve(v1(0.8), 2.0, 0.3), make_grid(1.0, 7));
  const auto drv = composition_driver(exp_product_bundle(1), rp, 7);
  AnalysisParams p;
  p.alpha = 0.4;
  const NLControlledPath a = frozen_start(drv, v1(0.5));
  SUBCASE("identical inputs") {
    const auto r = stability_distance(a, a, p, path_samples(a));
    CHECK(r.d == 0.0);
    CHECK(r.gap_holds);
  }
  SUBCASE("remainder shift") {
    const double eps = 0.03;
    SampledPath Y = a.Y;
    for (std::size_t k = 0; k < Y.size(); ++k) Y.set(k, a.Y.at(k) + v1(eps * std::pow(Y.grid.times[k], 2 * p.alpha)));
    const NLControlledPath b = make_nl_controlled(drv, Y, a.Ydot);
    const auto r = stability_distance(a, b, p, path_samples(a));
    CHECK(r.d == doctest::Approx(eps).epsilon(1e-12));
    CHECK(r.gap_holds);
  }
  SUBCASE("integrals of perturbed initial data") {
    const NLControlledPath b_in = frozen_start(drv, v1(0.55));
    NLIntegralOptions o;
    o.check_bounds = false;
    const auto za = nl_rough_integral(a, p, o).Z, zb = nl_rough_integral(b_in, p, o).Z;
    auto samples = path_samples(a);
    for (const auto& s : path_samples(b_in)) samples.push_back(s);
    const auto r = stability_distance(za, zb, p, samples, &a, &b_in);
    CHECK(r.integral_checked);
    CHECK(r.d > 0.0);
    CHECK(r.integral_holds);
    CHECK(r.gap_holds);
    CHECK(r.rho == 0.0);
  }
  SUBCASE("grid mismatch") {
    const auto other = composition_driver(exp_product_bundle(1), rp, 6);
    CHECK_THROWS_AS(stability_distance(a, frozen_start(other, v1(0.5)), p, path_samples(a)), ValidationError);
  }
}

TEST_CASE("nonlinear and linear integrals agree on composition drivers") {
  SUBCASE("bilinear") {
    const std::vector<Mat> A{Mat::Constant(1, 1, 1.0)};
    const RoughPath rp = make_canonical_lift(sine_curve(v1(0.8), 2.0, 0.3), make_grid(1.0, 8));
    const auto e = eqlnri_check(frozen_start(linear_adapter(rp, A, 8), v1(0.4)), 0.45);
    CHECK(e.gap <= 1e-10);
    CHECK(e.young.sup_norm() < 1e-14);
  }
  SUBCASE("e^{xy} with a smooth canonical lift") {
    // The approximants differ at third order per step, so the running gap is O(h^2).
    std::vector<double> gaps;
    for (int L : {10, 12}) {
      const RoughPath rp = make_canonical_lift(sine_curve(v1(0.8), 2.0, 0.3), make_grid(1.0, L));
      const auto e = eqlnri_check(frozen_start(composition_driver(exp_product_bundle(1), rp, L), v1(0.7)), 0.45);
      CHECK(e.young.sup_norm() < 1e-14);
      gaps.push_back(e.gap);
      if (L == 12) {
        CHECK(e.gap <= 5e-7);
        CHECK(e.end_gap <= 1e-8);
      }
    }
    CHECK(gaps[0] / gaps[1] == doctest::Approx(16.0).epsilon(0.1));
  }
  SUBCASE("gap decays on a rough lift") {
    std::vector<int> levels;
    std::vector<double> gaps;
    for (int L = 8; L <= 12; ++L) {
      const RoughPath rp = make_perturbed_lift(circle_curve(0.7), antisym(0.6), make_grid(1.0, L));
      const auto e = eqlnri_check(frozen_start(composition_driver(exp_product_bundle(2), rp, L), v2(0.7, -0.4)), 0.5);
      levels.push_back(L);
      gaps.push_back(e.gap);
    }
    MESSAGE("gaps " << gaps[0] << " .. " << gaps.back() << ", order " << fitted_order(levels, gaps));
    CHECK(fitted_order(levels, gaps) >= 3 * 0.5 - 1 - 0.1);
  }
}
