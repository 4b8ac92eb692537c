#include <cmath>
#include <random>

#include "doctest.h"
#include "roughkit/driver.hpp"
#include "roughkit/driver_analysis.hpp"

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

// W(t, x) = t x in one dimension.
SmoothField linear_in_time() {
  SmoothField w;
  w.dim = 1;
  w.value = [](double t, const Vec& x, int k) {
    if (k == 0) return Tensor{t * x(0)};
    return k == 1 ? Tensor{t} : Tensor(std::size_t(1) << k, 0.0);
  };
  w.rate = [](double, const Vec& x, int k) {
    if (k == 0) return Tensor{x(0)};
    return k == 1 ? Tensor{1.0} : Tensor(std::size_t(1) << k, 0.0);
  };
  return w;
}

// W(t, x) = sin(t) sin(x); the k-th derivative of sin is sin(x + k pi/2).
SmoothField sine_product() {
  SmoothField w;
  w.dim = 1;
  w.value = [](double t, const Vec& x, int k) { return Tensor{std::sin(t) * std::sin(x(0) + k * M_PI / 2)}; };
  w.rate = [](double t, const Vec& x, int k) { return Tensor{std::cos(t) * std::sin(x(0) + k * M_PI / 2)}; };
  return w;
}

// W(t, x) = a(t), no spatial dependence.
SmoothField space_free(std::function<double(double)> a, std::function<double(double)> da) {
  SmoothField w;
  w.dim = 1;
  w.value = [a](double t, const Vec&, int k) { return k == 0 ? Tensor{a(t)} : Tensor(std::size_t(1) << k, 0.0); };
  w.rate = [da](double t, const Vec&, int k) { return k == 0 ? Tensor{da(t)} : Tensor(std::size_t(1) << k, 0.0); };
  return w;
}

// W(t, x) = t x^2.
SmoothField quadratic() {
  SmoothField w;
  w.dim = 1;
  auto tab = [](double t, double x, int k) {
    switch (k) {
      case 0: return Tensor{t * x * x};
      case 1: return Tensor{2 * t * x};
      case 2: return Tensor{2 * t};
      default: return Tensor(std::size_t(1) << k, 0.0);
    }
  };
  w.value = [tab](double t, const Vec& x, int k) { return tab(t, x(0), k); };
  w.rate = [tab](double, const Vec& x, int k) { return tab(1.0, x(0), k); };
  return w;
}

std::vector<Vec> line_samples(double lo, double hi, int count) {
  std::vector<Vec> out;
  for (int q = 0; q < count; ++q) out.push_back(v1(lo + (hi - lo) * q / (count - 1)));
  return out;
}

}  // namespace

TEST_CASE("bilinear composition reproduces the linear second level") {
  std::mt19937 gen(7);
  std::normal_distribution<double> nd;
  std::vector<Mat> A(2, zeros(2, 2));
  for (auto& a : A)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) a(r, c) = nd(gen);
  Mat area(2, 2);
  area << 0.0, 0.7, -0.7, 0.0;
  for (const RoughPath& rp : {make_canonical_lift(circle_curve(1.0), make_grid(1.0, 9)), make_pure_area_lift(area, make_grid(1.0, 9))}) {
    const auto drv = linear_adapter(rp, A, 6);
    const Vec x = v2(0.3, -1.1), y = v2(2.0, 0.4);
    for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 64}, {3, 17}, {20, 21}}) {
      const Mat XX = rp.XX(i << 3, j << 3);
      const Vec dX = rp.dX(i << 3, j << 3);
      Vec oracle = zeros(2), w = zeros(2);
      for (int a = 0; a < 2; ++a) {
        w += dX(a) * A[static_cast<std::size_t>(a)] * x;
        for (int b = 0; b < 2; ++b) oracle += XX(a, b) * A[static_cast<std::size_t>(b)] * A[static_cast<std::size_t>(a)] * x;
      }
      CHECK((drv->W(i, j, x) - w).norm() < 1e-12);
      CHECK((drv->WW(i, j, x, y) - oracle).norm() < 1e-12);
    }
  }
}

TEST_CASE("smooth driver closed forms") {
  const TimeGrid g = make_grid(1.0, 6);
  SUBCASE("t x gives x (t - s)^2 / 2") {
    const auto drv = smooth_driver(linear_in_time(), g, 8);
    for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 64}, {5, 9}}) {
      const double h = g.span(i, j);
      CHECK(drv->WW(i, j, v1(1.7), v1(-3.0))(0) == doctest::Approx(1.7 * h * h / 2).epsilon(1e-13));
    }
  }
  SUBCASE("sin(t) g(x)") {
    const auto drv = smooth_driver(sine_product(), make_grid(3.0, 6), 8);
    const double x = 0.4, y = -1.3;
    for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 64}, {10, 41}, {7, 8}}) {
      const double s = drv->grid().times[i], t = drv->grid().times[j];
      const double integral = (std::sin(t) * std::sin(t) - std::sin(s) * std::sin(s)) / 2 - std::sin(s) * (std::sin(t) - std::sin(s));
      CHECK(std::abs(drv->WW(i, j, v1(x), v1(y))(0) - std::cos(y) * std::sin(x) * integral) < 1e-8);
    }
  }
  SUBCASE("space-free field has vanishing second level") {
    const auto drv = smooth_driver(space_free([](double t) { return std::sqrt(1 + t); }, [](double t) { return 0.5 / std::sqrt(1 + t); }), g);
    CHECK(drv->WW(0, 64, v1(1.0), v1(2.0)).norm() == 0.0);
  }
}

TEST_CASE("smooth and composition drivers agree for e^{xy}") {
  const SmoothCurve c = sine_curve(v1(0.8), 2.0, 0.3);
  const auto comp = composition_driver(exp_product_bundle(1), make_canonical_lift(c, make_grid(1.0, 16)), 10);
  const auto smooth = smooth_driver(field_from_bundle(exp_product_bundle(1), c), make_grid(1.0, 10), 8);
  double worst = 0.0;
  for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 1024}, {100, 612}, {512, 768}, {3, 4}})
    for (double x : {-0.7, 0.2, 1.1})
      for (double y : {-0.5, 0.9}) worst = std::max(worst, (comp->WW(i, j, v1(x), v1(y)) - smooth->WW(i, j, v1(x), v1(y))).norm());
  CHECK(worst < 1e-7);
}

TEST_CASE("nonlinear Chen residual") {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<PointPair> pairs;
  for (int q = 0; q < 50; ++q) pairs.emplace_back(v1(u(gen)), v1(u(gen)));
  const SmoothCurve c = sine_curve(v1(0.8), 2.0, 0.3);

  SUBCASE("composition driver") {
    const auto drv = composition_driver(exp_product_bundle(1), make_canonical_lift(c, make_grid(1.0, 10)), 8);
    const auto par = nl_chen_residual(*drv, pairs);
    CHECK(par.residual <= 1e-10);
    CHECK(par.triples == 50 * (255 + 255));
    drv->clear_cache();
    CHECK(nl_chen_residual_serial(*drv, pairs).residual == doctest::Approx(par.residual).epsilon(1e-6));
  }
  SUBCASE("smooth driver residual falls with the refine factor") {
    const std::vector<PointPair> few(pairs.begin(), pairs.begin() + 5);
    // Simpson error falls by about 16 per doubling
    double prev = 1e300;
    for (int refine : {2, 4, 8}) {
      const auto drv = smooth_driver(field_from_bundle(exp_product_bundle(1), c), make_grid(1.0, 6), refine);
      const double r = nl_chen_residual(*drv, few).residual;
      CHECK(r < prev / 8);
      prev = r;
    }
    CHECK(prev < 1e-7);
  }
  SUBCASE("injected defect is reported") {
    const auto drv = composition_driver(exp_product_bundle(1), make_canonical_lift(c, make_grid(1.0, 8)), 6);
    const std::vector<PointPair> one{pairs[0]};
    const double clean = nl_chen_residual(*drv, one).residual;
    const Vec good = drv->WW(16, 32, pairs[0].first, pairs[0].second);
    drv->inject(16, 32, pairs[0].first, pairs[0].second, good + v1(0.125));
    CHECK(nl_chen_residual(*drv, one).residual == doctest::Approx(0.125).epsilon(1e-9));
    CHECK(clean < 1e-12);
  }
}

TEST_CASE("weighted driver norm examples") {
  const TimeGrid g = make_grid(1.0, 6);
  SUBCASE("space-free field") {
    const auto drv = smooth_driver(space_free([](double t) { return t * t; }, [](double t) { return 2 * t; }), g);
    AnalysisParams p;
    p.alpha = 0.5;
    const auto rep = weighted_driver_norm(*drv, p, line_samples(-1, 1, 5), 1);
    const SampledPath a = sample_path(g, 1, [](double t) { return v1(t * t); });
    CHECK(rep.W_terms[0] == doctest::Approx(holder_seminorm(a, 0.5)).epsilon(1e-12));
    CHECK(rep.W_terms[1] == 0.0);
    CHECK(rep.WW_terms[0] == 0.0);
  }
  SUBCASE("t x with weight one on the value") {
    const auto drv = smooth_driver(linear_in_time(), g);
    AnalysisParams p;
    p.alpha = 1.0;
    p.beta = {1.0, 0.0, 0.0, 0.0};
    const auto rep = weighted_driver_norm(*drv, p, line_samples(-2, 2, 5), 1);
    CHECK(rep.W_terms[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(rep.W_terms[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.total == doctest::Approx(rep.W_norm + rep.WW_norm));
  }
  SUBCASE("sin(t) sin(x) terms bounded by the time factor") {
    const auto drv = smooth_driver(sine_product(), g);
    AnalysisParams p;
    p.alpha = 0.5;
    const auto rep = weighted_driver_norm(*drv, p, line_samples(-3, 3, 13), 3);
    const double sin_norm = holder_seminorm(sample_path(g, 1, [](double t) { return v1(std::sin(t)); }), 0.5);
    for (double term : rep.W_terms) CHECK(term <= sin_norm * (1 + 1e-12));
  }
  SUBCASE("Chen scan matches direct second-level evaluation") {
    const auto drv = smooth_driver(sine_product(), g);
    AnalysisParams p;
    p.alpha = 0.4;
    const auto rep = weighted_driver_norm(*drv, p, {v1(0.7)}, 1);
    double direct = 0.0;
    for (std::size_t i = 0; i < 64; ++i)
      for (std::size_t j = i + 1; j <= 64; ++j)
        direct = std::max(direct, drv->WW(i, j, v1(0.7), v1(0.7)).norm() / std::pow(g.span(i, j), 0.8));
    CHECK(rep.WW_terms[0] == doctest::Approx(direct).epsilon(1e-6));
  }
  SUBCASE("unsupported order") {
    const auto drv = smooth_driver(sine_product(), g);
    CHECK_THROWS_AS(weighted_driver_norm(*drv, AnalysisParams{}, {v1(0.0)}, 4), ValidationError);
    CHECK_THROWS_AS(weighted_driver_norm(*drv, AnalysisParams{}, {}, 1), ValidationError);
  }
}

TEST_CASE("Taylor remainders") {
  const TimeGrid g = make_grid(1.0, 5);
  AnalysisParams p;
  p.alpha = 1.0;
  SUBCASE("t x^2") {
    const auto drv = smooth_driver(quadratic(), g);
    const auto norms = weighted_driver_norm(*drv, p, line_samples(-2, 2, 9), 3);
    const auto r = taylor_remainder_phi(*drv, norms, p, 4, 20, v1(0.5), v1(-1.0), v1(0.3), v1(0.2));
    const double h = g.span(4, 20);
    CHECK(r.value == doctest::Approx(h * 2.25).epsilon(1e-12));
    CHECK(r.holds);
    CHECK(r.deriv_holds);
  }
  SUBCASE("linear in space") {
    const auto drv = smooth_driver(linear_in_time(), g);
    const auto norms = weighted_driver_norm(*drv, p, line_samples(-2, 2, 5), 3);
    CHECK(taylor_remainder_phi(*drv, norms, p, 0, 32, v1(-1.0), v1(1.5), v1(1.0), v1(1.0)).value == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  }
  SUBCASE("space-free second level") {
    const auto drv = smooth_driver(space_free([](double t) { return t; }, [](double) { return 1.0; }), g);
    const auto norms = weighted_driver_norm(*drv, p, line_samples(-2, 2, 5), 2);
    CHECK(taylor_remainder_psi(*drv, norms, p, 0, 32, {v1(0), v1(1)}, {v1(2), v1(-1)}).value == 0.0);
  }
  SUBCASE("random draws satisfy the bounds") {
    const auto drv = composition_driver(exp_product_bundle(1), make_canonical_lift(sine_curve(v1(0.8), 2.0, 0.3), make_grid(1.0, 7)), 5);
    AnalysisParams q;
    q.alpha = 0.5;
    q.beta = {1.0, 1.0, 1.0, 1.0};
    const auto samples = line_samples(-1, 1, 41);
    const auto norms = weighted_driver_norm(*drv, q, samples, 3);
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<std::size_t> idx(0, 32);
    int bad = 0;
    for (int k = 0; k < 100; ++k) {
      std::size_t i = idx(gen), j = idx(gen);
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      const auto r = taylor_remainder_phi(*drv, norms, q, i, j, v1(u(gen)), v1(u(gen)), v1(u(gen)), v1(u(gen)));
      const auto s = taylor_remainder_psi(*drv, norms, q, i, j, {v1(u(gen)), v1(u(gen))}, {v1(u(gen)), v1(u(gen))});
      bad += !r.holds + !r.deriv_holds + !s.holds;
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("finite-difference bundle matches analytic partials") {
  for (const FBundle& f : {exp_product_bundle(1), rotation_bundle(2)}) {
    const FBundle fd = finite_difference_bundle("fd", f.path_dim, f.space_dim, [f](const Vec& z, const Vec& y) { return f.value(z, y); });
    const Vec z = f.path_dim == 1 ? v1(0.4) : v2(0.4, -0.2);
    const Vec y = f.space_dim == 1 ? v1(-0.6) : v2(-0.6, 0.9);
    for (int j = 0; j <= 2; ++j)
      for (int k = 0; j + k <= 3; ++k) {
        const Tensor a = f.eval(j, k, z, y), b = fd.eval(j, k, z, y);
        REQUIRE(a.size() == b.size());
        double err = 0.0;
        for (std::size_t q = 0; q < a.size(); ++q) err = std::max(err, std::abs(a[q] - b[q]));
        INFO(f.name << " j=" << j << " k=" << k);
        CHECK(err < 1e-3);
      }
  }
}
