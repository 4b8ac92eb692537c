#include <cmath>
#include <random>

#include "doctest.h"
#include "roughkit/constants.hpp"
#include "roughkit/grid.hpp"
#include "roughkit/seminorm.hpp"

using namespace roughkit;

namespace {

Vec scalar(double v) {
  Vec x(1);
  x << v;
  return x;
}

}  // namespace

TEST_CASE("make_grid builds dyadic points") {
  auto g = make_grid(1.0, 3);
  REQUIRE(g.size() == 9);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(g.times[k] == doctest::Approx(k / 8.0));
  auto g2 = make_grid(2.0, 1);
  CHECK(g2.times == std::vector<double>{0.0, 1.0, 2.0});
  CHECK(make_grid(1.0, 0).times == std::vector<double>{0.0, 1.0});
  CHECK_THROWS_AS(make_grid(0.0, 3), ValidationError);
  CHECK_THROWS_AS(make_grid(1.0, 25), ValidationError);
}

TEST_CASE("holder seminorm examples") {
  auto g = make_grid(1.0, 6);
  auto lin = sample_path(g, 1, [](double t) { return scalar(t); });
  CHECK(holder_seminorm(lin, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  auto cst = sample_path(g, 1, [](double) { return scalar(3.0); });
  CHECK(holder_seminorm(cst, 0.4) == 0.0);
  auto root = sample_path(g, 1, [](double t) { return scalar(std::sqrt(t)); });
  CHECK(holder_seminorm(root, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("holder seminorm is monotone under refinement") {
  auto f = [](double t) { return scalar(std::sin(7.0 * t) + std::sqrt(std::abs(t - 0.3))); };
  double prev = 0.0;
  for (int L = 3; L <= 11; ++L) {
    const double v = holder_seminorm(sample_path(make_grid(1.0, L), 1, f), 0.45);
    CHECK(v >= prev - 1e-15);
    prev = v;
  }
}

TEST_CASE("parallel and serial pair scans agree") {
  auto g = make_grid(1.0, 11);
  auto p = sample_path(g, 2, [](double t) {
    Vec v(2);
    v << std::sin(40 * t), std::cos(13 * t);
    return v;
  });
  auto score = [&](std::size_t i, std::size_t j) { return p.inc(i, j).norm() / std::pow(g.span(i, j), 0.4); };
  for (auto b : {PairBudget::all, PairBudget::dyadic_spans})
    CHECK(max_over_pairs(0, g.size() - 1, b, score) == max_over_pairs_serial(0, g.size() - 1, b, score));
}

TEST_CASE("sewing constant values") {
  CHECK(k_alpha(0.5) == doctest::Approx(1.0 / (1.0 - std::pow(2.0, -0.5))).epsilon(1e-14));
  CHECK(k_alpha(0.5) == doctest::Approx(3.41421).epsilon(1e-5));
  CHECK(k_alpha(0.4) == doctest::Approx(7.7251).epsilon(1e-4));
  CHECK(k_alpha(0.34) > k_alpha(0.5));
  double prev = k_alpha(0.3401);
  for (double a = 0.35; a <= 0.5; a += 0.01) {
    CHECK(k_alpha(a) < prev);
    prev = k_alpha(a);
  }
  CHECK(k_alpha(1.0 / 3.0 + 1e-9) > 1e6);
}

TEST_CASE("hypothesis H boundary and exponents") {
  AnalysisParams p;
  p.alpha = 0.4;
  p.beta = {0.4, 0.0, 0.0, 0.0};
  CHECK(p.gamma2() == doctest::Approx(0.4));
  CHECK(hypothesis_value(p) == doctest::Approx(1.0));
  CHECK(bound_constants(p, 1.0, 1.0).hypothesis_H_holds);
  p.beta = {2, 2, 2, 2};
  CHECK(p.gamma2() == doctest::Approx(6.0));
  CHECK(hypothesis_value(p) == doctest::Approx(11.0));
  CHECK_FALSE(bound_constants(p, 1.0, 1.0).hypothesis_H_holds);
}

TEST_CASE("hypothesis predicate matches direct arithmetic on random draws") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> a(0.3334, 0.5), b(0.0, 1.0);
  for (int n = 0; n < 100; ++n) {
    AnalysisParams p;
    p.alpha = a(rng);
    for (auto& x : p.beta) x = b(rng);
    const double g2 = std::max({p.beta[0], p.beta[1], p.beta[2]}) + std::max({p.beta[1], p.beta[2], p.beta[3]}) + p.beta[1];
    const bool expect = g2 / p.alpha - g2 + p.beta[0] <= 1.0 + 1e-12;
    CHECK(bound_constants(p, 1.3, 0.7).hypothesis_H_holds == expect);
    CHECK(p.gamma1() <= p.gamma2() + 1e-15);
  }
}

TEST_CASE("step sizes are ordered") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> a(0.34, 0.5), b(0.0, 2.0), w(0.0, 20.0);
  for (int n = 0; n < 200; ++n) {
    AnalysisParams p;
    p.alpha = a(rng);
    for (auto& x : p.beta) x = b(rng);
    auto c = bound_constants(p, w(rng), w(rng));
    CHECK(c.h2 <= c.h1);
    CHECK(c.h1 <= 1.0);
    CHECK(c.h2 > 0.0);
  }
}
