// Serial vs OpenMP timings for the parallel kernels. Usage: bench_kernels [reps]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "roughkit/driver_analysis.hpp"
#include "roughkit/fbundle.hpp"
#include "roughkit/flow_rpde.hpp"
#include "roughkit/parallel.hpp"
#include "roughkit/sewing.hpp"

using namespace roughkit;

namespace {

double best_of(int reps, const std::function<double()>& body, double& sink) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    sink += body();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-34s serial %9.4f s   parallel %9.4f s   speedup %5.2fx\n", name, serial, parallel, serial / parallel);
}

Vec vec2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::max(1, std::atoi(argv[1])) : 3;
  std::printf("threads: %d, best of %d\n", configure_threads(), reps);
  double sink = 0.0;

  {
    const TimeGrid g = make_grid(1.0, 10);
    const SampledPath p = sample_path(g, 2, [](double t) { return vec2(std::sin(40 * t), std::sqrt(t)); });
    const PairScore score = [&](std::size_t i, std::size_t j) { return p.inc(i, j).norm() / std::pow(g.times[j] - g.times[i], 0.45); };
    report("Holder pair scan (1025 points)", best_of(reps, [&] { return max_over_pairs_serial(0, g.size(), PairBudget::all, score); }, sink),
           best_of(reps, [&] { return max_over_pairs(0, g.size(), PairBudget::all, score); }, sink));
  }
  {
    Mat A(2, 2);
    A << 0.0, 0.6, -0.6, 0.0;
    const RoughPath rp = make_perturbed_lift(circle_curve(0.7), A, make_grid(1.0, 9));
    report("Chen triples (level 9)", best_of(reps, [&] { return chen_residual_serial(rp).residual; }, sink),
           best_of(reps, [&] { return chen_residual(rp).residual; }, sink));
  }
  {
    const auto drv = composition_driver(exp_product_bundle(2), make_canonical_lift(circle_curve(0.7), make_grid(1.0, 9)), 9);
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<PointPair> pairs;
    for (int q = 0; q < 20; ++q) pairs.emplace_back(vec2(u(gen), u(gen)), vec2(u(gen), u(gen)));
    report("nonlinear Chen (level 9, 20 pairs)", best_of(reps, [&] { drv->clear_cache(); return nl_chen_residual_serial(*drv, pairs).residual; }, sink),
           best_of(reps, [&] { drv->clear_cache(); return nl_chen_residual(*drv, pairs).residual; }, sink));
  }
  {
    const TimeGrid g = make_grid(1.0, 12);
    const Approximant xi = [&](std::size_t i, std::size_t j) {
      Vec v(1);
      const double s = g.times[i], t = g.times[j];
      v << std::cos(3 * s) * (std::sin(5 * t) - std::sin(5 * s));
      return v;
    };
    SewOptions serial, parallel;
    serial.parallel = false;
    report("sewing (level 12)", best_of(reps, [&] { return sew(g, 1, xi, 1.35, serial).J.at(g.size() - 1)[0]; }, sink),
           best_of(reps, [&] { return sew(g, 1, xi, 1.35, parallel).J.at(g.size() - 1)[0]; }, sink));
  }
  {
    Mat B1(2, 2), B2(2, 2), A = zeros(2, 2);
    B1 << 0.5, 0.2, -0.3, 0.4;
    B2 << -0.2, 0.5, 0.4, 0.1;
    A(0, 1) = 0.3;
    const auto drv = composition_driver(matrix_linear_bundle({B1, B2}), make_perturbed_lift(sine_curve(vec2(0.4, -0.2), 3.0, 0.2), A, make_grid(1.0, 9), 0), 9);
    FlowOptions o;
    o.rde.driver_norm = 1.0;
    const SpatialGrid space = make_spatial_grid(vec2(-1, -1), vec2(1, 1), 5);
    auto flow_time = [&](bool parallel) {
      o.parallel = parallel;
      return best_of(reps, [&] { auto f = solve_flow(drv, space, o); jacobians(f); return f.product_gap; }, sink);
    };
    const double s = flow_time(false);
    report("flow + Jacobians (5x5, level 9)", s, flow_time(true));
  }
  std::printf("checksum %.6g\n", sink);
  return 0;
}
