#include "roughkit/driver_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace roughkit {

namespace {

double frob(const Tensor& t) {
  double s = 0.0;
  for (double v : t) s += v * v;
  return std::sqrt(s);
}

struct Triple {
  std::size_t i, u, j;
};

std::vector<Triple> chen_triples(std::size_t N) {
  std::vector<Triple> out;
  for (std::size_t span = 2; span <= N; span <<= 1)
    for (std::size_t i = 0; i + span <= N; i += span) out.push_back({i, i + span / 2, i + span});
  for (std::size_t k = 0; k + 2 <= N; ++k) out.push_back({k, k + 1, k + 2});
  return out;
}

double triple_residual(const NonlinearDriver& drv, const Triple& t, const PointPair& p) {
  const Vec lhs = drv.WW(t.i, t.j, p.first, p.second) - drv.WW(t.i, t.u, p.first, p.second) -
                  drv.WW(t.u, t.j, p.first, p.second);
  const Vec rhs = drv.DW(t.u, t.j, p.second) * drv.W(t.i, t.u, p.first);
  return (lhs - rhs).norm();
}

NLChenReport chen_impl(const NonlinearDriver& drv, const std::vector<PointPair>& pairs, bool parallel) {
  const std::size_t N = drv.grid().intervals();
  require(N >= 2, "nl_chen_residual: need at least 3 grid points");
  require(!pairs.empty(), "nl_chen_residual: empty spatial pairs");
  const auto triples = chen_triples(N);
  const long total = static_cast<long>(triples.size() * pairs.size());
  double worst = 0.0, scale = 0.0;
#pragma omp parallel for schedule(dynamic, 16) reduction(max : worst, scale) if (parallel)
  for (long q = 0; q < total; ++q) {
    const auto& t = triples[static_cast<std::size_t>(q) % triples.size()];
    const auto& p = pairs[static_cast<std::size_t>(q) / triples.size()];
    worst = std::max(worst, triple_residual(drv, t, p));
    scale = std::max(scale, drv.WW(t.i, t.j, p.first, p.second).norm());
  }
  return {worst, std::max(1.0, scale), static_cast<std::size_t>(total)};
}

// Second level and its spatial derivatives on consecutive base intervals for a fixed point pair.
struct Leaves {
  std::vector<Vec> WW, Wx, Wpath;   // WW_k(x, y), W_k(x), W_{0,k}(x)
  std::vector<Mat> Dx, Dy, DWy, DWx_path;
  std::vector<Tensor> D2Wy;
};

Leaves collect(const NonlinearDriver& drv, const Vec& x, const Vec& y) {
  const std::size_t N = drv.grid().intervals(), n = drv.dim();
  Leaves L;
  L.WW.resize(N); L.Wx.resize(N); L.Dx.resize(N); L.Dy.resize(N); L.DWy.resize(N); L.D2Wy.resize(N);
  L.Wpath.assign(N + 1, zeros(n));
  L.DWx_path.assign(N + 1, zeros(n, n));
  for (std::size_t k = 0; k < N; ++k) {
    L.WW[k] = drv.WW(k, k + 1, x, y);
    L.Dx[k] = drv.DxWW(k, k + 1, x, y);
    L.Dy[k] = drv.DyWW(k, k + 1, x, y);
    L.DWy[k] = drv.DW(k, k + 1, y);
    L.D2Wy[k] = drv.DkW(k, k + 1, y, 2);
    L.Wpath[k + 1] = L.Wpath[k] + drv.W(k, k + 1, x);
    L.DWx_path[k + 1] = L.DWx_path[k] + drv.DW(k, k + 1, x);
  }
  return L;
}

// Chen extension of the second level from a fixed start across base intervals.
struct ChenAcc {
  Vec ww;
  Mat dx, dy;
  explicit ChenAcc(std::size_t n) : ww(zeros(n)), dx(zeros(n, n)), dy(zeros(n, n)) {}

  void step(const Leaves& L, std::size_t n, std::size_t i, std::size_t j) {
    const Vec w = L.Wpath[j] - L.Wpath[i];
    const Mat dw = L.DWx_path[j] - L.DWx_path[i];
    ww += L.WW[j] + L.DWy[j] * w;
    dx += L.Dx[j] + L.DWy[j] * dw;
    const Tensor& T = L.D2Wy[j];
    dy += L.Dy[j];
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) dy(r, b) += T[(r * n + a) * n + b] * w(a);
  }
};

// Scans the end points i+1..end; with a second set of leaves the score sees the difference.
template <class Score>
void scan_from(const Leaves& L, const Leaves* M, std::size_t n, std::size_t i, std::size_t end, Score&& score) {
  ChenAcc a(n), b(n);
  for (std::size_t j = i; j < end; ++j) {
    a.step(L, n, i, j);
    if (M) {
      b.step(*M, n, i, j);
      score(j + 1, a.ww - b.ww, a.dx - b.dx, a.dy - b.dy);
    } else {
      score(j + 1, a.ww, a.dx, a.dy);
    }
  }
}

std::size_t stride_for(std::size_t N, PairBudget budget) {
  if (scans_all_pairs(N + 1, budget)) return 0;
  std::size_t s = 1;
  while (N / s + 1 > kAllPairsLimit) s <<= 1;
  return s;
}

// Coarsens leaves by Chen so that a lattice with the given stride is scanned exactly.
Leaves coarsen_leaves(const Leaves& L, std::size_t n, std::size_t s) {
  const std::size_t N = L.WW.size(), M = N / s;
  Leaves C;
  C.WW.resize(M); C.Dx.resize(M); C.Dy.resize(M); C.DWy.resize(M); C.D2Wy.resize(M);
  C.Wpath.resize(M + 1); C.DWx_path.resize(M + 1);
  for (std::size_t m = 0; m <= M; ++m) {
    C.Wpath[m] = L.Wpath[m * s];
    C.DWx_path[m] = L.DWx_path[m * s];
  }
  for (std::size_t m = 0; m < M; ++m) {
    const std::size_t a = m * s;
    scan_from(L, nullptr, n, a, a + s, [&](std::size_t j, const Vec& ww, const Mat& dx, const Mat& dy) {
      if (j != a + s) return;
      C.WW[m] = ww; C.Dx[m] = dx; C.Dy[m] = dy;
    });
    Mat dwy = zeros(n, n);
    Tensor d2(L.D2Wy[a].size(), 0.0);
    for (std::size_t k = a; k < a + s; ++k) {
      dwy += L.DWy[k];
      for (std::size_t q = 0; q < d2.size(); ++q) d2[q] += L.D2Wy[k][q];
    }
    C.DWy[m] = dwy;
    C.D2Wy[m] = d2;
  }
  return C;
}

}  // namespace

NLChenReport nl_chen_residual(const NonlinearDriver& drv, const std::vector<PointPair>& pairs) {
  return chen_impl(drv, pairs, true);
}

NLChenReport nl_chen_residual_serial(const NonlinearDriver& drv, const std::vector<PointPair>& pairs) {
  return chen_impl(drv, pairs, false);
}

namespace {

Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor out(a);
  for (std::size_t q = 0; q < out.size(); ++q) out[q] -= b[q];
  return out;
}

DriverNormReport norm_impl(const NonlinearDriver& drv, const NonlinearDriver* other, const AnalysisParams& p,
                           const std::vector<Vec>& samples, int order, PairBudget budget, bool second_level) {
  require(!samples.empty(), "weighted_driver_norm: empty spatial samples");
  require(order >= 0 && order <= drv.max_order(), "weighted_driver_norm: derivative order unsupported by the driver");
  for (const auto& x : samples) require(static_cast<std::size_t>(x.size()) == drv.dim(), "weighted_driver_norm: sample dimension");
  const TimeGrid& g = drv.grid();
  const std::size_t N = g.intervals(), n = drv.dim();
  const double a = p.alpha;

  DriverNormReport out;
  out.order = order;
  for (int k = 0; k <= order; ++k) {
    double best = 0.0;
    for (const auto& x : samples) {
      const double w = std::pow(1.0 + x.norm(), p.beta[static_cast<std::size_t>(k)]);
      const double s = max_over_pairs(0, N, budget, [&](std::size_t i, std::size_t j) {
        const Tensor d = other ? sub(drv.DkW(i, j, x, k), other->DkW(i, j, x, k)) : drv.DkW(i, j, x, k);
        return frob(d) / std::pow(g.span(i, j), a);
      });
      best = std::max(best, s / w);
    }
    out.W_terms[static_cast<std::size_t>(k)] = best;
    out.W_norm += best;
  }

  if (order >= 1 && second_level) {
    const bool with_deriv = order >= 2;
    const std::size_t stride = stride_for(N, budget);
    const std::size_t S = samples.size();
    double t0 = 0.0, t1 = 0.0;
    const long total = static_cast<long>(S * S);
#pragma omp parallel for schedule(dynamic) reduction(max : t0, t1)
    for (long q = 0; q < total; ++q) {
      const Vec& x = samples[static_cast<std::size_t>(q) / S];
      const Vec& y = samples[static_cast<std::size_t>(q) % S];
      const double w0 = std::pow(1.0 + x.norm(), p.beta_star(0)) * std::pow(1.0 + y.norm(), p.beta_star2(0));
      const double w1 = std::pow(1.0 + x.norm(), p.beta_star(1)) * std::pow(1.0 + y.norm(), p.beta_star2(1));
      auto scan = [&](const Leaves& L, const Leaves* B, const std::vector<double>& times, std::size_t reach) {
        const std::size_t M = L.WW.size();
        for (std::size_t i = 0; i < M; ++i)
          scan_from(L, B, n, i, std::min(M, i + reach), [&](std::size_t j, const Vec& ww, const Mat& dx, const Mat& dy) {
            const double h = std::pow(std::abs(times[j] - times[i]), 2.0 * a);
            t0 = std::max(t0, ww.norm() / (h * w0));
            if (with_deriv) t1 = std::max(t1, std::sqrt(dx.squaredNorm() + dy.squaredNorm()) / (h * w1));
          });
      };
      const Leaves L = collect(drv, x, y);
      std::optional<Leaves> B;
      if (other) B = collect(*other, x, y);
      if (stride == 0) {
        scan(L, B ? &*B : nullptr, g.times, N);
      } else {
        scan(L, B ? &*B : nullptr, g.times, stride);
        std::vector<double> coarse;
        for (std::size_t m = 0; m <= N / stride; ++m) coarse.push_back(g.times[m * stride]);
        const Leaves C = coarsen_leaves(L, n, stride);
        std::optional<Leaves> CB;
        if (B) CB = coarsen_leaves(*B, n, stride);
        scan(C, CB ? &*CB : nullptr, coarse, N);
      }
    }
    out.WW_terms = {t0, t1};
    out.WW_norm = t0 + t1;
  }
  out.total = out.W_norm + out.WW_norm;
  return out;
}

}  // namespace

DriverNormReport weighted_driver_norm(const NonlinearDriver& drv, const AnalysisParams& p, const std::vector<Vec>& samples,
                                      int order, PairBudget budget, bool second_level) {
  return norm_impl(drv, nullptr, p, samples, order, budget, second_level);
}

DriverNormReport driver_distance(const NonlinearDriver& a, const NonlinearDriver& b, const AnalysisParams& p,
                                 const std::vector<Vec>& samples, int order, PairBudget budget, bool second_level) {
  require(a.dim() == b.dim() && a.grid().times == b.grid().times, "driver_distance: drivers live on different grids");
  require(order <= b.max_order(), "driver_distance: derivative order unsupported by the driver");
  return norm_impl(a, &b, p, samples, order, budget, second_level);
}

TaylorReport taylor_remainder_phi(const NonlinearDriver& drv, const DriverNormReport& norms, const AnalysisParams& p,
                                  std::size_t i, std::size_t j, const Vec& x, const Vec& y, const Vec& z1, const Vec& z2) {
  require(norms.order >= 2, "taylor_remainder: the value bound needs derivatives to order 2");
  const std::size_t n = drv.dim();
  const double h = std::pow(drv.grid().span(i, j), p.alpha);
  const double base = 1.0 + x.norm() + y.norm();
  const Vec d = y - x;
  const Mat Dx = drv.DW(i, j, x);

  TaylorReport r;
  r.value = (drv.W(i, j, y) - drv.W(i, j, x) - Dx * d).norm();
  const double norm2 = norms.W_terms[0] + norms.W_terms[1] + norms.W_terms[2];
  r.bound = 0.5 * norm2 * std::pow(base, p.beta[2]) * d.squaredNorm() * h;
  r.holds = r.value <= r.bound * (1.0 + 1e-9) + 1e-14;

  if (norms.order >= 3) {
    // D R(x, y)(z1, z2) = DW(y) z2 - DW(x) z2 - D^2 W(x)(z1, y - x)
    const Tensor T = drv.DkW(i, j, x, 2);
    Vec second = zeros(n);
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) second(q) += T[(q * n + a) * n + b] * z1(a) * d(b);
    r.deriv_value = (drv.DW(i, j, y) * z2 - Dx * z2 - second).norm();
    const double norm3 = norm2 + norms.W_terms[3];
    r.deriv_bound = norm3 * std::pow(base, std::max(p.beta[2], p.beta[3])) *
                    (d.squaredNorm() * z2.norm() + d.norm() * (z1 - z2).norm()) * h;
    r.deriv_holds = r.deriv_value <= r.deriv_bound * (1.0 + 1e-9) + 1e-14;
  }
  return r;
}

TaylorReport taylor_remainder_psi(const NonlinearDriver& drv, const DriverNormReport& norms, const AnalysisParams& p,
                                  std::size_t i, std::size_t j, const PointPair& x, const PointPair& y) {
  require(norms.order >= 2, "taylor_remainder: the second-level bound needs one spatial derivative");
  const double h = std::pow(drv.grid().span(i, j), 2.0 * p.alpha);
  TaylorReport r;
  r.value = (drv.WW(i, j, y.first, y.second) - drv.WW(i, j, x.first, x.second)).norm();
  const double dist = (y.first - x.first).norm() + (y.second - x.second).norm();
  r.bound = norms.WW_norm * std::pow(1.0 + x.first.norm() + y.first.norm(), p.beta_star(1)) *
            std::pow(1.0 + x.second.norm() + y.second.norm(), p.beta_star2(1)) * dist * h;
  r.holds = r.value <= r.bound * (1.0 + 1e-9) + 1e-14;
  return r;
}

}  // namespace roughkit
