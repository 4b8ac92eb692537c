#include "roughkit/rde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace roughkit {

std::string to_string(RDEMode m) { return m == RDEMode::picard ? "picard" : "onestep"; }

RDEMode parse_rde_mode(const std::string& s) {
  if (s == "picard") return RDEMode::picard;
  if (s == "onestep") return RDEMode::onestep;
  throw ValidationError("unknown rde mode '" + s + "'");
}

namespace {

using Path = std::vector<Vec>;

void require_finite(const Vec& v, double t) {
  if (!v.allFinite()) throw ConvergenceError("rde: non-finite state at t = " + std::to_string(t));
}

std::size_t intervals_for(double length, double mesh) {
  const double q = std::floor(length / mesh * (1.0 + 1e-12));
  if (!(q >= 1.0)) return 1;
  return q > 1e15 ? std::numeric_limits<std::size_t>::max() / 2 : static_cast<std::size_t>(q);
}

// int W(dr, Y) over the window from the germ on consecutive grid intervals.
Path window_integral(const NonlinearDriver& drv, std::size_t i0, const Vec& xi, const Path& Y, const Path& Ydot) {
  Path out(Y.size());
  out[0] = xi;
  for (std::size_t k = 0; k + 1 < Y.size(); ++k) {
    const std::size_t m = i0 + k;
    out[k + 1] = out[k] + drv.W(m, m + 1, Y[k]) + drv.WW(m, m + 1, Ydot[k], Y[k]);
    require_finite(out[k + 1], drv.grid().times[m + 1]);
  }
  return out;
}

// d between (Y1, Y0) and (Y0, Ym) on the window: |Y0 - Ym|_alpha + |R1 - R0|_2alpha.
double iterate_distance(const NonlinearDriver& drv, std::size_t i0, double alpha, const Path& Y1, const Path& Y0,
                        const Path& Ym) {
  const auto& t = drv.grid().times;
  const std::size_t hi = Y1.size() - 1;
  const double dot = max_over_pairs(0, hi, PairBudget::automatic, [&](std::size_t i, std::size_t j) {
    return ((Y0[j] - Ym[j]) - (Y0[i] - Ym[i])).norm() / std::pow(t[i0 + j] - t[i0 + i], alpha);
  });
  const double rem = max_over_pairs(0, hi, PairBudget::automatic, [&](std::size_t i, std::size_t j) {
    const Vec r1 = Y1[j] - Y1[i] - drv.W(i0 + i, i0 + j, Y0[i]);
    const Vec r0 = Y0[j] - Y0[i] - drv.W(i0 + i, i0 + j, Ym[i]);
    return (r1 - r0).norm() / std::pow(t[i0 + j] - t[i0 + i], 2.0 * alpha);
  });
  return dot + rem;
}

Path picard_window(const NonlinearDriver& drv, std::size_t i0, std::size_t i1, const Vec& xi, const RDEOptions& opt,
                   WindowInfo& info) {
  const std::size_t w = i1 - i0;
  Path prev(w + 1, xi), cur(w + 1);
  for (std::size_t k = 0; k <= w; ++k) cur[k] = xi + drv.W(i0, i0 + k, xi);
  int bad = 0;
  for (int n = 0; n < opt.max_iter; ++n) {
    Path next = window_integral(drv, i0, xi, cur, prev);
    const double d = iterate_distance(drv, i0, opt.params.alpha, next, cur, prev);
    if (!std::isfinite(d)) throw ConvergenceError("rde: non-finite Picard distance");
    if (!info.distances.empty()) {
      const double last = info.distances.back();
      const double f = last > 0.0 ? d / last : 0.0;
      info.factors.push_back(f);
      bad = f >= 1.0 && d > opt.tol ? bad + 1 : 0;
      if (bad >= 3) throw ConvergenceError("rde: Picard iteration does not contract on window starting at t = " +
                                           std::to_string(drv.grid().times[i0]));
    }
    info.distances.push_back(d);
    info.iterations = n + 1;
    prev = std::move(cur);
    cur = std::move(next);
    if (d < opt.tol) break;
  }
  return cur;
}

// Y_{k+1} = Y_k + W(Y_k) + WW(Y_k, Y_k) on steps of `stride` base intervals.
std::vector<Vec> onestep(const NonlinearDriver& drv, const Vec& xi, std::size_t end, std::size_t stride) {
  std::vector<Vec> Y{xi};
  for (std::size_t k = 0; k + stride <= end; k += stride) {
    const Vec& y = Y.back();
    Vec next = y + drv.W(k, k + stride, y) + drv.WW(k, k + stride, y, y);
    require_finite(next, drv.grid().times[k + stride]);
    Y.push_back(std::move(next));
  }
  return Y;
}

}  // namespace

double driver_norm_around(const NonlinearDriver& drv, const AnalysisParams& p, const Vec& xi) {
  std::vector<Vec> samples{xi};
  const double r = 1.0 + xi.norm();
  for (Eigen::Index c = 0; c < xi.size(); ++c) {
    Vec e = zeros(static_cast<std::size_t>(xi.size()));
    e[c] = r;
    samples.push_back(xi + e);
    samples.push_back(xi - e);
  }
  const DriverNormReport n = weighted_driver_norm(drv, p, samples, std::min(3, drv.max_order()));
  double total = n.WW_norm;
  for (int k = 0; k <= n.order; ++k) total += n.W_terms[static_cast<std::size_t>(k)];
  return total;
}

RDESolution solve_rde(const DriverPtr& drv, const Vec& xi, const RDEOptions& opt) {
  require(drv != nullptr, "rde: missing driver");
  opt.params.validate();
  require(static_cast<std::size_t>(xi.size()) == drv->dim(), "rde: initial value has the wrong dimension");
  require(xi.allFinite(), "rde: initial value must be finite");
  require(opt.tol > 0.0 && opt.max_iter > 0, "rde: tolerance and iteration cap must be positive");
  const TimeGrid& g = drv->grid();
  require(std::abs(g.T - opt.params.T) <= 1e-12 * std::max(1.0, g.T), "rde: params.T differs from the driver horizon");
  const std::size_t N = g.intervals();
  const double mesh = g.mesh();

  RDEDiagnostics diag;
  const double norm = opt.driver_norm ? *opt.driver_norm : driver_norm_around(*drv, opt.params, xi);
  require(norm >= 0.0 && std::isfinite(norm), "rde: driver norm must be finite and nonnegative");
  diag.constants = bound_constants(opt.params, norm, xi.norm());

  std::size_t end = N;
  if (opt.global) {
    if (!diag.constants.hypothesis_H_holds)
      throw HypothesisError("rde: hypothesis H fails (value " + std::to_string(diag.constants.hypothesis_value) +
                            " > 1); global solution refused");
  } else {
    end = std::min(N, intervals_for(diag.constants.h1, mesh));
    diag.warning = "local mode: solution computed on [0, " + std::to_string(g.times[end]) + "] only";
  }
  diag.last_index = end;

  SampledPath Y(g, drv->dim());
  if (opt.mode == RDEMode::onestep) {
    const auto path = onestep(*drv, xi, end, 1);
    for (std::size_t k = 0; k <= end; ++k) Y.set(k, path[k]);
    if (opt.self_check && end >= 2) {
      const auto half = onestep(*drv, xi, end, 2);
      for (std::size_t k = 0; k < half.size(); ++k)
        diag.self_consistency = std::max(diag.self_consistency, (half[k] - path[2 * k]).norm());
    }
  } else {
    Y.set(0, xi);
    std::size_t i0 = 0;
    double prev_eps = 0.0;
    while (i0 < end) {
      WindowInfo info;
      const Vec start = Y.at(i0);
      info.xi_norm = start.norm();
      info.eps = window_length(diag.constants, opt.params.alpha, info.xi_norm);
      if (!diag.windows.empty())
        info.harmonic_ok = info.eps >= (1.0 - 1e-12) / (1.0 / prev_eps + diag.constants.K0);
      prev_eps = info.eps;
      const std::size_t w = opt.window_intervals > 0 ? opt.window_intervals : intervals_for(info.eps, mesh);
      info.i0 = i0;
      info.i1 = i0 + std::min(w, end - i0);
      const Path path = picard_window(*drv, info.i0, info.i1, start, opt, info);
      for (std::size_t k = 1; k < path.size(); ++k) Y.set(info.i0 + k, path[k]);
      i0 = info.i1;
      diag.windows.push_back(std::move(info));
    }
  }
  for (std::size_t k = end + 1; k <= N; ++k) Y.set(k, Y.at(end));
  diag.holder_norm = holder_seminorm(Y, opt.params.alpha, 0, end);

  SampledPath Ydot = Y;
  return {make_nl_controlled(drv, std::move(Y), std::move(Ydot)), std::move(diag)};
}

AprioriReport apriori_report(const RDESolution& sol, const AnalysisParams& p, const Vec& xi) {
  p.validate();
  const ConstantsReport& c = sol.diag.constants;
  const TimeGrid& g = sol.Y.Y.grid;
  const double W = c.driver_norm, x = xi.norm();
  const double g1 = p.gamma1(), g2 = p.gamma2(), g1f = std::max(g1, 1.0);
  AprioriReport r;

  const std::size_t end = std::max<std::size_t>(sol.diag.last_index, 1);
  const std::size_t ih = std::min(end, intervals_for(std::min(c.h2, c.h1), g.mesh()));
  r.local_norm = holder_seminorm(sol.Y.Y, p.alpha, 0, ih);
  const double first = std::pow(1.0 + 1.0 / (6.0 * g1f), 1.0 + p.beta[0]) * (1.0 + W) * pow0(1.0 + x, p.beta[0]);
  const double second = g1 > 0.0 ? 2.0 * c.k_alpha * std::pow((1.0 + g1) / g1, 1.0 + g1) * W * std::pow(1.0 + 2.0 * x, g1)
                                 : std::numeric_limits<double>::infinity();
  r.local_bound = std::min(first, second);
  r.local_holds = r.local_norm <= r.local_bound * (1.0 + 1e-9);
  r.margin = r.local_norm > 0.0 ? r.local_bound / r.local_norm : std::numeric_limits<double>::infinity();

  // Exponents 2 gamma1 / gamma2 and alpha gamma1 K0 T / gamma2 vanish with gamma1.
  const double ratio = g1 > 0.0 ? g1 / g2 : 0.0;
  r.global_norm = holder_seminorm(sol.Y.Y, p.alpha, 0, end);
  r.global_form = W * std::pow(1.0 + W, 2.0 * ratio) * pow0(1.0 + x, g1) * std::exp(p.alpha * ratio * c.K0 * g.times[end]);
  r.global_bound = kGrowthConstant * r.global_form;
  r.global_holds = r.global_norm <= r.global_bound * (1.0 + 1e-9);
  return r;
}

SensitivityReport sensitivity_report(const DriverPtr& drv, const Vec& xi, const Vec& xi_tilde, const RDEOptions& opt) {
  require(xi.size() == xi_tilde.size(), "sensitivity: initial values differ in dimension");
  const RDESolution a = solve_rde(drv, xi, opt);
  RDEOptions o2 = opt;
  if (!o2.driver_norm) o2.driver_norm = a.diag.constants.driver_norm;
  const RDESolution b = solve_rde(drv, xi_tilde, o2);
  SensitivityReport r;
  r.d = nl_distance(a.Y, b.Y, opt.params.alpha);
  for (std::size_t k = 0; k < a.Y.Y.size(); ++k) r.sup_gap = std::max(r.sup_gap, (a.Y.Y.at(k) - b.Y.Y.at(k)).norm());
  const double gap = (xi - xi_tilde).norm();
  r.ratio = gap > 0.0 ? r.d / gap : 0.0;
  return r;
}

SensitivitySweep sensitivity_sweep(const DriverPtr& drv, const Vec& xi, const Vec& direction, const std::vector<double>& sizes,
                                   const RDEOptions& opt, double tol) {
  require(!sizes.empty(), "sensitivity: no perturbation sizes");
  require(direction.norm() > 0.0, "sensitivity: zero direction");
  RDEOptions o = opt;
  if (!o.driver_norm) o.driver_norm = driver_norm_around(*drv, opt.params, xi);
  SensitivitySweep s;
  s.sizes = sizes;
  const Vec u = direction / direction.norm();
  for (double h : sizes) s.ratios.push_back(sensitivity_report(drv, xi, xi + h * u, o).ratio);
  const auto smallest = std::min_element(sizes.begin(), sizes.end()) - sizes.begin();
  const double ref = s.ratios[static_cast<std::size_t>(smallest)];
  for (double r : s.ratios) s.spread = std::max(s.spread, ref > 0.0 ? std::abs(r - ref) / ref : std::abs(r));
  s.linear = s.spread <= tol;
  return s;
}

}  // namespace roughkit
