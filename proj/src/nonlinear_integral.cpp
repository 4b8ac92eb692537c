#include "roughkit/nonlinear_integral.hpp"

#include <algorithm>
#include <cmath>

namespace roughkit {

namespace {

double max_gap(const SampledPath& a, const SampledPath& b) {
  double g = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) g = std::max(g, (a.at(k) - b.at(k)).norm());
  return g;
}

SampledPath difference(const SampledPath& a, const SampledPath& b) {
  SampledPath out(a.grid, a.dim);
  for (std::size_t k = 0; k < a.size(); ++k) out.set(k, a.at(k) - b.at(k));
  return out;
}

// Norm of the driver with derivatives up to two and the second level up to one derivative.
double norm_C2(const DriverNormReport& r) { return r.W_terms[0] + r.W_terms[1] + r.W_terms[2] + r.WW_norm; }
double norm_C3(const DriverNormReport& r) { return norm_C2(r) + r.W_terms[3]; }

}  // namespace

Vec NLControlledPath::remainder(std::size_t i, std::size_t j) const { return Y.inc(i, j) - driver->W(i, j, Ydot.at(i)); }

TwoParamField NLControlledPath::remainder_field() const {
  TwoParamField f;
  f.grid = Y.grid;
  f.rows = Y.dim;
  f.eval = [this](std::size_t i, std::size_t j) -> Mat { return remainder(i, j); };
  return f;
}

NLControlledPath make_nl_controlled(DriverPtr drv, SampledPath Y, SampledPath Ydot) {
  require(drv != nullptr, "controlled path: missing driver");
  require(Y.grid.times == drv->grid().times && Ydot.grid.times == Y.grid.times, "controlled path: grid differs from the driver grid");
  require(Y.dim == drv->dim() && Ydot.dim == Y.dim, "controlled path: dimension differs from the driver");
  require(Y.finite() && Ydot.finite(), "controlled path: non-finite samples");
  return {std::move(Y), std::move(Ydot), std::move(drv)};
}

PathNorms path_norms(const NLControlledPath& y, double alpha) {
  PathNorms n;
  n.Y_sup = y.Y.sup_norm();
  n.Ydot_sup = y.Ydot.sup_norm();
  n.Y_alpha = holder_seminorm(y.Y, alpha);
  n.Ydot_alpha = holder_seminorm(y.Ydot, alpha);
  n.R_2alpha = holder_seminorm(y.remainder_field(), 2.0 * alpha);
  return n;
}

std::vector<Vec> path_samples(const NLControlledPath& y, std::size_t count) {
  std::vector<Vec> out;
  const std::size_t N = y.Y.size() - 1;
  for (std::size_t q = 0; q < count; ++q) {
    const std::size_t k = count == 1 ? 0 : q * N / (count - 1);
    out.push_back(y.Y.at(k));
    out.push_back(y.Ydot.at(k));
  }
  return out;
}

YoungResult nl_young_integral(const SmoothField& W, const std::function<Vec(double)>& Y, const TimeGrid& out,
                              const YoungOptions& opt) {
  require(opt.extra_levels >= 0 && opt.max_extra >= opt.extra_levels, "young: bad refinement range");
  require(out.level + opt.max_extra <= 26, "young: refinement too deep");
  const std::size_t n = W.dim, N = out.intervals();
  std::vector<std::vector<SampledPath>> table;  // table[e][r]
  YoungResult res;
  SampledPath best;
  for (int e = opt.extra_levels; e <= opt.max_extra; ++e) {
    const std::size_t sub = std::size_t(1) << e, M = N * sub;
    const double h = out.T / static_cast<double>(M);
    std::vector<double> inc(M * n);
#pragma omp parallel for schedule(static)
    for (long q = 0; q < static_cast<long>(M); ++q) {
      const double a = static_cast<double>(q) * h, b = static_cast<double>(q + 1) * h;
      const Vec y = Y(a);
      const Tensor wa = W.value(a, y, 0), wb = W.value(b, y, 0);
      for (std::size_t r = 0; r < n; ++r) inc[static_cast<std::size_t>(q) * n + r] = wb[r] - wa[r];
    }
    SampledPath S(out, n);
    Vec acc = zeros(n);
    for (std::size_t k = 0; k < N; ++k) {
      Vec part = zeros(n);
      for (std::size_t q = k * sub; q < (k + 1) * sub; ++q)
        for (std::size_t r = 0; r < n; ++r) part(static_cast<Eigen::Index>(r)) += inc[q * n + r];
      acc += part;
      S.set(k + 1, acc);
    }
    std::vector<SampledPath> row{S};
    const int rounds = std::min<int>(opt.richardson, static_cast<int>(table.size()));
    for (int r = 1; r <= rounds; ++r) {
      const double f = std::ldexp(1.0, r);
      SampledPath R(out, n);
      for (std::size_t k = 0; k < out.size(); ++k)
        R.set(k, (f * row[static_cast<std::size_t>(r - 1)].at(k) - table.back()[static_cast<std::size_t>(r - 1)].at(k)) / (f - 1.0));
      row.push_back(R);
    }
    table.push_back(row);
    const SampledPath& cur = row.back();
    res.totals.push_back(cur.at(N).norm() == 0.0 ? 0.0 : cur.at(N)(0));
    res.final_level = out.level + e;
    if (table.size() > 1) {
      res.last_change = max_gap(cur, best);
      const bool full = rounds == opt.richardson;
      if (!cur.finite()) throw ConvergenceError("young: non-finite sums");
      if (full && res.last_change <= opt.tol * (1.0 + cur.sup_norm())) {
        res.I = cur;
        return res;
      }
    }
    best = cur;
  }
  throw ConvergenceError("young: sums did not stabilize (last change " + std::to_string(res.last_change) + ")");
}

NLIntegralResult nl_rough_integral(const NLControlledPath& ctrl, const AnalysisParams& p, const NLIntegralOptions& opt) {
  p.validate();
  const NonlinearDriver& drv = *ctrl.driver;
  const TimeGrid& g = drv.grid();
  require(ctrl.Y.grid.times == g.times, "nl_rough_integral: controlled path grid differs from the driver grid");
  const Approximant xi = [&](std::size_t i, std::size_t j) -> Vec {
    const Vec y = ctrl.Y.at(i);
    return drv.W(i, j, y) + drv.WW(i, j, ctrl.Ydot.at(i), y);
  };
  SewResult sr = sew(g, ctrl.dim(), xi, 3.0 * p.alpha, opt.sew);

  NLIntegralResult res;
  res.Z = NLControlledPath{sr.J, ctrl.Y, ctrl.driver};
  NLIntegralReport& rep = res.report;
  rep.sew = sr.report;
  if (!opt.check_bounds) return res;

  rep.driver_norms = opt.norms ? *opt.norms : weighted_driver_norm(drv, p, path_samples(ctrl, opt.samples), 2);
  rep.input = path_norms(ctrl, p.alpha);
  const PathNorms& in = rep.input;
  const double weights = std::pow(1.0 + 2.0 * in.Ydot_sup, std::max(p.beta[0], p.beta[1])) *
                         std::pow(1.0 + 2.0 * in.Y_sup, std::max(p.beta[1], p.beta[2]));
  const double ka = k_alpha(p.alpha), Wn = norm_C2(rep.driver_norms);
  rep.C1 = ka * Wn * weights * (in.Y_alpha + in.Ydot_alpha + in.R_2alpha);
  const double slack = 1e-12 * (1.0 + sr.J.sup_norm());
  rep.violations = count_violations(sr.defects, rep.C1, 3.0 * p.alpha, slack);
  rep.bound_holds = rep.violations == 0;

  rep.R_out = holder_seminorm(res.Z.remainder_field(), 2.0 * p.alpha);
  rep.R_out_bound = ka * Wn * weights * (1.0 + std::pow(g.T, p.alpha) * (in.Y_alpha + in.Ydot_alpha + in.R_2alpha));
  rep.remainder_holds = rep.R_out <= rep.R_out_bound * (1.0 + 1e-9) + slack;
  return res;
}

double nl_distance(const NLControlledPath& a, const NLControlledPath& b, double alpha) {
  require(a.Y.grid.times == b.Y.grid.times, "stability: paths live on different grids");
  TwoParamField dr;
  dr.grid = a.Y.grid;
  dr.rows = a.dim();
  dr.eval = [&](std::size_t i, std::size_t j) -> Mat { return a.remainder(i, j) - b.remainder(i, j); };
  return holder_seminorm(difference(a.Ydot, b.Ydot), alpha) + holder_seminorm(dr, 2.0 * alpha);
}

StabilityReport stability_distance(const NLControlledPath& a, const NLControlledPath& b, const AnalysisParams& p,
                                   const std::vector<Vec>& samples, const NLControlledPath* a_in, const NLControlledPath* b_in) {
  p.validate();
  require(a.Y.grid.times == b.Y.grid.times, "stability: paths live on different grids");
  require(a.dim() == b.dim(), "stability: dimension mismatch");
  const double al = p.alpha, Ta = std::pow(a.Y.grid.T, al);
  StabilityReport r;
  r.d = nl_distance(a, b, al);
  r.Y_gap = holder_seminorm(difference(a.Y, b.Y), al);

  const bool same = a.driver == b.driver;
  const DriverNormReport dW = same ? DriverNormReport{} : driver_distance(*a.driver, *b.driver, p, samples, 1, PairBudget::automatic, false);
  const DriverNormReport nb = weighted_driver_norm(*b.driver, p, samples, 1, PairBudget::automatic, false);
  const double ya = a.Ydot.sup_norm(), yb = b.Ydot.sup_norm();
  const double w1 = std::pow(1.0 + ya + yb, p.beta[1]);
  r.gap_bound = std::pow(1.0 + ya, p.beta[0]) * dW.W_norm + nb.W_norm * w1 * (a.Ydot.at(0) - b.Ydot.at(0)).norm() +
                  Ta * (1.0 + nb.W_norm) * w1 * r.d;
  r.gap_holds = r.Y_gap <= r.gap_bound * (1.0 + 1e-9) + 1e-12;

  if (a_in && b_in) {
    r.integral_checked = true;
    const PathNorms A = path_norms(*a_in, al), B = path_norms(*b_in, al);
    const DriverNormReport rho = same ? DriverNormReport{} : driver_distance(*a.driver, *b.driver, p, samples, 3);
    const DriverNormReport n3 = weighted_driver_norm(*b.driver, p, samples, 3);
    r.rho = rho.W_norm + rho.WW_norm;
    const double Wt = norm_C3(n3), ka = k_alpha(al);
    const double bs2 = std::max({p.beta[0], p.beta[1], p.beta[2]}), bss2 = std::max({p.beta[1], p.beta[2], p.beta[3]});
    const double wy = std::pow(1.0 + 2.0 * A.Y_sup + 2.0 * B.Y_sup, bss2);
    const double base_dot = 1.0 + 2.0 * A.Ydot_sup + 2.0 * B.Ydot_sup;
    const double ys = A.Y_alpha + B.Y_alpha, ys2 = ys * ys;
    const double dots = A.Ydot_alpha + B.Ydot_alpha;
    r.C3 = 2.0 * ka * std::pow(1.0 + Ta, 2) * (1.0 + Wt) * wy * std::pow(base_dot, bs2 + std::max(p.beta[0], p.beta[1])) *
           (1.0 + ys + ys2 + A.R_2alpha);
    r.C4 = 5.0 * ka * std::pow(1.0 + Ta, 2) * (Wt + Wt * Wt) * wy * std::pow(base_dot, bs2 + p.beta[1]) *
           (1.0 + ys + dots + ys2 + A.R_2alpha);
    r.C5 = 6.0 * ka * Ta * (1.0 + Ta) * std::pow(1.0 + Wt, 2) * wy * std::pow(base_dot, bs2 + p.beta[1]) *
           (1.0 + Ta * (ys + dots) + Ta * Ta * ys2 + Ta * Ta * A.R_2alpha);
    r.d_inputs = nl_distance(*a_in, *b_in, al);
    const double init = (a_in->Y.at(0) - b_in->Y.at(0)).norm() + (a_in->Ydot.at(0) - b_in->Ydot.at(0)).norm();
    r.integral_bound = r.C3 * r.rho + r.C4 * init + r.C5 * r.d_inputs;
    r.integral_holds = r.d <= r.integral_bound * (1.0 + 1e-9) + 1e-12;
  }
  return r;
}

EquivalenceResult eqlnri_check(const NLControlledPath& ctrl, double alpha, const SewOptions& opt) {
  const auto* comp = dynamic_cast<const CompositionDriver*>(ctrl.driver.get());
  require(comp != nullptr, "eqlnri: the controlled path must be driven by a composition driver");
  require(comp->refinement() == 0, "eqlnri: the composition driver must share the rough path grid");
  const FBundle& f = comp->bundle();
  const RoughPath& rp = comp->rough_path();
  const std::size_t n = ctrl.dim(), d = rp.dim(), N = rp.grid().intervals();

  ControlledPath integrand;
  integrand.Y = SampledPath(rp.grid(), n * d);
  integrand.Yp.assign(N + 1, zeros(n * d, d));
  SampledPath young(rp.grid(), n);
  Vec acc = zeros(n);
  for (std::size_t k = 0; k <= N; ++k) {
    const Vec x = rp.X(k), y = ctrl.Y.at(k);
    const Tensor G = f.eval(1, 0, x, y), H = f.eval(2, 0, x, y), Q = f.eval(1, 1, x, y);
    const Tensor Yd = f.eval(1, 0, x, ctrl.Ydot.at(k));  // Y' = D1 f(X, Ydot)
    Vec v(static_cast<Eigen::Index>(n * d));
    for (std::size_t q = 0; q < n * d; ++q) v(static_cast<Eigen::Index>(q)) = G[q];
    integrand.Y.set(k, v);
    Mat& P = integrand.Yp[k];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
          double s = H[(i * d + a) * d + b];
          for (std::size_t q = 0; q < n; ++q) s += Q[(i * d + a) * n + q] * Yd[q * d + b];
          P(static_cast<Eigen::Index>(i * d + a), static_cast<Eigen::Index>(b)) = s;
        }
    young.set(k, acc);
    if (k == N) break;
    const Mat BX = rp.bracket(k, k + 1);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) s += H[(i * d + a) * d + b] * BX(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      acc(static_cast<Eigen::Index>(i)) += 0.5 * s;
    }
  }

  EquivalenceResult out;
  const RoughIntegralResult lin = rough_integral(integrand, rp, alpha, opt);
  out.young = young;
  out.linear = SampledPath(rp.grid(), n);
  for (std::size_t k = 0; k <= N; ++k) out.linear.set(k, lin.Z.Y.at(k) + young.at(k));
  AnalysisParams p;
  p.alpha = alpha;
  NLIntegralOptions o;
  o.sew = opt;
  o.check_bounds = false;
  out.nonlinear = nl_rough_integral(ctrl, p, o).Z.Y;
  out.gap = max_gap(out.nonlinear, out.linear);
  out.end_gap = (out.nonlinear.at(N) - out.linear.at(N)).norm();
  return out;
}

}  // namespace roughkit
