#include "roughkit/flow_rpde.hpp"

#include <algorithm>
#include <cmath>

#include "roughkit/linear_rde.hpp"

namespace roughkit {

std::size_t SpatialGrid::size() const {
  std::size_t n = 1;
  for (std::size_t a = 0; a < dim(); ++a) n *= count;
  return n;
}

double SpatialGrid::spacing(std::size_t axis) const {
  const auto a = static_cast<Eigen::Index>(axis);
  return (hi[a] - lo[a]) / static_cast<double>(count - 1);
}

Vec SpatialGrid::point(std::size_t idx) const {
  Vec p = lo;
  for (std::size_t a = 0; a < dim(); ++a) {
    p[static_cast<Eigen::Index>(a)] += spacing(a) * static_cast<double>(idx % count);
    idx /= count;
  }
  return p;
}

bool SpatialGrid::contains(const Vec& z, double slack) const {
  for (Eigen::Index a = 0; a < lo.size(); ++a)
    if (z[a] < lo[a] - slack || z[a] > hi[a] + slack) return false;
  return true;
}

SpatialGrid make_spatial_grid(const Vec& lo, const Vec& hi, std::size_t count) {
  require(lo.size() == hi.size() && lo.size() >= 1, "spatial grid: bounds differ in dimension");
  require(lo.size() <= kMaxDim, "spatial grid: dimension above the supported maximum");
  require(count >= 2, "spatial grid: at least two points per axis");
  for (Eigen::Index a = 0; a < lo.size(); ++a) require(hi[a] > lo[a], "spatial grid: empty axis");
  return SpatialGrid{lo, hi, count};
}

namespace {

Mat unit(std::size_t d, std::size_t a) {
  Mat E = zeros(d, d);
  E(static_cast<Eigen::Index>(a / d), static_cast<Eigen::Index>(a % d)) = 1.0;
  return E;
}

Mat identity(std::size_t d) { return Mat::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)); }

struct PointRun {
  SampledPath Y;
  PointJacobian J;
};

SampledPath forward(const DriverPtr& drv, const Vec& x, const RDEOptions& o) { return solve_rde(drv, x, o).Y.Y; }

// F increments and leaves along one trajectory, then DY and the inverse variants.
PointJacobian jacobian_along(const NonlinearDriver& drv, const SampledPath& Y, bool inverses) {
  const std::size_t d = drv.dim(), dd = d * d, N = drv.grid().intervals();
  SampledPath F(drv.grid(), dd);
  std::vector<Mat> leaves(N);
  Vec acc = zeros(dd);
  F.set(0, acc);
  for (std::size_t k = 0; k < N; ++k) {
    const Vec y = Y.at(k);
    const Mat inc = drv.DW(k, k + 1, y) + drv.DyWW(k, k + 1, y, y);
    for (std::size_t a = 0; a < dd; ++a) acc[static_cast<Eigen::Index>(a)] += inc(static_cast<Eigen::Index>(a / d), static_cast<Eigen::Index>(a % d));
    F.set(k + 1, acc);
    leaves[k] = drv.FF(k, k + 1, y);
  }
  PointJacobian J;
  J.F = RoughPath(std::move(F), leaves, LiftKind::custom);
  LinearField left;
  for (std::size_t a = 0; a < dd; ++a) left.A.push_back(unit(d, a));
  J.DY = solve_linear_rde(left, J.F, identity(d)).Z;
  if (!inverses) return J;

  // One DY step is DY_{k+1} = (I + S_k) DY_k; the inverse steps with (I + S_k)^{-1}.
  J.M.resize(N + 1);
  J.M[0] = identity(d);
  for (std::size_t k = 0; k < N; ++k) {
    Mat S = zeros(d, d);
    const Vec dF = J.F.dX(k, k + 1);
    const Mat& L = leaves[k];
    for (std::size_t a = 0; a < dd; ++a) {
      S += dF[static_cast<Eigen::Index>(a)] * left.A[a];
      for (std::size_t b = 0; b < dd; ++b) S += L(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * left.A[b] * left.A[a];
    }
    J.M[k + 1] = J.M[k] * (identity(d) + S).inverse();
  }

  LinearField right;
  right.side = Side::right;
  for (std::size_t a = 0; a < dd; ++a) right.A.push_back(-unit(d, a));
  auto young = [&](bool symmetric) -> YoungTerm {
    return [&, symmetric](std::size_t k, const Mat& Z) -> Mat {
      Mat B = J.F.bracket(k, k + 1);
      if (symmetric) B = (0.5 * (B + B.transpose())).eval();
      Mat out = zeros(d, d);
      for (std::size_t a = 0; a < dd; ++a)
        for (std::size_t b = 0; b < dd; ++b)
          out += B(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * Z * left.A[a] * left.A[b];
      return out;
    };
  };
  J.M_printed = solve_linear_rde(right, J.F, identity(d), young(false)).Z;
  J.M_symmetric = solve_linear_rde(right, J.F, identity(d), young(true)).Z;
  return J;
}

template <class Body>
void for_points(std::size_t n, bool parallel, Body&& body) {
  std::vector<std::string> errors(n);
  auto run = [&](std::size_t p) {
    try {
      body(p);
    } catch (const std::exception& e) {
      errors[p] = e.what();
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long p = 0; p < static_cast<long>(n); ++p) run(static_cast<std::size_t>(p));
  } else {
    for (std::size_t p = 0; p < n; ++p) run(p);
  }
  std::string msg;
  for (std::size_t p = 0; p < n; ++p)
    if (!errors[p].empty()) msg += "\n  point " + std::to_string(p) + ": " + errors[p];
  if (!msg.empty()) throw ConvergenceError("flow: per-point solve failed" + msg);
}

// Quintic Hermite basis on [0, 1] and its first two derivatives.
struct Quintic {
  double v[6], d1[6], d2[6];
  explicit Quintic(double t) {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const double p[6][6] = {{1, 0, 0, -10, 15, -6}, {0, 1, 0, -6, 8, -3},   {0, 0, 0.5, -1.5, 1.5, -0.5},
                            {0, 0, 0, 10, -15, 6},  {0, 0, 0, -4, 7, -3},   {0, 0, 0, 0.5, -1, 0.5}};
    const double pw[6] = {1, t, t2, t3, t4, t5};
    for (int b = 0; b < 6; ++b) {
      v[b] = d1[b] = d2[b] = 0.0;
      for (int e = 0; e < 6; ++e) {
        v[b] += p[b][e] * pw[e];
        if (e >= 1) d1[b] += e * p[b][e] * pw[e - 1];
        if (e >= 2) d2[b] += e * (e - 1) * p[b][e] * pw[e - 2];
      }
    }
  }
};

}  // namespace

FlowField solve_flow(const DriverPtr& drv, const SpatialGrid& space, const FlowOptions& opt) {
  require(drv != nullptr, "flow: missing driver");
  require(space.dim() == drv->dim(), "flow: spatial grid dimension differs from the driver");
  require(opt.fd_step > 0.0, "flow: finite-difference step must be positive");
  FlowField flow;
  flow.driver = drv;
  flow.space = space;
  flow.options = opt;
  const Vec centre = 0.5 * (space.lo + space.hi);
  flow.driver_norm = opt.rde.driver_norm ? *opt.rde.driver_norm : driver_norm_around(*drv, opt.rde.params, centre);
  flow.options.rde.driver_norm = flow.driver_norm;
  flow.options.rde.self_check = false;
  flow.Y.resize(space.size());
  for_points(space.size(), opt.parallel, [&](std::size_t p) { flow.Y[p] = forward(drv, space.point(p), flow.options.rde); });
  return flow;
}

void jacobians(FlowField& flow) {
  const NonlinearDriver& drv = *flow.driver;
  require(drv.max_order() >= 2, "jacobians: driver lacks second spatial derivatives");
  const std::size_t d = drv.dim(), n = flow.space.size(), T = flow.times();
  flow.jac.assign(n, {});
  for_points(n, flow.options.parallel, [&](std::size_t p) {
    PointJacobian J = jacobian_along(drv, flow.Y[p], true);
    if (flow.options.second_derivatives) {
      const double h = flow.options.fd_step;
      J.D2Y.assign(T, std::vector<Mat>(d));
      for (std::size_t l = 0; l < d; ++l) {
        Vec e = zeros(d);
        e[static_cast<Eigen::Index>(l)] = h;
        const Vec x = flow.space.point(p);
        const auto up = jacobian_along(drv, forward(flow.driver, x + e, flow.options.rde), false);
        const auto dn = jacobian_along(drv, forward(flow.driver, x - e, flow.options.rde), false);
        for (std::size_t k = 0; k < T; ++k) J.D2Y[k][l] = (up.DY[k] - dn.DY[k]) / (2.0 * h);
      }
    }
    flow.jac[p] = std::move(J);
  });
  flow.product_gap = flow.printed_gap = flow.symmetric_gap = 0.0;
  for (const auto& J : flow.jac)
    for (std::size_t k = 0; k < T; ++k) {
      flow.product_gap = std::max(flow.product_gap, (J.DY[k] * J.M[k] - identity(d)).norm());
      flow.printed_gap = std::max(flow.printed_gap, (J.M_printed[k] - J.M[k]).norm());
      flow.symmetric_gap = std::max(flow.symmetric_gap, (J.M_symmetric[k] - J.M[k]).norm());
    }
  flow.has_jacobians = true;
}

FlowLocal flow_local(const FlowField& flow, std::size_t k, const Vec& z) {
  require(flow.has_jacobians, "flow: jacobians not computed");
  const SpatialGrid& sp = flow.space;
  const std::size_t d = sp.dim();
  require(static_cast<std::size_t>(z.size()) == d, "flow: point dimension");
  const bool second = flow.options.second_derivatives;
  FlowLocal out;
  out.Y = zeros(d);
  out.DY = zeros(d, d);
  if (second) out.D2Y.assign(d, zeros(d, d));

  std::vector<std::size_t> cell(d);
  std::vector<double> frac(d);
  for (std::size_t a = 0; a < d; ++a) {
    const double u = (z[static_cast<Eigen::Index>(a)] - sp.lo[static_cast<Eigen::Index>(a)]) / sp.spacing(a);
    const double c = std::clamp(std::floor(u), 0.0, static_cast<double>(sp.count - 2));
    cell[a] = static_cast<std::size_t>(c);
    frac[a] = u - c;
  }
  auto node = [&](std::size_t corner) {
    std::size_t idx = 0, stride = 1;
    for (std::size_t a = 0; a < d; ++a) {
      idx += (cell[a] + ((corner >> a) & 1U)) * stride;
      stride *= sp.count;
    }
    return idx;
  };

  if (d == 1 && second) {
    const double h = sp.spacing(0);
    const Quintic q(frac[0]);
    const std::size_t i0 = node(0), i1 = node(1);
    const double y[6] = {flow.Y[i0].at(k)[0], h * flow.jac[i0].DY[k](0, 0), h * h * flow.jac[i0].D2Y[k][0](0, 0),
                         flow.Y[i1].at(k)[0], h * flow.jac[i1].DY[k](0, 0), h * h * flow.jac[i1].D2Y[k][0](0, 0)};
    double v = 0.0, d1 = 0.0, d2 = 0.0;
    for (int b = 0; b < 6; ++b) {
      v += y[b] * q.v[b];
      d1 += y[b] * q.d1[b];
      d2 += y[b] * q.d2[b];
    }
    out.Y[0] = v;
    out.DY(0, 0) = d1 / h;
    out.D2Y[0](0, 0) = d2 / (h * h);
    out.slope = out.DY;
  } else {
    out.slope = zeros(d, d);
    for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
      double w = 1.0;
      for (std::size_t a = 0; a < d; ++a) w *= ((corner >> a) & 1U) ? frac[a] : 1.0 - frac[a];
      const std::size_t i = node(corner);
      const Vec yi = flow.Y[i].at(k);
      out.Y += w * yi;
      for (std::size_t b = 0; b < d; ++b) {
        double wb = 1.0 / sp.spacing(b);
        for (std::size_t a = 0; a < d; ++a)
          if (a != b) wb *= ((corner >> a) & 1U) ? frac[a] : 1.0 - frac[a];
        if (!((corner >> b) & 1U)) wb = -wb;
        out.slope.col(static_cast<Eigen::Index>(b)) += wb * yi;
      }
      out.DY += w * flow.jac[i].DY[k];
      if (second)
        for (std::size_t l = 0; l < d; ++l) out.D2Y[l] += w * flow.jac[i].D2Y[k][l];
    }
  }
  out.M = out.DY.inverse();
  if (second)
    for (std::size_t l = 0; l < d; ++l) out.DM.push_back(-out.M * out.D2Y[l] * out.M);
  return out;
}

namespace {

Vec newton(const FlowField& flow, std::size_t k, const Vec& x, Vec z, int& iterations) {
  const SpatialGrid& sp = flow.space;
  int clamped = 0;
  for (int it = 1; it <= kNewtonMaxIter; ++it) {
    const FlowLocal L = flow_local(flow, k, z);
    const Vec r = L.Y - x;
    const Vec step = L.slope.lu().solve(r);
    z -= step;
    if (!z.allFinite()) break;
    if (!sp.contains(z)) {
      if (++clamped >= 2) break;
      for (Eigen::Index a = 0; a < z.size(); ++a) z[a] = std::clamp(z[a], sp.lo[a], sp.hi[a]);
    } else {
      clamped = 0;
    }
    if (step.norm() <= kNewtonTol * std::max(1.0, z.norm())) {
      iterations = std::max(iterations, it);
      return z;
    }
  }
  throw ConvergenceError("invert_flow: Newton did not converge at t = " + std::to_string(flow.driver->grid().times[k]) +
                         " (query outside the image of the spatial grid, or grid too coarse)");
}

Mat dm_contract(const std::vector<Mat>& DM, const Vec& v) {
  Mat out = zeros(static_cast<std::size_t>(v.size()), static_cast<std::size_t>(v.size()));
  for (std::size_t l = 0; l < DM.size(); ++l) out += v[static_cast<Eigen::Index>(l)] * DM[l];
  return out;
}

}  // namespace

InverseFlow invert_flow(const FlowField& flow, const std::vector<Vec>& queries, std::size_t k, bool expansion_check) {
  require(flow.has_jacobians, "invert_flow: jacobians not computed");
  require(k < flow.times(), "invert_flow: time index out of range");
  if (expansion_check) require(flow.options.second_derivatives, "invert_flow: expansion check needs second derivatives");
  const NonlinearDriver& drv = *flow.driver;
  InverseFlow inv;
  inv.k = k;
  inv.queries = queries;
  inv.paths.resize(queries.size());
  inv.Z.resize(queries.size());
  inv.DZ.resize(queries.size());
  std::vector<int> iters(queries.size(), 0);
  std::vector<double> consts(queries.size(), 0.0);
  for (const Vec& x : queries) {
    require(static_cast<std::size_t>(x.size()) == flow.space.dim(), "invert_flow: query dimension");
    require(flow.space.contains(x), "invert_flow: query outside the solved spatial hull");
  }
  const double a3 = 3.0 * flow.options.rde.params.alpha;
  for_points(queries.size(), flow.options.parallel, [&](std::size_t q) {
    const Vec& x = queries[q];
    auto& path = inv.paths[q];
    path.assign(k + 1, x);
    for (std::size_t m = 1; m <= k; ++m) path[m] = newton(flow, m, x, path[m - 1], iters[q]);
    // polish against the discrete flow itself
    Vec z = path[k];
    Mat DY = flow_local(flow, k, z).DY;
    for (int it = 0; it < 8; ++it) {
      const SampledPath Y = forward(flow.driver, z, flow.options.rde);
      DY = jacobian_along(drv, Y, false).DY[k];
      const Vec step = DY.lu().solve(Y.at(k) - x);
      z -= step;
      if (step.norm() <= kNewtonTol * std::max(1.0, z.norm())) break;
    }
    inv.Z[q] = z;
    inv.DZ[q] = DY.inverse();
    if (!expansion_check || k == 0) return;
    // Z_{s,t} = -M W - M WW(x, x) + 1/2 DM[M W] W + M DW W on dyadic pairs inside [0, t_k]
    const auto& t = drv.grid().times;
    for (std::size_t span = 1; span <= k; span <<= 1)
      for (std::size_t s = 0; s + span <= k; s += span) {
        const std::size_t e = s + span;
        const FlowLocal L = flow_local(flow, s, path[s]);
        const Vec W = drv.W(s, e, x);
        const Vec MW = L.M * W;
        const Vec pred = -MW - L.M * drv.WW(s, e, x, x) + 0.5 * dm_contract(L.DM, MW) * W + L.M * (drv.DW(s, e, x) * W);
        const double r = ((path[e] - path[s]) - pred).norm() / std::pow(t[e] - t[s], a3);
        consts[q] = std::max(consts[q], r);
      }
  });
  for (std::size_t q = 0; q < queries.size(); ++q) {
    inv.max_iterations = std::max(inv.max_iterations, iters[q]);
    inv.zst2_constant = std::max(inv.zst2_constant, consts[q]);
  }
  return inv;
}

RPDESolution rpde_solution(const SmoothMap& h, const FlowField& flow, const std::vector<Vec>& queries) {
  require(flow.options.second_derivatives, "rpde: flow needs second derivatives");
  require(h.in_dim == flow.space.dim(), "rpde: initial condition acts on the wrong dimension");
  require(h.value && h.jacobian && h.hessian, "rpde: initial condition needs value, jacobian and hessian");
  const std::size_t T = flow.times(), d = flow.space.dim();
  const InverseFlow inv = invert_flow(flow, queries, T - 1, false);
  RPDESolution sol;
  sol.flow = &flow;
  sol.h = h;
  sol.queries = queries;
  sol.Z = inv.paths;
  const std::size_t Q = queries.size();
  sol.u.assign(Q, std::vector<Vec>(T));
  sol.Du.assign(Q, std::vector<Mat>(T));
  sol.D2u.assign(Q, std::vector<std::vector<Mat>>(T));
  for (std::size_t q = 0; q < Q; ++q) {
    sol.Z[q][0] = queries[q];
    for (std::size_t k = 0; k < T; ++k) {
      const Vec& z = sol.Z[q][k];
      const FlowLocal L = k == 0 ? FlowLocal{} : flow_local(flow, k, z);
      const Mat N = k == 0 ? identity(d) : L.M;
      const Mat Dh = h.jacobian(z);
      const auto H = h.hessian(z);
      sol.u[q][k] = h.value(z);
      sol.Du[q][k] = Dh * N;
      auto& D2 = sol.D2u[q][k];
      D2.resize(h.out_dim);
      for (std::size_t p = 0; p < h.out_dim; ++p) {
        Mat v = N.transpose() * H[p] * N;
        if (k > 0)
          for (std::size_t m = 0; m < d; ++m) {
            const Mat G = Dh.row(static_cast<Eigen::Index>(p)) * L.DM[m];  // 1 x d over j
            v += N.row(static_cast<Eigen::Index>(m)).transpose() * G;
          }
        D2[p] = v;
      }
    }
  }
  return sol;
}

RPDEResidual rpde_residual(const RPDESolution& sol) {
  require(sol.flow != nullptr, "rpde: solution without a flow");
  const FlowField& flow = *sol.flow;
  const NonlinearDriver& drv = *flow.driver;
  const std::size_t T = flow.times(), d = flow.space.dim(), Q = sol.queries.size(), m = sol.h.out_dim;
  RPDEResidual res;
  res.defect_path.assign(Q, std::vector<double>(T, 0.0));
  std::vector<RPDEResidual> part(Q);
  for_points(Q, flow.options.parallel, [&](std::size_t q) {
    const Vec& x = sol.queries[q];
    const Vec h0 = sol.h.value(x);
    Vec rough = zeros(m), b1 = zeros(m), b2 = zeros(m), b3 = zeros(m);
    RPDEResidual& r = part[q];
    for (std::size_t k = 0; k + 1 < T; ++k) {
      const Vec& z = sol.Z[q][k];
      const Mat& Du = sol.Du[q][k];
      const Mat N = k == 0 ? identity(d) : flow_local(flow, k, z).M;
      const std::vector<Mat> DM = k == 0 ? std::vector<Mat>(d, zeros(d, d)) : flow_local(flow, k, z).DM;
      const Mat Dh = sol.h.jacobian(z);
      const auto H = sol.h.hessian(z);
      const Mat C = drv.cross(k, k + 1, x, x);
      const Vec star = drv.star(k, k + 1, x);
      Vec g = Du * drv.W(k, k + 1, x) - Dh * (N * star);
      for (std::size_t p = 0; p < m; ++p) {
        double s = -(N.transpose() * H[p] * N).cwiseProduct(C).sum();
        // derivative of M along N e_j, applied to the cross term
        for (std::size_t l = 0; l < d; ++l)
          s -= (Dh.row(static_cast<Eigen::Index>(p)) * DM[l] * C * N.row(static_cast<Eigen::Index>(l)).transpose())(0, 0);
        g[static_cast<Eigen::Index>(p)] += s;
      }
      rough += g;
      b1 += 0.5 * Du * drv.bracket_DW_W(k, k + 1, x);
      b2 += 0.5 * Du * drv.bracket_W_DW(k, k + 1, x);
      const Mat B = drv.bracket(k, k + 1, x);
      for (std::size_t p = 0; p < m; ++p) b3[static_cast<Eigen::Index>(p)] += 0.5 * sol.D2u[q][k][p].cwiseProduct(B).sum();
      const Vec base = sol.u[q][k + 1] - h0 + rough;
      const double full = (base - b1 - b2 - b3).norm();
      res.defect_path[q][k + 1] = full;
      r.defect = std::max(r.defect, full);
      r.naive_defect = std::max(r.naive_defect, base.norm());
      r.rough_integral = std::max(r.rough_integral, rough.norm());
      r.bracket_DW_W = std::max(r.bracket_DW_W, b1.norm());
      r.bracket_W_DW = std::max(r.bracket_W_DW, b2.norm());
      r.bracket_W = std::max(r.bracket_W, b3.norm());
    }
  });
  for (const auto& r : part) {
    res.defect = std::max(res.defect, r.defect);
    res.naive_defect = std::max(res.naive_defect, r.naive_defect);
    res.rough_integral = std::max(res.rough_integral, r.rough_integral);
    res.bracket_DW_W = std::max(res.bracket_DW_W, r.bracket_DW_W);
    res.bracket_W_DW = std::max(res.bracket_W_DW, r.bracket_W_DW);
    res.bracket_W = std::max(res.bracket_W, r.bracket_W);
  }

  // u(t, Y_t(x)) = h(Z_t(Y_t(x))) at the base points
  std::vector<double> drift(flow.space.size(), 0.0);
  for_points(flow.space.size(), flow.options.parallel, [&](std::size_t p) {
    const Vec x = flow.space.point(p);
    const Vec h0 = sol.h.value(x);
    Vec z = x;
    int it = 0;
    for (std::size_t k = 1; k < T; ++k) {
      z = newton(flow, k, flow.Y[p].at(k), z, it);
      drift[p] = std::max(drift[p], (sol.h.value(z) - h0).norm());
    }
  });
  for (double v : drift) res.constancy_drift = std::max(res.constancy_drift, v);
  return res;
}

}  // namespace roughkit
