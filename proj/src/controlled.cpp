#include "roughkit/controlled.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "roughkit/constants.hpp"
#include "roughkit/seminorm.hpp"

namespace roughkit {

Vec ControlledPath::remainder(const RoughPath& rp, std::size_t i, std::size_t j) const {
  return Y.inc(i, j) - Yp[i] * rp.dX(i, j);
}

TwoParamField ControlledPath::remainder_field(const RoughPath& rp) const {
  TwoParamField f;
  f.grid = Y.grid;
  f.rows = value_dim();
  f.eval = [this, &rp](std::size_t i, std::size_t j) -> Mat { return remainder(rp, i, j); };
  return f;
}

SampledPath ControlledPath::derivative_path() const {
  const std::size_t rows = value_dim(), cols = driver_dim();
  SampledPath p(Y.grid, rows * cols);
  for (std::size_t k = 0; k < Yp.size(); ++k)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        p.data[k * rows * cols + r * cols + c] = Yp[k](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return p;
}

ControlledPath make_controlled(const TimeGrid& g, std::size_t value_dim, std::size_t driver_dim,
                               const std::function<Vec(double)>& value, const std::function<Mat(double)>& deriv) {
  ControlledPath c;
  c.Y = sample_path(g, value_dim, value);
  c.Yp.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    c.Yp[k] = deriv(g.times[k]);
    require(c.Yp[k].rows() == static_cast<Eigen::Index>(value_dim) && c.Yp[k].cols() == static_cast<Eigen::Index>(driver_dim),
            "make_controlled: derivative shape mismatch");
  }
  return c;
}

ControlledPath identity_controlled(const RoughPath& rp) {
  ControlledPath c;
  c.Y = rp.path();
  const auto d = static_cast<Eigen::Index>(rp.dim());
  c.Yp.assign(rp.grid().size(), Mat::Identity(d, d));
  return c;
}

SmoothMap identity_map(std::size_t m) {
  SmoothMap f;
  f.in_dim = f.out_dim = m;
  const auto n = static_cast<Eigen::Index>(m);
  f.value = [](const Vec& y) { return y; };
  f.jacobian = [n](const Vec&) -> Mat { return Mat::Identity(n, n); };
  f.hessian = [m, n](const Vec&) { return std::vector<Mat>(m, Mat::Zero(n, n)); };
  return f;
}

SmoothMap square_map() {
  SmoothMap f;
  f.value = [](const Vec& y) -> Vec { return y.array().square().matrix(); };
  f.jacobian = [](const Vec& y) -> Mat { return Mat::Constant(1, 1, 2.0 * y[0]); };
  f.hessian = [](const Vec&) { return std::vector<Mat>{Mat::Constant(1, 1, 2.0)}; };
  return f;
}

SmoothMap exp_map(std::size_t m) {
  SmoothMap f;
  f.in_dim = f.out_dim = m;
  f.value = [](const Vec& y) -> Vec { return y.array().exp().matrix(); };
  f.jacobian = [](const Vec& y) -> Mat { return y.array().exp().matrix().asDiagonal(); };
  f.hessian = [m](const Vec& y) {
    std::vector<Mat> h(m, zeros(m, m));
    for (std::size_t i = 0; i < m; ++i) h[i](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = std::exp(y[static_cast<Eigen::Index>(i)]);
    return h;
  };
  return f;
}

namespace {

Mat outer(const Vec& a, const Vec& b) { return a * b.transpose(); }

Vec flatten(const Mat& m) {
  Vec v(m.rows() * m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  return v;
}

Mat unflatten(const Vec& v, std::size_t rows, std::size_t cols) {
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[static_cast<Eigen::Index>(r * cols + c)];
  return m;
}

void check_shapes(const ControlledPath& c, const RoughPath& rp, const char* who) {
  require(c.Y.size() == rp.grid().size(), std::string(who) + ": grid mismatch");
  require(c.Yp.size() == c.Y.size(), std::string(who) + ": derivative samples missing");
  require(c.driver_dim() == rp.dim(), std::string(who) + ": derivative does not act on the driver");
}

}  // namespace

RoughIntegralResult rough_integral(const ControlledPath& ctrl, const RoughPath& rp, double alpha, const SewOptions& opt) {
  check_shapes(ctrl, rp, "rough_integral");
  const std::size_t d = rp.dim(), m = ctrl.value_dim();
  require(m % d == 0, "rough_integral: integrand must be n x d");
  const std::size_t n = m / d;

  Approximant xi = [&](std::size_t i, std::size_t j) -> Vec {
    const Vec dx = rp.dX(i, j);
    const Mat xx = rp.XX(i, j);
    const Vec y = ctrl.Y.at(i);
    const Mat& yp = ctrl.Yp[i];
    Vec out = zeros(n);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a) s += y[static_cast<Eigen::Index>(r * d + a)] * dx[static_cast<Eigen::Index>(a)];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          s += yp(static_cast<Eigen::Index>(r * d + a), static_cast<Eigen::Index>(b)) *
               xx(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a));
      out[static_cast<Eigen::Index>(r)] = s;
    }
    return out;
  };

  SewResult s = sew(rp.grid(), n, xi, 3.0 * alpha, opt);
  RoughIntegralResult res;
  res.Z.Y = s.J;
  res.Z.Yp.resize(ctrl.Y.size());
  for (std::size_t k = 0; k < ctrl.Y.size(); ++k) res.Z.Yp[k] = unflatten(ctrl.Y.at(k), n, d);

  RoughIntegralReport& rep = res.report;
  rep.X_norm = holder_seminorm(rp.path(), alpha);
  rep.R_norm = holder_seminorm(ctrl.remainder_field(rp), 2.0 * alpha);
  rep.XX_norm = holder_seminorm(rp.second_level(), 2.0 * alpha);
  rep.Yp_norm = holder_seminorm(ctrl.derivative_path(), alpha);
  rep.bound_C = k_alpha(alpha) * (rep.X_norm * rep.R_norm + rep.XX_norm * rep.Yp_norm);
  double scale = 1.0;
  for (std::size_t k = 0; k < s.J.size(); ++k) scale = std::max(scale, s.J.at(k).norm());
  rep.violations = count_violations(s.defects, rep.bound_C, 3.0 * alpha, 1e-13 * scale);
  rep.bound_holds = rep.violations == 0;
  rep.sew = s.report;
  return res;
}

ControlledPath compose_controlled(const SmoothMap& phi, const ControlledPath& ctrl) {
  require(phi.value && phi.jacobian, "compose_controlled: derivative bundle missing");
  require(phi.in_dim == ctrl.value_dim(), "compose_controlled: dimension mismatch");
  ControlledPath out;
  out.Y = SampledPath(ctrl.Y.grid, phi.out_dim);
  out.Yp.resize(ctrl.Y.size());
  for (std::size_t k = 0; k < ctrl.Y.size(); ++k) {
    const Vec y = ctrl.Y.at(k);
    out.Y.set(k, phi.value(y));
    out.Yp[k] = phi.jacobian(y) * ctrl.Yp[k];
  }
  return out;
}

SampledPath product_integral(const ControlledPath& z, const ControlledPath& y, const RoughPath& rp, const SewOptions& opt) {
  check_shapes(z, rp, "product_integral");
  check_shapes(y, rp, "product_integral");
  const std::size_t mz = z.value_dim(), my = y.value_dim();
  require(mz * my <= static_cast<std::size_t>(kMaxFlat), "product_integral: tensor too large");
  Approximant xi = [&](std::size_t i, std::size_t j) -> Vec {
    return flatten(outer(z.Y.at(i), y.Y.inc(i, j)) + z.Yp[i] * rp.XX(i, j) * y.Yp[i].transpose());
  };
  // The exponent only enters the defect report, which is not used here.
  SewOptions o = opt;
  o.check_convergence = false;
  return sew(rp.grid(), mz * my, xi, 1.0 + 1e-6, o).J;
}

namespace {

TwoParamField bracket_from(const ControlledPath& a, const ControlledPath& b, SampledPath J) {
  TwoParamField f;
  f.grid = a.Y.grid;
  f.rows = a.value_dim();
  f.cols = b.value_dim();
  auto shared = std::make_shared<SampledPath>(std::move(J));
  f.eval = [&a, &b, shared, rows = f.rows, cols = f.cols](std::size_t i, std::size_t j) -> Mat {
    const Vec da = a.Y.inc(i, j), db = b.Y.inc(i, j);
    const Mat integral = unflatten(shared->inc(i, j), rows, cols) - outer(a.Y.at(i), db);
    return outer(da, db) - 2.0 * integral;
  };
  return f;
}

}  // namespace

BracketSet brackets(const ControlledPath& z, const ControlledPath& y, const RoughPath& rp, const SewOptions& opt) {
  BracketSet out;
  out.bracket_X = rp.bracket_field();
  out.ZY = bracket_from(z, y, product_integral(z, y, rp, opt));
  out.YZ = bracket_from(y, z, product_integral(y, z, rp, opt));
  const std::size_t mz = z.value_dim(), my = y.value_dim();
  if (mz % my == 0) {
    const std::size_t n = mz / my;
    TwoParamField zy = out.ZY, yz = out.YZ;
    out.ZY_dir = TwoParamField{zy.grid, n, 1, [zy, n, my](std::size_t i, std::size_t j) -> Mat {
                                 const Mat b = zy.eval(i, j);
                                 Mat v = zeros(n, 1);
                                 for (std::size_t r = 0; r < n; ++r)
                                   for (std::size_t q = 0; q < my; ++q)
                                     v(static_cast<Eigen::Index>(r), 0) += b(static_cast<Eigen::Index>(r * my + q), static_cast<Eigen::Index>(q));
                                 return v;
                               }};
    out.YZ_dir = TwoParamField{yz.grid, n, 1, [yz, n, my](std::size_t i, std::size_t j) -> Mat {
                                 const Mat b = yz.eval(i, j);
                                 Mat v = zeros(n, 1);
                                 for (std::size_t r = 0; r < n; ++r)
                                   for (std::size_t q = 0; q < my; ++q)
                                     v(static_cast<Eigen::Index>(r), 0) += b(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(r * my + q));
                                 return v;
                               }};
  }
  // Compensators are not additive; the identity is read on consecutive increments.
  Mat young = zeros(my, mz), direct = zeros(my, mz);
  for (std::size_t k = 0; k + 1 < rp.grid().size(); ++k) {
    young += y.Yp[k] * rp.bracket(k, k + 1) * z.Yp[k].transpose();
    direct += out.YZ.eval(k, k + 1);
    out.isometry_gap = std::max(out.isometry_gap, (direct - young).norm());
  }
  return out;
}

ItoReport ito_residual(const SmoothMap& f, const ControlledPath& y, const ControlledPath& z, const RoughPath& rp,
                       const SewOptions& opt) {
  require(f.value && f.jacobian && f.hessian, "ito_residual: derivative bundle missing");
  check_shapes(y, rp, "ito_residual");
  check_shapes(z, rp, "ito_residual");
  const std::size_t m1 = y.value_dim(), m = m1 + z.value_dim(), d = rp.dim();
  require(f.in_dim == m, "ito_residual: f must act on the stacked pair");
  ControlledPath w;
  w.Y = SampledPath(y.Y.grid, m);
  w.Yp.resize(y.Y.size());
  for (std::size_t k = 0; k < y.Y.size(); ++k) {
    Vec v(static_cast<Eigen::Index>(m));
    v << y.Y.at(k), z.Y.at(k);
    w.Y.set(k, v);
    Mat p(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
    p << y.Yp[k], z.Yp[k];
    w.Yp[k] = p;
  }
  const std::size_t k_out = f.out_dim;
  Approximant xi = [&](std::size_t i, std::size_t j) -> Vec {
    const Vec wi = w.Y.at(i);
    Vec out = f.jacobian(wi) * w.Y.inc(i, j);
    const auto H = f.hessian(wi);
    const Mat xx = rp.XX(i, j);
    for (std::size_t o = 0; o < k_out; ++o)
      out[static_cast<Eigen::Index>(o)] += (w.Yp[i].transpose() * H[o] * w.Yp[i]).cwiseProduct(xx).sum();
    return out;
  };
  SewOptions o = opt;
  o.check_convergence = false;
  SewResult rough = sew(rp.grid(), k_out, xi, 1.0 + 1e-6, o);
  const SampledPath Jw = product_integral(w, w, rp, opt);

  ItoReport rep;
  const Vec f0 = f.value(w.Y.at(0));
  Vec young = zeros(k_out);
  for (std::size_t k = 0; k + 1 < w.Y.size(); ++k) {
    const Vec wk = w.Y.at(k), dw = w.Y.inc(k, k + 1);
    const Mat br = outer(dw, dw) - 2.0 * (unflatten(Jw.inc(k, k + 1), m, m) - outer(wk, dw));
    const auto H = f.hessian(wk);
    for (std::size_t o = 0; o < k_out; ++o) young[static_cast<Eigen::Index>(o)] += 0.5 * H[o].cwiseProduct(br).sum();
    const Vec lhs = f.value(w.Y.at(k + 1)) - f0;
    const Vec rhs = rough.J.at(k + 1) + young;
    rep.residual = std::max(rep.residual, (lhs - rhs).norm());
    rep.lhs_end = lhs[0];
    rep.rhs_end = rhs[0];
  }
  return rep;
}

double fitted_order(const std::vector<int>& levels, const std::vector<double>& errors) {
  require(levels.size() == errors.size() && levels.size() >= 2, "fitted_order: need two or more levels");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double x = levels[i], yv = -std::log2(std::max(errors[i], 1e-300));
    sx += x;
    sy += yv;
    sxx += x * x;
    sxy += x * yv;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace roughkit
