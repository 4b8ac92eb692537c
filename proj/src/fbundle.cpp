#include "roughkit/fbundle.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace roughkit {

namespace {

std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

void check_order(int j, int k) {
  require(j >= 0 && k >= 0 && j + k <= kMaxPartialOrder, "fbundle: partial order out of range");
}

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double falling(int n, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= (n - i);
  return r;
}

// d^j/dz^j d^k/dy^k of e^{zy}.
double exp_partial(int j, int k, double z, double y) {
  double s = 0.0;
  for (int i = 0; i <= std::min(j, k); ++i)
    s += binom(j, i) * falling(k, i) * std::pow(z, k - i) * std::pow(y, j - i);
  return s * std::exp(z * y);
}

}  // namespace

std::size_t FBundle::size(int j, int k) const { return space_dim * ipow(path_dim, j) * ipow(space_dim, k); }

Vec FBundle::value(const Vec& z, const Vec& y) const {
  Tensor t;
  partial(0, 0, z, y, t);
  Vec v(static_cast<Eigen::Index>(space_dim));
  for (std::size_t i = 0; i < space_dim; ++i) v[static_cast<Eigen::Index>(i)] = t[i];
  return v;
}

FBundle bilinear_bundle(const std::vector<Mat>& A) {
  require(!A.empty(), "bilinear: at least one matrix required");
  FBundle f;
  f.name = "bilinear";
  f.path_dim = A.size();
  f.space_dim = static_cast<std::size_t>(A.front().rows());
  for (const Mat& a : A) require(a.rows() == a.cols() && a.rows() == A.front().rows(), "bilinear: square matrices of equal size required");
  const std::size_t p = f.path_dim, n = f.space_dim;
  f.partial = [A, p, n](int j, int k, const Vec& z, const Vec& y, Tensor& out) {
    check_order(j, k);
    out.assign(n * ipow(p, j) * ipow(n, k), 0.0);
    if (j >= 2 || k >= 2) return;
    if (j == 0 && k == 0) {
      for (std::size_t a = 0; a < p; ++a) {
        const Vec v = A[a] * y;
        for (std::size_t i = 0; i < n; ++i) out[i] += z[static_cast<Eigen::Index>(a)] * v[static_cast<Eigen::Index>(i)];
      }
    } else if (j == 1 && k == 0) {
      for (std::size_t a = 0; a < p; ++a) {
        const Vec v = A[a] * y;
        for (std::size_t i = 0; i < n; ++i) out[i * p + a] = v[static_cast<Eigen::Index>(i)];
      }
    } else if (j == 0 && k == 1) {
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t q = 0; q < n; ++q)
            out[i * n + q] += z[static_cast<Eigen::Index>(a)] * A[a](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q));
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < p; ++a)
          for (std::size_t q = 0; q < n; ++q)
            out[(i * p + a) * n + q] = A[a](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q));
    }
  };
  return f;
}

FBundle exp_product_bundle(std::size_t d) {
  require(d >= 1 && d <= static_cast<std::size_t>(kMaxDim), "exp_product: dimension out of range");
  FBundle f;
  f.name = "exp_product";
  f.path_dim = f.space_dim = d;
  f.partial = [d](int j, int k, const Vec& z, const Vec& y, Tensor& out) {
    check_order(j, k);
    const int slots = 1 + j + k;
    out.assign(ipow(d, slots), 0.0);
    // only the all-equal index is nonzero
    for (std::size_t i = 0; i < d; ++i) {
      std::size_t flat = 0;
      for (int s = 0; s < slots; ++s) flat = flat * d + i;
      out[flat] = exp_partial(j, k, z[static_cast<Eigen::Index>(i)], y[static_cast<Eigen::Index>(i)]);
    }
  };
  return f;
}

FBundle matrix_linear_bundle(const std::vector<Mat>& B) {
  require(!B.empty(), "matrix_linear: at least one matrix required");
  FBundle f;
  f.name = "matrix_linear";
  f.path_dim = B.size();
  f.space_dim = static_cast<std::size_t>(B.front().rows());
  for (const Mat& b : B) require(b.rows() == b.cols() && b.rows() == B.front().rows(), "matrix_linear: square matrices of equal size required");
  const std::size_t p = f.path_dim, n = f.space_dim;
  f.partial = [B, p, n](int j, int k, const Vec& z, const Vec& y, Tensor& out) {
    check_order(j, k);
    out.assign(n * ipow(p, j) * ipow(n, k), 0.0);
    if (j >= 2) return;
    auto dsin = [k](double v) {
      switch (k % 4) {
        case 0: return std::sin(v);
        case 1: return std::cos(v);
        case 2: return -std::sin(v);
        default: return -std::cos(v);
      }
    };
    const std::size_t ystride = ipow(n, k);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t q = 0; q < n; ++q) {
        // all y-slots carry the same index q
        std::size_t yflat = 0;
        for (int s = 0; s < k; ++s) yflat = yflat * n + q;
        const double s_val = dsin(y[static_cast<Eigen::Index>(q)]);
        for (std::size_t a = 0; a < p; ++a) {
          const double c = B[a](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) * s_val;
          if (j == 0)
            out[i * ystride + yflat] += z[static_cast<Eigen::Index>(a)] * c;
          else
            out[(i * p + a) * ystride + yflat] += c;
        }
      }
  };
  return f;
}

FBundle rotation_bundle(std::size_t path_dim) {
  require(path_dim >= 1 && path_dim <= static_cast<std::size_t>(kMaxFlat), "rotation: path dimension out of range");
  FBundle f;
  f.name = "rotation";
  f.path_dim = path_dim;
  f.space_dim = 2;
  const std::size_t p = path_dim;
  f.partial = [p](int j, int k, const Vec& z, const Vec& y, Tensor& out) {
    check_order(j, k);
    const std::size_t zs = ipow(p, j);
    out.assign(2 * zs * ipow(2, k), 0.0);
    if (k >= 2) return;
    const double th = z.sum() + 0.5 * M_PI * j;
    const double c = std::cos(th), s = std::sin(th);
    Mat R(2, 2);
    R << c, -s, s, c;
    for (std::size_t zf = 0; zf < zs; ++zf) {
      if (k == 0) {
        const Vec v = R * y;
        for (std::size_t i = 0; i < 2; ++i) out[i * zs + zf] = v[static_cast<Eigen::Index>(i)];
      } else {
        for (std::size_t i = 0; i < 2; ++i)
          for (std::size_t q = 0; q < 2; ++q) out[(i * zs + zf) * 2 + q] = R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q));
      }
    }
  };
  return f;
}

FBundle finite_difference_bundle(std::string name, std::size_t path_dim, std::size_t space_dim,
                                 std::function<Vec(const Vec&, const Vec&)> value) {
  FBundle f;
  f.name = std::move(name);
  f.path_dim = path_dim;
  f.space_dim = space_dim;
  f.analytic = false;
  const double eps = std::numeric_limits<double>::epsilon();
  // Recursive central differences: the last requested slot is differentiated first.
  // First differences use eps^{1/3}; the step widens with the total order.
  auto rec = std::make_shared<std::function<void(int, int, const Vec&, const Vec&, Tensor&)>>();
  *rec = [=](int j, int k, const Vec& z, const Vec& y, Tensor& out) {
    check_order(j, k);
    if (j == 0 && k == 0) {
      const Vec v = value(z, y);
      out.assign(v.data(), v.data() + v.size());
      return;
    }
    const bool in_y = k > 0;
    const std::size_t radix = in_y ? space_dim : path_dim;
    const int jj = in_y ? j : j - 1, kk = in_y ? k - 1 : k;
    const double base = std::pow(eps, 1.0 / (2.0 + j + k));
    Tensor lower_p, lower_m;
    const std::size_t inner = space_dim * ipow(path_dim, jj) * ipow(space_dim, kk);
    out.assign(inner * radix, 0.0);
    for (std::size_t c = 0; c < radix; ++c) {
      Vec zp = z, zm = z, yp = y, ym = y;
      double h;
      if (in_y) {
        h = base * (1.0 + std::abs(y[static_cast<Eigen::Index>(c)]));
        yp[static_cast<Eigen::Index>(c)] += h;
        ym[static_cast<Eigen::Index>(c)] -= h;
      } else {
        h = base * (1.0 + std::abs(z[static_cast<Eigen::Index>(c)]));
        zp[static_cast<Eigen::Index>(c)] += h;
        zm[static_cast<Eigen::Index>(c)] -= h;
      }
      (*rec)(jj, kk, zp, yp, lower_p);
      (*rec)(jj, kk, zm, ym, lower_m);
      // lower layout [i][z^jj][y^kk]; new slot is appended after the existing z or y slots
      for (std::size_t flat = 0; flat < inner; ++flat) {
        const double dv = (lower_p[flat] - lower_m[flat]) / (2.0 * h);
        std::size_t target;
        if (in_y) {
          target = flat * radix + c;
        } else {
          const std::size_t ys = ipow(space_dim, kk);
          const std::size_t head = flat / ys, tail = flat % ys;
          target = (head * radix + c) * ys + tail;
        }
        out[target] = dv;
      }
    }
  };
  f.partial = [rec](int j, int k, const Vec& z, const Vec& y, Tensor& out) { (*rec)(j, k, z, y, out); };
  return f;
}

std::vector<std::string> bundle_catalog() { return {"bilinear", "exp_product", "matrix_linear", "rotation"}; }

}  // namespace roughkit
