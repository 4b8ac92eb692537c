#include "roughkit/driver.hpp"

#include <cstring>

namespace roughkit {

namespace {

std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

Vec as_vec(const Tensor& t, std::size_t n) {
  Vec v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = t[i];
  return v;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

bool dyadic(std::size_t i, std::size_t j) {
  const std::size_t w = j - i;
  return w > 0 && (w & (w - 1)) == 0 && i % w == 0;
}

constexpr std::size_t kCacheLimit = std::size_t{1} << 20;

}  // namespace

Mat as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t[r * cols + c];
  return m;
}

SmoothField field_from_bundle(const FBundle& f, const SmoothCurve& c) {
  require(f.path_dim == c.dim, "field_from_bundle: curve dimension does not match the bundle");
  SmoothField w;
  w.dim = f.space_dim;
  w.value = [f, c](double t, const Vec& x, int k) { return f.eval(0, k, c.value(t), x); };
  w.rate = [f, c](double t, const Vec& x, int k) {
    const std::size_t n = f.space_dim, p = f.path_dim, ys = ipow(n, k);
    const Tensor T = f.eval(1, k, c.value(t), x);
    const Vec v = c.deriv(t);
    Tensor out(n * ys, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < p; ++l)
        for (std::size_t y = 0; y < ys; ++y) out[i * ys + y] += T[(i * p + l) * ys + y] * v[static_cast<Eigen::Index>(l)];
    return out;
  };
  return w;
}

SmoothField zero_field(std::size_t dim) {
  SmoothField w;
  w.dim = dim;
  w.value = [dim](double, const Vec&, int k) { return Tensor(ipow(dim, k + 1), 0.0); };
  w.rate = w.value;
  return w;
}

// ---- base class ----

Vec NonlinearDriver::W(std::size_t i, std::size_t j, const Vec& x) const { return as_vec(DkW(i, j, x, 0), dim_); }

Mat NonlinearDriver::DW(std::size_t i, std::size_t j, const Vec& x) const { return as_matrix(DkW(i, j, x, 1), dim_, dim_); }

bool NonlinearDriver::Key::operator==(const Key& o) const {
  return i == o.i && j == o.j && std::memcmp(x, o.x, sizeof(x)) == 0 && std::memcmp(y, o.y, sizeof(y)) == 0;
}

std::size_t NonlinearDriver::KeyHash::operator()(const Key& k) const {
  std::size_t h = std::hash<std::size_t>()(k.i) * 1000003u ^ std::hash<std::size_t>()(k.j);
  for (int c = 0; c < kMaxDim; ++c) {
    h = h * 1000003u ^ std::hash<double>()(k.x[c]);
    h = h * 1000003u ^ std::hash<double>()(k.y[c]);
  }
  return h;
}

NonlinearDriver::Key NonlinearDriver::make_key(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  Key k{i, j, {}, {}};
  for (std::size_t c = 0; c < dim_; ++c) {
    k.x[c] = x[static_cast<Eigen::Index>(c)];
    k.y[c] = y[static_cast<Eigen::Index>(c)];
  }
  return k;
}

Vec NonlinearDriver::WW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  if (i == j) return zeros(dim_);
  if (!dyadic(i, j)) return compute_WW(i, j, x, y);
  const Key key = make_key(i, j, x, y);
  {
    std::shared_lock lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  Vec v = compute_WW(i, j, x, y);
  std::unique_lock lock(mu_);
  if (cache_.size() >= kCacheLimit) cache_.clear();
  cache_.emplace(key, v);
  return v;
}

void NonlinearDriver::inject(std::size_t i, std::size_t j, const Vec& x, const Vec& y, const Vec& value) const {
  require(dyadic(i, j), "inject: only dyadic intervals are memoized");
  std::unique_lock lock(mu_);
  cache_[make_key(i, j, x, y)] = value;
}

void NonlinearDriver::clear_cache() const {
  std::unique_lock lock(mu_);
  cache_.clear();
}

std::size_t NonlinearDriver::cache_size() const {
  std::shared_lock lock(mu_);
  return cache_.size();
}

// ---- composition ----

namespace {

// Second-level integrand on one fine interval, linear in (phi, G):
//   sum_l K_l dX^l + sum_kl K'_kl XX(k,l) + 1/2 sum Q phi <X> - g phi
struct FineLeaf {
  std::size_t n, p;
  const Vec& dX;
  const Mat& XX;
  const Mat& BX;

  Vec operator()(const double* phi, const double* G, const Tensor& P, const Tensor& Q, const double* g) const {
    Vec out = zeros(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t l = 0; l < p; ++l) {
        double K = 0.0;
        for (std::size_t j = 0; j < n; ++j) K += P[(i * p + l) * n + j] * phi[j];
        s += K * dX[static_cast<Eigen::Index>(l)];
        for (std::size_t k = 0; k < p; ++k) {
          double Qphi = 0.0, PG = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            Qphi += Q[((i * p + l) * p + k) * n + j] * phi[j];
            PG += P[(i * p + l) * n + j] * G[j * p + k];
          }
          s += (Qphi + PG) * XX(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
          s += 0.5 * Qphi * BX(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
        }
      }
      for (std::size_t j = 0; j < n; ++j) s -= g[i * n + j] * phi[j];
      out[static_cast<Eigen::Index>(i)] = s;
    }
    return out;
  }
};

// Column q of the trailing y-slot.
Tensor slice_last(const Tensor& t, std::size_t n, std::size_t q) {
  Tensor r(t.size() / n);
  for (std::size_t a = 0; a < r.size(); ++a) r[a] = t[a * n + q];
  return r;
}

}  // namespace

CompositionDriver::CompositionDriver(FBundle f, RoughPath rp, int base_level)
    : NonlinearDriver(make_grid(rp.grid().T, base_level), f.space_dim), f_(std::move(f)), rp_(std::move(rp)) {
  require(f_.partial != nullptr, "composition: bundle has no partials");
  require(f_.path_dim == rp_.dim(), "composition: bundle path dimension differs from the rough path");
  require(f_.space_dim >= 1 && f_.space_dim <= static_cast<std::size_t>(kMaxDim), "composition: space dimension must lie in [1, 4]");
  require(base_level <= rp_.level(), "composition: base level finer than the rough path");
  r_ = rp_.level() - base_level;
  bx_.resize(rp_.grid().intervals());
  for (std::size_t m = 0; m < bx_.size(); ++m) bx_[m] = rp_.bracket(m, m + 1);
}

Tensor CompositionDriver::DkW(std::size_t i, std::size_t j, const Vec& x, int k) const {
  require(k >= 0 && k <= 3, "composition: derivative order out of range");
  return sub(f_.eval(0, k, rp_.X(fine(j)), x), f_.eval(0, k, rp_.X(fine(i)), x));
}

Vec CompositionDriver::compute_WW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  const std::size_t n = dim(), p = f_.path_dim, s = fine(i), e = fine(j);
  const Tensor phi_s = f_.eval(0, 0, rp_.X(s), x);
  Tensor g_prev = f_.eval(0, 1, rp_.X(s), y);
  Vec acc = zeros(n);
  for (std::size_t m = s; m < e; ++m) {
    const Vec a = rp_.X(m), dX = rp_.dX(m, m + 1);
    const Mat XX = rp_.leaf(m);
    const Tensor phi = f_.eval(0, 0, a, x), G = f_.eval(1, 0, a, x);
    const Tensor P = f_.eval(1, 1, a, y), Q = f_.eval(2, 1, a, y);
    const Tensor g_next = f_.eval(0, 1, rp_.X(m + 1), y);
    const Tensor g = sub(g_next, g_prev);
    acc += FineLeaf{n, p, dX, XX, bx_[m]}(phi.data(), G.data(), P, Q, g.data());
    const Tensor w = sub(phi, phi_s);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) acc[static_cast<Eigen::Index>(r)] += g[r * n + c] * w[c];
    g_prev = g_next;
  }
  return acc;
}

Mat CompositionDriver::DxWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  const std::size_t n = dim(), p = f_.path_dim, s = fine(i), e = fine(j);
  const Tensor Dphi_s = f_.eval(0, 1, rp_.X(s), x);
  Tensor g_prev = f_.eval(0, 1, rp_.X(s), y);
  Mat acc = zeros(n, n);
  for (std::size_t m = s; m < e; ++m) {
    const Vec a = rp_.X(m), dX = rp_.dX(m, m + 1);
    const Mat XX = rp_.leaf(m);
    const Tensor Dphi = f_.eval(0, 1, a, x), DG = f_.eval(1, 1, a, x);
    const Tensor P = f_.eval(1, 1, a, y), Q = f_.eval(2, 1, a, y);
    const Tensor g_next = f_.eval(0, 1, rp_.X(m + 1), y);
    const Tensor g = sub(g_next, g_prev);
    const FineLeaf leaf{n, p, dX, XX, bx_[m]};
    for (std::size_t q = 0; q < n; ++q) {
      const Tensor phi_q = slice_last(Dphi, n, q), G_q = slice_last(DG, n, q);
      acc.col(static_cast<Eigen::Index>(q)) += leaf(phi_q.data(), G_q.data(), P, Q, g.data());
    }
    const Mat chen = as_matrix(g, n, n) * as_matrix(sub(Dphi, Dphi_s), n, n);
    acc += chen;
    g_prev = g_next;
  }
  return acc;
}

Mat CompositionDriver::DyWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  const std::size_t n = dim(), p = f_.path_dim, s = fine(i), e = fine(j);
  const Tensor phi_s = f_.eval(0, 0, rp_.X(s), x);
  Tensor h_prev = f_.eval(0, 2, rp_.X(s), y);
  Mat acc = zeros(n, n);
  for (std::size_t m = s; m < e; ++m) {
    const Vec a = rp_.X(m), dX = rp_.dX(m, m + 1);
    const Mat XX = rp_.leaf(m);
    const Tensor phi = f_.eval(0, 0, a, x), G = f_.eval(1, 0, a, x);
    const Tensor DP = f_.eval(1, 2, a, y), DQ = f_.eval(2, 2, a, y);
    const Tensor h_next = f_.eval(0, 2, rp_.X(m + 1), y);
    const Tensor h = sub(h_next, h_prev);
    const Tensor w = sub(phi, phi_s);
    const FineLeaf leaf{n, p, dX, XX, bx_[m]};
    for (std::size_t q = 0; q < n; ++q) {
      const Tensor P_q = slice_last(DP, n, q), Q_q = slice_last(DQ, n, q), h_q = slice_last(h, n, q);
      Vec col = leaf(phi.data(), G.data(), P_q, Q_q, h_q.data());
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) col[static_cast<Eigen::Index>(r)] += h_q[r * n + c] * w[c];
      acc.col(static_cast<Eigen::Index>(q)) += col;
    }
    h_prev = h_next;
  }
  return acc;
}

Mat CompositionDriver::cross(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  const std::size_t n = dim(), p = f_.path_dim, s = fine(i), e = fine(j);
  const Vec phi_s = f_.value(rp_.X(s), x);
  Mat acc = zeros(n, n);
  for (std::size_t m = s; m < e; ++m) {
    const Vec a = rp_.X(m), b = rp_.X(m + 1);
    const Mat Gx = as_matrix(f_.eval(1, 0, a, x), n, p), Gy = as_matrix(f_.eval(1, 0, a, y), n, p);
    acc += Gx * rp_.leaf(m) * Gy.transpose();
    acc += (f_.value(a, x) - phi_s) * (f_.value(b, y) - f_.value(a, y)).transpose();
  }
  return acc;
}

namespace {

// sum_{k,l} sum_j F[i][k][j] G[j][l] Z(k,l), or Z(l,k) when transposed
Vec contract_FG(const Tensor& F, const Mat& G, const Mat& Z, std::size_t n, std::size_t p, bool transposed) {
  Vec out = zeros(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < p; ++k)
      for (std::size_t l = 0; l < p; ++l) {
        double fg = 0.0;
        for (std::size_t j = 0; j < n; ++j) fg += F[(i * p + k) * n + j] * G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
        const auto kk = static_cast<Eigen::Index>(k), ll = static_cast<Eigen::Index>(l);
        out[static_cast<Eigen::Index>(i)] += fg * (transposed ? Z(ll, kk) : Z(kk, ll));
      }
  return out;
}

}  // namespace

Vec CompositionDriver::star(std::size_t i, std::size_t j, const Vec& x) const {
  const std::size_t n = dim(), p = f_.path_dim, s = fine(i), e = fine(j);
  const Mat D_s = as_matrix(f_.eval(0, 1, rp_.X(s), x), n, n);
  Vec acc = zeros(n);
  for (std::size_t m = s; m < e; ++m) {
    const Vec a = rp_.X(m), b = rp_.X(m + 1);
    const Tensor F = f_.eval(1, 1, a, x);
    const Mat G = as_matrix(f_.eval(1, 0, a, x), n, p);
    acc += contract_FG(F, G, rp_.leaf(m), n, p, false);
    acc += (as_matrix(f_.eval(0, 1, a, x), n, n) - D_s) * (f_.value(b, x) - f_.value(a, x));
  }
  return acc;
}

Mat CompositionDriver::FF(std::size_t i, std::size_t j, const Vec& y) const {
  const std::size_t n = dim(), p = f_.path_dim, s = fine(i), e = fine(j), nn = n * n;
  const Tensor D_s = f_.eval(0, 1, rp_.X(s), y);
  Mat acc = zeros(nn, nn);
  Tensor D_prev = D_s;
  for (std::size_t m = s; m < e; ++m) {
    const Vec a = rp_.X(m);
    const Mat XX = rp_.leaf(m);
    const Tensor F = f_.eval(1, 1, a, y);
    const Tensor D_next = f_.eval(0, 1, rp_.X(m + 1), y);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t r2 = 0; r2 < n; ++r2)
          for (std::size_t c2 = 0; c2 < n; ++c2) {
            double v = 0.0;
            for (std::size_t k = 0; k < p; ++k)
              for (std::size_t l = 0; l < p; ++l)
                v += F[(r * p + k) * n + c] * F[(r2 * p + l) * n + c2] * XX(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
            v += (D_prev[r * n + c] - D_s[r * n + c]) * (D_next[r2 * n + c2] - D_prev[r2 * n + c2]);
            acc(static_cast<Eigen::Index>(r * n + c), static_cast<Eigen::Index>(r2 * n + c2)) += v;
          }
    D_prev = D_next;
  }
  return acc;
}

Mat CompositionDriver::bracket(std::size_t i, std::size_t j, const Vec& x) const {
  const std::size_t n = dim(), p = f_.path_dim;
  Mat acc = zeros(n, n);
  for (std::size_t m = fine(i); m < fine(j); ++m) {
    const Mat G = as_matrix(f_.eval(1, 0, rp_.X(m), x), n, p);
    acc += G * bx_[m] * G.transpose();
  }
  return acc;
}

Vec CompositionDriver::bracket_DW_W(std::size_t i, std::size_t j, const Vec& x) const {
  const std::size_t n = dim(), p = f_.path_dim;
  Vec acc = zeros(n);
  for (std::size_t m = fine(i); m < fine(j); ++m) {
    const Vec a = rp_.X(m);
    acc += contract_FG(f_.eval(1, 1, a, x), as_matrix(f_.eval(1, 0, a, x), n, p), bx_[m], n, p, false);
  }
  return acc;
}

Vec CompositionDriver::bracket_W_DW(std::size_t i, std::size_t j, const Vec& x) const {
  const std::size_t n = dim(), p = f_.path_dim;
  Vec acc = zeros(n);
  for (std::size_t m = fine(i); m < fine(j); ++m) {
    const Vec a = rp_.X(m);
    acc += contract_FG(f_.eval(1, 1, a, x), as_matrix(f_.eval(1, 0, a, x), n, p), bx_[m], n, p, true);
  }
  return acc;
}

// ---- smooth ----

SmoothDriver::SmoothDriver(SmoothField W, TimeGrid g, int refine)
    : NonlinearDriver(std::move(g), W.dim), W_(std::move(W)), refine_(refine + (refine % 2)) {
  require(W_.value && W_.rate, "smooth driver: field incomplete");
  require(W_.dim >= 1 && W_.dim <= static_cast<std::size_t>(kMaxDim), "smooth driver: dimension must lie in [1, 4]");
  require(refine >= 1, "smooth driver: refine factor must be positive");
}

template <class Fn>
auto SmoothDriver::simpson(std::size_t i, std::size_t j, Fn&& fn) const {
  const double s = grid().times[i], t = grid().times[j];
  const std::size_t N = static_cast<std::size_t>(refine_) * (j - i);
  const double h = (t - s) / static_cast<double>(N);
  auto acc = fn(s);
  for (std::size_t q = 1; q <= N; ++q) {
    const double w = (q == N) ? 1.0 : (q % 2 ? 4.0 : 2.0);
    acc += w * fn(s + h * static_cast<double>(q));
  }
  acc *= h / 3.0;
  if (!acc.allFinite()) throw ConvergenceError("smooth driver: non-finite quadrature");
  return acc;
}

Tensor SmoothDriver::DkW(std::size_t i, std::size_t j, const Vec& x, int k) const {
  require(k >= 0 && k <= 3, "smooth driver: derivative order out of range");
  return sub(W_.value(grid().times[j], x, k), W_.value(grid().times[i], x, k));
}

Vec SmoothDriver::compute_WW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  const std::size_t n = dim();
  const double s = grid().times[i];
  const Vec w_s = as_vec(W_.value(s, x, 0), n);
  return simpson(i, j, [&](double r) -> Vec {
    return as_matrix(W_.rate(r, y, 1), n, n) * (as_vec(W_.value(r, x, 0), n) - w_s);
  });
}

Mat SmoothDriver::DxWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  const std::size_t n = dim();
  const Mat D_s = as_matrix(W_.value(grid().times[i], x, 1), n, n);
  return simpson(i, j, [&](double r) -> Mat {
    return as_matrix(W_.rate(r, y, 1), n, n) * (as_matrix(W_.value(r, x, 1), n, n) - D_s);
  });
}

Mat SmoothDriver::DyWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  const std::size_t n = dim();
  const Vec w_s = as_vec(W_.value(grid().times[i], x, 0), n);
  return simpson(i, j, [&](double r) -> Mat {
    const Tensor H = W_.rate(r, y, 2);
    const Vec w = as_vec(W_.value(r, x, 0), n) - w_s;
    Mat out = zeros(n, n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t q = 0; q < n; ++q)
          out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(q)) += H[(a * n + c) * n + q] * w[static_cast<Eigen::Index>(c)];
    return out;
  });
}

Mat SmoothDriver::cross(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const {
  const std::size_t n = dim();
  const Vec w_s = as_vec(W_.value(grid().times[i], x, 0), n);
  return simpson(i, j, [&](double r) -> Mat {
    return (as_vec(W_.value(r, x, 0), n) - w_s) * as_vec(W_.rate(r, y, 0), n).transpose();
  });
}

Vec SmoothDriver::star(std::size_t i, std::size_t j, const Vec& x) const {
  const std::size_t n = dim();
  const Mat D_s = as_matrix(W_.value(grid().times[i], x, 1), n, n);
  return simpson(i, j, [&](double r) -> Vec {
    return (as_matrix(W_.value(r, x, 1), n, n) - D_s) * as_vec(W_.rate(r, x, 0), n);
  });
}

Mat SmoothDriver::FF(std::size_t i, std::size_t j, const Vec& y) const {
  const std::size_t n = dim(), nn = n * n;
  const Tensor D_s = W_.value(grid().times[i], y, 1);
  return simpson(i, j, [&](double r) -> Mat {
    const Tensor D = W_.value(r, y, 1), R = W_.rate(r, y, 1);
    Mat out(static_cast<Eigen::Index>(nn), static_cast<Eigen::Index>(nn));
    for (std::size_t u = 0; u < nn; ++u)
      for (std::size_t v = 0; v < nn; ++v) out(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = (D[u] - D_s[u]) * R[v];
    return out;
  });
}

Mat SmoothDriver::bracket(std::size_t i, std::size_t j, const Vec& x) const {
  const Vec w = W(i, j, x);
  return w * w.transpose() - 2.0 * cross(i, j, x, x);
}

Vec SmoothDriver::bracket_DW_W(std::size_t i, std::size_t j, const Vec& x) const {
  return DW(i, j, x) * W(i, j, x) - 2.0 * star(i, j, x);
}

Vec SmoothDriver::bracket_W_DW(std::size_t i, std::size_t j, const Vec& x) const {
  return DW(i, j, x) * W(i, j, x) - 2.0 * compute_WW(i, j, x, x);
}

std::shared_ptr<CompositionDriver> composition_driver(const FBundle& f, const RoughPath& rp, int base_level) {
  return std::make_shared<CompositionDriver>(f, rp, base_level);
}

std::shared_ptr<SmoothDriver> smooth_driver(const SmoothField& W, const TimeGrid& g, int refine) {
  return std::make_shared<SmoothDriver>(W, g, refine);
}

std::shared_ptr<CompositionDriver> linear_adapter(const RoughPath& rp, const std::vector<Mat>& A, int base_level) {
  return composition_driver(bilinear_bundle(A), rp, base_level);
}

std::shared_ptr<SmoothDriver> zero_driver(const TimeGrid& g, std::size_t dim) {
  return smooth_driver(zero_field(dim), g, 2);
}

}  // namespace roughkit
