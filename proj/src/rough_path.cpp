#include "roughkit/rough_path.hpp"

#include <algorithm>
#include <cmath>

namespace roughkit {

std::string to_string(LiftKind k) {
  switch (k) {
    case LiftKind::smooth_canonical: return "smooth_canonical";
    case LiftKind::pure_area: return "pure_area";
    case LiftKind::perturbed_geometric: return "perturbed_geometric";
    case LiftKind::custom: return "custom";
  }
  return "custom";
}

SmoothCurve linear_curve(const Vec& velocity) {
  SmoothCurve c;
  c.dim = static_cast<std::size_t>(velocity.size());
  c.value = [velocity](double t) -> Vec { return velocity * t; };
  c.deriv = [velocity](double) -> Vec { return velocity; };
  return c;
}

SmoothCurve sine_curve(const Vec& amplitude, double frequency, double phase) {
  SmoothCurve c;
  c.dim = static_cast<std::size_t>(amplitude.size());
  const double w = 2.0 * M_PI * frequency;
  // component i is shifted by i quarter turns so that multi-d curves enclose area
  c.value = [amplitude, w, phase](double t) -> Vec {
    Vec v(amplitude.size());
    for (Eigen::Index i = 0; i < amplitude.size(); ++i)
      v[i] = amplitude[i] * std::sin(w * t + phase + 0.5 * M_PI * static_cast<double>(i));
    return v;
  };
  c.deriv = [amplitude, w, phase](double t) -> Vec {
    Vec v(amplitude.size());
    for (Eigen::Index i = 0; i < amplitude.size(); ++i)
      v[i] = amplitude[i] * w * std::cos(w * t + phase + 0.5 * M_PI * static_cast<double>(i));
    return v;
  };
  return c;
}

SmoothCurve circle_curve(double radius) {
  SmoothCurve c;
  c.dim = 2;
  const double w = 2.0 * M_PI;
  c.value = [radius, w](double t) -> Vec {
    Vec v(2);
    v << radius * std::cos(w * t), radius * std::sin(w * t);
    return v;
  };
  c.deriv = [radius, w](double t) -> Vec {
    Vec v(2);
    v << -radius * w * std::sin(w * t), radius * w * std::cos(w * t);
    return v;
  };
  return c;
}

namespace {

Mat read_block(const std::vector<double>& buf, std::size_t k, std::size_t d) {
  Mat m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = buf[k * d * d + a * d + b];
  return m;
}

void write_block(std::vector<double>& buf, std::size_t k, std::size_t d, const Mat& m) {
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) buf[k * d * d + a * d + b] = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
}

}  // namespace

RoughPath::RoughPath(SampledPath X, const std::vector<Mat>& leaves, LiftKind kind) : X_(std::move(X)), kind_(kind) {
  const int L = X_.grid.level;
  const std::size_t d = X_.dim;
  require(d >= 1 && d <= static_cast<std::size_t>(kMaxFlat), "rough path: dimension must lie in [1, 16]");
  require(leaves.size() == X_.grid.intervals(), "rough path: one leaf per finest interval required");
  require(X_.finite(), "rough path: non-finite path values");
  tree_.assign(static_cast<std::size_t>(L) + 1, {});
  for (int m = 0; m <= L; ++m) tree_[static_cast<std::size_t>(m)].assign((std::size_t{1} << m) * d * d, 0.0);
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    require(leaves[k].allFinite(), "rough path: non-finite second level");
    write_block(tree_[static_cast<std::size_t>(L)], k, d, leaves[k]);
  }
  for (int m = L - 1; m >= 0; --m) {
    const std::size_t width = std::size_t{1} << (L - m);
    for (std::size_t k = 0; k < (std::size_t{1} << m); ++k) {
      const std::size_t a = k * width, mid = a + width / 2, b = a + width;
      Mat parent = node(m + 1, 2 * k) + node(m + 1, 2 * k + 1) + dX(a, mid) * dX(mid, b).transpose();
      write_block(tree_[static_cast<std::size_t>(m)], k, d, parent);
    }
  }
}

Mat RoughPath::node(int m, std::size_t k) const { return read_block(tree_[static_cast<std::size_t>(m)], k, dim()); }

void RoughPath::set_node(int m, std::size_t k, const Mat& v) { write_block(tree_[static_cast<std::size_t>(m)], k, dim(), v); }

Mat RoughPath::XX(std::size_t i, std::size_t j) const {
  const int L = level();
  const std::size_t d = dim();
  Mat acc = zeros(d, d);
  std::size_t pos = i;
  while (pos < j) {
    std::size_t size = pos == 0 ? (std::size_t{1} << L) : (pos & (~pos + 1));
    while (pos + size > j) size >>= 1;
    const int m = L - static_cast<int>(std::log2(static_cast<double>(size)) + 0.5);
    acc += node(m, pos / size);
    if (pos > i) acc += dX(i, pos) * dX(pos, pos + size).transpose();
    pos += size;
  }
  return acc;
}

Mat RoughPath::bracket(std::size_t i, std::size_t j) const {
  Vec x = dX(i, j);
  return x * x.transpose() - 2.0 * XX(i, j);
}

TwoParamField RoughPath::second_level() const {
  TwoParamField f;
  f.grid = grid();
  f.rows = f.cols = dim();
  f.eval = [this](std::size_t i, std::size_t j) { return XX(i, j); };
  return f;
}

TwoParamField RoughPath::bracket_field() const {
  TwoParamField f;
  f.grid = grid();
  f.rows = f.cols = dim();
  f.eval = [this](std::size_t i, std::size_t j) { return bracket(i, j); };
  return f;
}

namespace {

// Composite Simpson for the area part of one interval; symmetric part is exact.
Mat canonical_leaf(const SmoothCurve& c, double s, double t, int refine) {
  const int n = std::max(2, refine + (refine % 2));
  const double h = (t - s) / n;
  const Vec xs = c.value(s);
  const std::size_t d = c.dim;
  Mat q = zeros(d, d);
  for (int k = 0; k <= n; ++k) {
    const double r = s + h * k;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    q += w * (c.value(r) - xs) * c.deriv(r).transpose();
  }
  q *= h / 3.0;
  const Vec dx = c.value(t) - xs;
  return 0.5 * dx * dx.transpose() + 0.5 * (q - q.transpose());
}

SampledPath curve_samples(const SmoothCurve& c, const TimeGrid& g) {
  return sample_path(g, c.dim, c.value);
}

}  // namespace

RoughPath make_canonical_lift(const SmoothCurve& c, const TimeGrid& g, int refine) {
  SampledPath X = curve_samples(c, g);
  std::vector<Mat> leaves(g.intervals());
  for (std::size_t k = 0; k < g.intervals(); ++k) {
    Mat leaf = canonical_leaf(c, g.times[k], g.times[k + 1], refine);
    // keep the symmetric part tied to the stored increments
    const Vec dx = X.inc(k, k + 1);
    leaves[k] = 0.5 * dx * dx.transpose() + 0.5 * (leaf - leaf.transpose());
  }
  return RoughPath(std::move(X), leaves, LiftKind::smooth_canonical);
}

RoughPath make_pure_area_lift(const Mat& A, const TimeGrid& g) {
  require(A.rows() == A.cols(), "pure_area: square matrix required");
  const auto d = static_cast<std::size_t>(A.rows());
  SampledPath X(g, d);
  std::vector<Mat> leaves(g.intervals());
  for (std::size_t k = 0; k < g.intervals(); ++k) leaves[k] = (g.times[k + 1] - g.times[k]) * A;
  return RoughPath(std::move(X), leaves, LiftKind::pure_area);
}

RoughPath make_perturbed_lift(const SmoothCurve& c, const Mat& A, const TimeGrid& g, int refine) {
  require(A.rows() == static_cast<Eigen::Index>(c.dim) && A.cols() == A.rows(), "perturbed lift: shape mismatch");
  RoughPath base = make_canonical_lift(c, g, refine);
  std::vector<Mat> leaves(g.intervals());
  for (std::size_t k = 0; k < g.intervals(); ++k) leaves[k] = base.leaf(k) + (g.times[k + 1] - g.times[k]) * A;
  return RoughPath(base.path(), leaves, LiftKind::perturbed_geometric);
}

RoughPath make_custom_lift(const SampledPath& X, const std::vector<std::vector<Mat>>& nodes, double tol) {
  const int L = X.grid.level;
  require(nodes.size() == static_cast<std::size_t>(L) + 1, "custom lift: one node array per tree level");
  RoughPath rp(X, nodes[static_cast<std::size_t>(L)], LiftKind::custom);
  double worst = 0.0, scale = 1.0;
  for (int m = 0; m < L; ++m) {
    require(nodes[static_cast<std::size_t>(m)].size() == (std::size_t{1} << m), "custom lift: wrong node count");
    for (std::size_t k = 0; k < (std::size_t{1} << m); ++k) {
      const Mat& given = nodes[static_cast<std::size_t>(m)][k];
      worst = std::max(worst, (given - rp.node(m, k)).norm());
      scale = std::max(scale, given.norm());
    }
  }
  require(worst <= tol * scale, "custom lift: second level violates Chen's relation");
  return rp;
}

namespace {

struct PairTable {
  std::size_t n = 0, d = 0;
  std::vector<double> v;  // upper triangle, row i holds pairs (i, i+1..n-1)
  std::vector<std::size_t> offset;
  Mat get(std::size_t i, std::size_t j) const { return read_block(v, offset[i] + (j - i - 1), d); }
};

PairTable build_table(const RoughPath& rp) {
  PairTable t;
  t.n = rp.grid().size();
  t.d = rp.dim();
  t.offset.resize(t.n);
  std::size_t off = 0;
  for (std::size_t i = 0; i < t.n; ++i) {
    t.offset[i] = off;
    off += t.n - i - 1;
  }
  t.v.assign(off * t.d * t.d, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (long long ii = 0; ii < static_cast<long long>(t.n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = i + 1; j < t.n; ++j) write_block(t.v, t.offset[i] + (j - i - 1), t.d, rp.XX(i, j));
  }
  return t;
}

double triple_defect(const Mat& ik, const Mat& ij, const Mat& jk, const Vec& a, const Vec& b) {
  return (ik - ij - jk - a * b.transpose()).norm();
}

template <bool Parallel>
ChenReport chen_impl(const RoughPath& rp) {
  require(rp.grid().size() >= 3, "chen_residual: need at least three grid points");
  ChenReport rep;
  const std::size_t n = rp.grid().size();
  double worst = 0.0, scale = 1.0;
  std::size_t count = 0;
  if (n <= kChenAllTriplesLimit) {
    const PairTable tab = build_table(rp);
#pragma omp parallel for reduction(max : worst, scale) reduction(+ : count) schedule(dynamic, 4) if (Parallel)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      for (std::size_t k = i + 2; k < n; ++k) {
        const Mat ik = tab.get(i, k);
        scale = std::max(scale, ik.norm());
        const Vec xik = rp.dX(i, k);
        scale = std::max(scale, xik.squaredNorm());
        for (std::size_t j = i + 1; j < k; ++j) {
          worst = std::max(worst, triple_defect(ik, tab.get(i, j), tab.get(j, k), rp.dX(i, j), rp.dX(j, k)));
          ++count;
        }
      }
    }
  } else {
#pragma omp parallel for reduction(max : worst, scale) reduction(+ : count) schedule(dynamic, 4) if (Parallel)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      for (std::size_t k = i + 2; k < n; k += 2) {
        const std::size_t j = (i + k) / 2;
        const Mat ik = rp.XX(i, k);
        scale = std::max({scale, ik.norm(), rp.dX(i, k).squaredNorm()});
        worst = std::max(worst, triple_defect(ik, rp.XX(i, j), rp.XX(j, k), rp.dX(i, j), rp.dX(j, k)));
        ++count;
      }
    }
  }
  rep.residual = worst;
  rep.scale = scale;
  rep.triples = count;
  return rep;
}

}  // namespace

ChenReport chen_residual(const RoughPath& rp) { return chen_impl<true>(rp); }
ChenReport chen_residual_serial(const RoughPath& rp) { return chen_impl<false>(rp); }

}  // namespace roughkit
