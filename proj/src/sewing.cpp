#include "roughkit/sewing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "roughkit/constants.hpp"

namespace roughkit {

SewResult sew(const TimeGrid& g, std::size_t dim, const Approximant& xi, double gamma, const SewOptions& opt) {
  require(gamma > 1.0, "sew: exponent must exceed 1");
  require(g.size() >= 2, "sew: grid too short");
  const int L = g.level;
  require(g.intervals() == (std::size_t{1} << L), "sew: dyadic grid required");

  // Xi on every dyadic node, level by level.
  std::vector<std::vector<Vec>> node(static_cast<std::size_t>(L) + 1);
  for (int m = 0; m <= L; ++m) {
    const std::size_t count = std::size_t{1} << m, width = std::size_t{1} << (L - m);
    auto& row = node[static_cast<std::size_t>(m)];
    row.assign(count, Vec());
#pragma omp parallel for schedule(dynamic, 4) if (opt.parallel)
    for (long long kk = 0; kk < static_cast<long long>(count); ++kk) {
      const auto k = static_cast<std::size_t>(kk);
      row[k] = xi(k * width, (k + 1) * width);
    }
  }

  SewResult out;
  out.J = SampledPath(g, dim);
  Vec acc = zeros(dim);
  out.J.set(0, acc);
  const auto& leaves = node[static_cast<std::size_t>(L)];
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    require(leaves[k].size() == static_cast<Eigen::Index>(dim) && leaves[k].allFinite(), "sew: non-finite approximant");
    acc += leaves[k];
    out.J.set(k + 1, acc);
  }

  SewReport& rep = out.report;
  rep.gamma = gamma;
  rep.sewing_const = sewing_constant(gamma);

  std::vector<Vec> totals(static_cast<std::size_t>(L) + 1);
  double scale = 1.0;
  for (int m = 0; m <= L; ++m) {
    Vec s = zeros(dim);
    for (const Vec& v : node[static_cast<std::size_t>(m)]) {
      s += v;
      scale = std::max(scale, v.norm());
    }
    totals[static_cast<std::size_t>(m)] = s;
  }
  const double tot_scale = std::max(1.0, totals.back().norm());
  rep.level_change.assign(static_cast<std::size_t>(L) + 1, 0.0);
  for (int m = 1; m <= L; ++m) {
    rep.level_change[static_cast<std::size_t>(m)] =
        (totals[static_cast<std::size_t>(m)] - totals[static_cast<std::size_t>(m - 1)]).norm() / tot_scale;
    if (rep.converged_level < 0 && rep.level_change[static_cast<std::size_t>(m)] < opt.rel_tol) rep.converged_level = m;
  }
  if (opt.check_convergence && L >= 4 && L <= opt.level_cap) {
    const double last = rep.level_change[static_cast<std::size_t>(L)];
    const double prev = rep.level_change[static_cast<std::size_t>(L - 1)];
    if (last > opt.rel_tol && last >= prev)
      throw ConvergenceError("sew: dyadic sums not converging (level change " + std::to_string(last) +
                             " after " + std::to_string(prev) + ")");
  }

  double C = 0.0;
  for (int m = 0; m < L; ++m) {
    const std::size_t width = std::size_t{1} << (L - m);
    const auto& parent = node[static_cast<std::size_t>(m)];
    const auto& child = node[static_cast<std::size_t>(m + 1)];
    for (std::size_t k = 0; k < parent.size(); ++k) {
      const double span = g.span(k * width, (k + 1) * width);
      C = std::max(C, (parent[k] - child[2 * k] - child[2 * k + 1]).norm() / std::pow(span, gamma));
    }
  }
  rep.observed_C = C;

  for (int m = 0; m <= L; ++m) {
    const std::size_t width = std::size_t{1} << (L - m);
    const auto& row = node[static_cast<std::size_t>(m)];
    for (std::size_t k = 0; k < row.size(); ++k) {
      IntervalDefect d;
      d.level = m;
      d.i = k * width;
      d.j = (k + 1) * width;
      d.span = g.span(d.i, d.j);
      d.defect = (out.J.inc(d.i, d.j) - row[k]).norm();
      rep.max_ratio = std::max(rep.max_ratio, d.defect / std::pow(d.span, gamma));
      out.defects.push_back(d);
    }
  }
  rep.violations = count_violations(out.defects, rep.sewing_const * C, gamma, 1e-13 * scale);
  rep.bound_holds = rep.violations == 0;
  return out;
}

std::size_t count_violations(const std::vector<IntervalDefect>& d, double C, double p, double slack) {
  std::size_t bad = 0;
  for (const auto& x : d)
    if (x.defect > C * std::pow(x.span, p) + slack) ++bad;
  return bad;
}

}  // namespace roughkit
