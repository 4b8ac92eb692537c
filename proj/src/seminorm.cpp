#include "roughkit/seminorm.hpp"

#include <algorithm>
#include <cmath>

namespace roughkit {

bool scans_all_pairs(std::size_t points, PairBudget budget) {
  if (budget == PairBudget::all) return true;
  if (budget == PairBudget::dyadic_spans) return false;
  return points <= kAllPairsLimit;
}

namespace {

// Beyond the all-pairs limit: every pair on the coarsest sub-lattice that fits
// the limit, plus dyadic spans from every start. The coarse lattice keeps the
// estimate monotone when the grid is refined across the limit.
std::size_t lattice_stride(std::size_t lo, std::size_t hi, bool all) {
  if (all) return 1;
  std::size_t stride = 1;
  while ((hi - lo) / stride + 1 > kAllPairsLimit) stride <<= 1;
  return stride;
}

double scan_row(std::size_t lo, std::size_t i, std::size_t hi, bool all, std::size_t stride, const PairScore& score) {
  double best = 0.0;
  if (all) {
    for (std::size_t j = i + 1; j <= hi; ++j) best = std::max(best, score(i, j));
    return best;
  }
  for (std::size_t span = 1; i + span <= hi; span <<= 1) best = std::max(best, score(i, i + span));
  if ((i - lo) % stride == 0)
    for (std::size_t j = i + stride; j <= hi; j += stride) best = std::max(best, score(i, j));
  return best;
}

}  // namespace

double max_over_pairs_serial(std::size_t lo, std::size_t hi, PairBudget budget, const PairScore& score) {
  require(hi > lo, "seminorm: need at least two grid points");
  const bool all = scans_all_pairs(hi - lo + 1, budget);
  const std::size_t stride = lattice_stride(lo, hi, all);
  double best = 0.0;
  for (std::size_t i = lo; i < hi; ++i) best = std::max(best, scan_row(lo, i, hi, all, stride, score));
  return best;
}

double max_over_pairs(std::size_t lo, std::size_t hi, PairBudget budget, const PairScore& score) {
  require(hi > lo, "seminorm: need at least two grid points");
  const bool all = scans_all_pairs(hi - lo + 1, budget);
  const std::size_t stride = lattice_stride(lo, hi, all);
  const auto n = static_cast<long long>(hi - lo);
  double best = 0.0;
#pragma omp parallel for reduction(max : best) schedule(dynamic, 16)
  for (long long r = 0; r < n; ++r) {
    best = std::max(best, scan_row(lo, lo + static_cast<std::size_t>(r), hi, all, stride, score));
  }
  return best;
}

double holder_seminorm(const SampledPath& p, double alpha, std::size_t lo, std::size_t hi, PairBudget budget) {
  require(alpha > 0.0 && alpha <= 1.0, "holder_seminorm: alpha must lie in (0, 1]");
  require(p.size() >= 2 && hi < p.size(), "holder_seminorm: empty or short grid");
  const auto& t = p.grid.times;
  return max_over_pairs(lo, hi, budget, [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < p.dim; ++c) {
      double d = p.data[j * p.dim + c] - p.data[i * p.dim + c];
      s += d * d;
    }
    return std::sqrt(s) / std::pow(t[j] - t[i], alpha);
  });
}

double holder_seminorm(const SampledPath& p, double alpha, PairBudget budget) {
  return holder_seminorm(p, alpha, 0, p.size() - 1, budget);
}

double holder_seminorm(const TwoParamField& f, double alpha, std::size_t lo, std::size_t hi, PairBudget budget) {
  require(alpha > 0.0 && alpha <= 1.0, "holder_seminorm: alpha must lie in (0, 1]");
  require(f.grid.size() >= 2 && hi < f.grid.size(), "holder_seminorm: empty or short grid");
  const auto& t = f.grid.times;
  return max_over_pairs(lo, hi, budget,
                        [&](std::size_t i, std::size_t j) { return f.eval(i, j).norm() / std::pow(t[j] - t[i], alpha); });
}

double holder_seminorm(const TwoParamField& f, double alpha, PairBudget budget) {
  return holder_seminorm(f, alpha, 0, f.grid.size() - 1, budget);
}

}  // namespace roughkit
