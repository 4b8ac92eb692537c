#include "roughkit/linear_rde.hpp"

#include <algorithm>
#include <cmath>

#include "roughkit/seminorm.hpp"

namespace roughkit {

LinearSolution solve_linear_rde(const LinearField& field, const RoughPath& drv, const Mat& init, const YoungTerm& young) {
  const std::size_t d = drv.dim();
  require(field.A.size() == d, "solve_linear_rde: one matrix per driver component required");
  for (const Mat& a : field.A) {
    require(a.rows() == a.cols(), "solve_linear_rde: coefficient matrices must be square");
    if (field.side == Side::left)
      require(a.cols() == init.rows(), "solve_linear_rde: coefficient does not act on the state");
    else
      require(a.rows() == init.cols(), "solve_linear_rde: coefficient does not act on the state");
  }
  LinearSolution sol;
  sol.grid = drv.grid();
  sol.Z.resize(sol.grid.size());
  sol.Z[0] = init;
  // Products A_b A_a (left) or A_a A_b (right) reused across steps.
  std::vector<Mat> AA(d * d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      AA[a * d + b] = field.side == Side::left ? Mat(field.A[b] * field.A[a]) : Mat(field.A[a] * field.A[b]);

  for (std::size_t k = 0; k + 1 < sol.grid.size(); ++k) {
    const Mat& Z = sol.Z[k];
    const Vec dF = drv.dX(k, k + 1);
    const Mat FF = drv.leaf(k);
    Mat step = zeros(static_cast<std::size_t>(field.A.front().rows()), static_cast<std::size_t>(field.A.front().cols()));
    for (std::size_t a = 0; a < d; ++a) {
      step += dF[static_cast<Eigen::Index>(a)] * field.A[a];
      for (std::size_t b = 0; b < d; ++b) step += FF(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * AA[a * d + b];
    }
    Mat next = field.side == Side::left ? Mat(Z + step * Z) : Mat(Z + Z * step);
    if (young) next += young(k, Z);
    if (!next.allFinite()) throw ConvergenceError("solve_linear_rde: state diverged at step " + std::to_string(k));
    sol.Z[k + 1] = next;
    sol.sup_deviation = std::max(sol.sup_deviation, (next - init).norm());
  }
  return sol;
}

double linear_rde_bound(const LinearField& field, const RoughPath& drv, double alpha, double init_norm, double C) {
  double a_norm = 0.0;
  for (const Mat& a : field.A) a_norm += a.squaredNorm();
  a_norm = std::sqrt(a_norm);
  const double rough = holder_seminorm(drv.path(), alpha) + holder_seminorm(drv.second_level(), 2.0 * alpha);
  const double T = drv.grid().T;
  return init_norm * std::exp(C * T * std::pow(a_norm, 1.0 / alpha) * std::max(1.0, std::pow(rough, 1.0 / alpha)));
}

}  // namespace roughkit
