#pragma once

#include <functional>
#include <vector>

#include "roughkit/rough_path.hpp"

namespace roughkit {

enum class Side { left, right };

// dZ = sum_a A_a Z dF^a (left) or dZ = sum_a Z A_a dF^a (right).
struct LinearField {
  std::vector<Mat> A;  // one n x n matrix per driver component
  Side side = Side::left;
};

// Additive correction on [t_k, t_{k+1}] given the state at t_k.
using YoungTerm = std::function<Mat(std::size_t k, const Mat& Z)>;

struct LinearSolution {
  TimeGrid grid;
  std::vector<Mat> Z;
  double sup_deviation = 0.0;  // sup_t |Z_t - Z_0|
};

LinearSolution solve_linear_rde(const LinearField& field, const RoughPath& drv, const Mat& init,
                                const YoungTerm& young = nullptr);

// Right side of the a priori bound |z0| exp(C T |A|^{1/a} max(1, (|F|_a + |FF|_2a)^{1/a})).
double linear_rde_bound(const LinearField& field, const RoughPath& drv, double alpha, double init_norm, double C);

}  // namespace roughkit
