#pragma once

#include <functional>
#include <string>
#include <vector>

#include "roughkit/types.hpp"

namespace roughkit {

using Tensor = std::vector<double>;

// f : R^p x R^n -> R^n, (z, y) -> f(z, y), with mixed partials
// D_1^j D_2^k f(z, y) laid out as [i][z-slots][y-slots], row-major.
struct FBundle {
  std::string name;
  std::size_t path_dim = 1;
  std::size_t space_dim = 1;
  std::function<void(int j, int k, const Vec& z, const Vec& y, Tensor& out)> partial;
  bool analytic = true;

  Tensor eval(int j, int k, const Vec& z, const Vec& y) const {
    Tensor t;
    partial(j, k, z, y, t);
    return t;
  }
  Vec value(const Vec& z, const Vec& y) const;
  std::size_t size(int j, int k) const;
};

inline constexpr int kMaxPartialOrder = 4;  // j + k

// f(z, y) = sum_a z_a A_a y
FBundle bilinear_bundle(const std::vector<Mat>& A);
// e^{zy} in one dimension; componentwise exp(z_i y_i) otherwise
FBundle exp_product_bundle(std::size_t d);
// f(z, y) = sum_a z_a B_a sin(y) with sin applied componentwise
FBundle matrix_linear_bundle(const std::vector<Mat>& B);
// f(z, y) = R(sum_a z_a) y, plane rotation
FBundle rotation_bundle(std::size_t path_dim);
// Partials by nested central differences of the value map.
FBundle finite_difference_bundle(std::string name, std::size_t path_dim, std::size_t space_dim,
                                 std::function<Vec(const Vec&, const Vec&)> value);

std::vector<std::string> bundle_catalog();

}  // namespace roughkit
