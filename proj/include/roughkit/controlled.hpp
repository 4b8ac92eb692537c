#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "roughkit/rough_path.hpp"
#include "roughkit/sewing.hpp"

namespace roughkit {

// Path controlled by a linear rough path: Y_{s,t} = Yp_s X_{s,t} + R_{s,t}.
// Matrix-valued integrands (n x d) are flattened row-major into n*d entries.
struct ControlledPath {
  SampledPath Y;
  std::vector<Mat> Yp;  // value_dim x driver_dim per grid point

  std::size_t value_dim() const { return Y.dim; }
  std::size_t driver_dim() const { return Yp.empty() ? 0 : static_cast<std::size_t>(Yp.front().cols()); }
  Vec remainder(const RoughPath& rp, std::size_t i, std::size_t j) const;
  TwoParamField remainder_field(const RoughPath& rp) const;
  SampledPath derivative_path() const;
};

ControlledPath make_controlled(const TimeGrid& g, std::size_t value_dim, std::size_t driver_dim,
                               const std::function<Vec(double)>& value, const std::function<Mat(double)>& deriv);
// Y = X with Y' = identity.
ControlledPath identity_controlled(const RoughPath& rp);

// Map R^m -> R^k with first and second derivatives.
struct SmoothMap {
  std::size_t in_dim = 1, out_dim = 1;
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> jacobian;              // k x m
  std::function<std::vector<Mat>(const Vec&)> hessian;  // k entries of m x m
};
SmoothMap identity_map(std::size_t m);
SmoothMap square_map();  // y -> y^2 in one dimension
SmoothMap exp_map(std::size_t m);  // componentwise exponential

struct RoughIntegralReport {
  SewReport sew;
  double X_norm = 0.0, R_norm = 0.0, XX_norm = 0.0, Yp_norm = 0.0;
  double bound_C = 0.0;  // k_alpha (|X| |R| + |XX| |Y'|)
  std::size_t violations = 0;
  bool bound_holds = true;
};

struct RoughIntegralResult {
  ControlledPath Z;  // Z_0 = 0, Z' = Y reshaped to n x d
  RoughIntegralReport report;
};

RoughIntegralResult rough_integral(const ControlledPath& ctrl, const RoughPath& rp, double alpha,
                                   const SewOptions& opt = {});

ControlledPath compose_controlled(const SmoothMap& phi, const ControlledPath& ctrl);

// int Z (x) dY on the grid (flattened p * my + q), starting at 0.
SampledPath product_integral(const ControlledPath& z, const ControlledPath& y, const RoughPath& rp,
                             const SewOptions& opt = {});

// Fields reference the input paths, which must outlive the set.
struct BracketSet {
  TwoParamField bracket_X;  // <X>
  TwoParamField ZY;         // <Z, Y>, mz x my
  TwoParamField YZ;         // <Y, Z>, my x mz
  std::optional<TwoParamField> ZY_dir;  // <<Z, Y>> when Z acts on Y
  std::optional<TwoParamField> YZ_dir;  // <<Y, Z>>
  double isometry_gap = 0.0;            // max_t |sum <Y,Z>_{k,k+1} - sum Y'_k (x) Z'_k <X>_{k,k+1}|
};

BracketSet brackets(const ControlledPath& z, const ControlledPath& y, const RoughPath& rp, const SewOptions& opt = {});

struct ItoReport {
  double residual = 0.0;  // max over grid times of the gap
  double lhs_end = 0.0, rhs_end = 0.0;
};

// Both sides of the rough Ito formula for f(Y, Z), f acting on the stacked vector (Y, Z).
ItoReport ito_residual(const SmoothMap& f, const ControlledPath& y, const ControlledPath& z, const RoughPath& rp,
                       const SewOptions& opt = {});

// Least-squares slope of -log2(err) against level.
double fitted_order(const std::vector<int>& levels, const std::vector<double>& errors);

}  // namespace roughkit
