#pragma once

#include <string>
#include <vector>

#include "roughkit/controlled.hpp"
#include "roughkit/rde.hpp"

namespace roughkit {

// Tensor grid of base points, the same count on every axis.
struct SpatialGrid {
  Vec lo, hi;
  std::size_t count = 2;

  std::size_t dim() const { return static_cast<std::size_t>(lo.size()); }
  std::size_t size() const;
  double spacing(std::size_t axis) const;
  Vec point(std::size_t idx) const;
  bool contains(const Vec& z, double slack = 0.0) const;
};

SpatialGrid make_spatial_grid(const Vec& lo, const Vec& hi, std::size_t count);

struct FlowOptions {
  RDEOptions rde;
  bool second_derivatives = false;  // D^2 Y by central differences of DY, needed for the RPDE
  double fd_step = 1e-4;
  bool parallel = true;
};

// Per base point data from the Jacobian equations.
struct PointJacobian {
  std::vector<Mat> DY;
  std::vector<Mat> M;            // product-preserving inverse
  std::vector<Mat> M_printed;    // inverse equation with the compensator contracted as M A B
  std::vector<Mat> M_symmetric;  // same with the symmetrized compensator
  RoughPath F;                   // first level int DW(dr, Y), flattened i d + j
  std::vector<std::vector<Mat>> D2Y;  // per time, d slices: slice l = d/dx_l DY
};

struct FlowField {
  DriverPtr driver;
  SpatialGrid space;
  FlowOptions options;
  double driver_norm = 0.0;
  std::vector<SampledPath> Y;  // per base point
  std::vector<PointJacobian> jac;
  bool has_jacobians = false;
  double product_gap = 0.0;    // sup |DY M - I|
  double printed_gap = 0.0;    // sup |M_printed - M|
  double symmetric_gap = 0.0;  // sup |M_symmetric - M|

  std::size_t times() const { return driver->grid().size(); }
};

// Values of the flow and its spatial derivatives at an arbitrary point, by
// quintic Hermite interpolation in one dimension and multilinear otherwise.
struct FlowLocal {
  Vec Y;
  Mat DY;
  Mat slope;             // derivative of the interpolant of Y itself
  std::vector<Mat> D2Y;  // empty without second derivatives
  Mat M;
  std::vector<Mat> DM;   // slice l = d/dz_l M
};
FlowLocal flow_local(const FlowField& flow, std::size_t k, const Vec& z);

FlowField solve_flow(const DriverPtr& drv, const SpatialGrid& space, const FlowOptions& opt = {});
void jacobians(FlowField& flow);

struct InverseFlow {
  std::size_t k = 0;
  std::vector<Vec> queries;
  std::vector<std::vector<Vec>> paths;  // Z_0 .. Z_k per query
  std::vector<Vec> Z;                   // at time k, polished against exact flow solves
  std::vector<Mat> DZ;
  int max_iterations = 0;
  double zst2_constant = 0.0;  // max residual / |t - s|^{3 alpha} of the second order increment expansion
};

inline constexpr double kNewtonTol = 1e-12;
inline constexpr int kNewtonMaxIter = 50;

InverseFlow invert_flow(const FlowField& flow, const std::vector<Vec>& queries, std::size_t k, bool expansion_check = true);

struct RPDESolution {
  const FlowField* flow = nullptr;
  SmoothMap h;
  std::vector<Vec> queries;
  std::vector<std::vector<Vec>> Z;         // [query][time]
  std::vector<std::vector<Vec>> u;         // [query][time]
  std::vector<std::vector<Mat>> Du;        // out_dim x d
  std::vector<std::vector<std::vector<Mat>>> D2u;  // out_dim entries of d x d
};

RPDESolution rpde_solution(const SmoothMap& h, const FlowField& flow, const std::vector<Vec>& queries);

struct RPDEResidual {
  double rough_integral = 0.0;  // sup |int Du W(dr, x)|
  double bracket_DW_W = 0.0;    // sup of each Young term
  double bracket_W_DW = 0.0;
  double bracket_W = 0.0;
  double defect = 0.0;          // sup over (t, x) of the full identity
  double naive_defect = 0.0;    // brackets dropped
  double constancy_drift = 0.0; // max_t |u(t, Y_t(x)) - h(x)| at the base points
  std::vector<std::vector<double>> defect_path;  // [query][time]
};

RPDEResidual rpde_residual(const RPDESolution& sol);

}  // namespace roughkit
