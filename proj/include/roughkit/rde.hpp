#pragma once

#include <optional>
#include <string>
#include <vector>

#include "roughkit/nonlinear_integral.hpp"

namespace roughkit {

enum class RDEMode { picard, onestep };
std::string to_string(RDEMode m);
RDEMode parse_rde_mode(const std::string& s);

struct RDEOptions {
  RDEMode mode = RDEMode::onestep;
  AnalysisParams params;
  bool global = true;          // refuse when hypothesis H fails; otherwise solve on [0, h1] only
  double tol = 1e-10;          // on the distance between successive Picard iterates
  int max_iter = 60;
  std::size_t window_intervals = 0;     // 0: windows of length h2 (at least one interval)
  std::optional<double> driver_norm;    // estimated around the initial value when absent
  bool self_check = true;               // one-step: compare with the scheme on every other grid point
};

struct WindowInfo {
  std::size_t i0 = 0, i1 = 0;
  double xi_norm = 0.0;
  double eps = 0.0;  // theoretical window length h2 at this start value
  bool harmonic_ok = true;
  int iterations = 0;
  std::vector<double> distances;  // d between successive iterates
  std::vector<double> factors;    // ratios of successive distances
};

struct RDEDiagnostics {
  ConstantsReport constants;
  std::vector<WindowInfo> windows;
  double holder_norm = 0.0;
  double self_consistency = 0.0;  // one-step: sup gap to the half-resolution scheme
  std::size_t last_index = 0;     // solution valid on grid indices [0, last_index]
  std::string warning;
};

struct RDESolution {
  NLControlledPath Y;  // Ydot = Y
  RDEDiagnostics diag;
};

// Driver norm estimate over samples around xi (xi and xi +- (1 + |xi|) e_i).
double driver_norm_around(const NonlinearDriver& drv, const AnalysisParams& p, const Vec& xi);

RDESolution solve_rde(const DriverPtr& drv, const Vec& xi, const RDEOptions& opt = {});

struct AprioriReport {
  double local_norm = 0.0;   // |Y|_alpha on the first window [0, h]
  double local_bound = 0.0;  // explicit minimum of the two local bounds
  bool local_holds = true;
  double global_norm = 0.0;  // |Y|_alpha on [0, T]
  double global_form = 0.0;  // growth form without the constant
  double global_bound = 0.0; // calibrated constant times the form
  bool global_holds = true;
  double margin = 0.0;       // local_bound / local_norm
};

// Constant of the global growth bound. Fit once as the largest measured ratio
// over W(t, x) = a t x, a and |xi| in {0.5, 1, 2}, beta = 0, level 10 (0.545), then frozen.
inline constexpr double kGrowthConstant = 0.55;

AprioriReport apriori_report(const RDESolution& sol, const AnalysisParams& p, const Vec& xi);

struct SensitivityReport {
  double d = 0.0;
  double ratio = 0.0;  // d / |xi - xi~|
  double sup_gap = 0.0;
};

SensitivityReport sensitivity_report(const DriverPtr& drv, const Vec& xi, const Vec& xi_tilde, const RDEOptions& opt = {});

struct SensitivitySweep {
  std::vector<double> sizes, ratios;
  double spread = 0.0;  // max relative deviation from the smallest perturbation's ratio
  bool linear = true;
};

// Perturbations xi + size * direction for each size; linear when ratios agree within tol.
SensitivitySweep sensitivity_sweep(const DriverPtr& drv, const Vec& xi, const Vec& direction, const std::vector<double>& sizes,
                                   const RDEOptions& opt = {}, double tol = 0.05);

}  // namespace roughkit
