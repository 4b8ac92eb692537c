#pragma once

#include <optional>
#include <vector>

#include "roughkit/constants.hpp"
#include "roughkit/controlled.hpp"
#include "roughkit/driver.hpp"
#include "roughkit/driver_analysis.hpp"

namespace roughkit {

// Path controlled by a nonlinear driver: Y_{s,t} = W_{s,t}(Ydot_s) + R_{s,t}.
struct NLControlledPath {
  SampledPath Y;
  SampledPath Ydot;
  DriverPtr driver;

  std::size_t dim() const { return Y.dim; }
  Vec remainder(std::size_t i, std::size_t j) const;
  TwoParamField remainder_field() const;
};

NLControlledPath make_nl_controlled(DriverPtr drv, SampledPath Y, SampledPath Ydot);

// Norms of a controlled path on its grid.
struct PathNorms {
  double Y_sup = 0.0, Ydot_sup = 0.0;
  double Y_alpha = 0.0, Ydot_alpha = 0.0, R_2alpha = 0.0;
};
PathNorms path_norms(const NLControlledPath& y, double alpha);

// Spatial samples for norm estimates: Y and Ydot values at `count` evenly spread times.
std::vector<Vec> path_samples(const NLControlledPath& y, std::size_t count = 5);

struct YoungOptions {
  int extra_levels = 6;   // first refinement above the output grid
  int max_extra = 14;
  int richardson = 2;     // rounds of extrapolation of the left-point sums
  double tol = 1e-10;
};

struct YoungResult {
  SampledPath I;  // I_0 = 0 on the output grid
  int final_level = 0;
  double last_change = 0.0;
  std::vector<double> totals;  // extrapolated I_T per refinement
};

// int_0^t W(dr, Y_r) as the limit of left-point sums of W increments.
YoungResult nl_young_integral(const SmoothField& W, const std::function<Vec(double)>& Y, const TimeGrid& out,
                              const YoungOptions& opt = {});

struct NLIntegralReport {
  SewReport sew;
  DriverNormReport driver_norms;
  PathNorms input;
  double C1 = 0.0;
  std::size_t violations = 0;
  bool bound_holds = true;
  double R_out = 0.0;        // 2 alpha estimate of the output remainder
  double R_out_bound = 0.0;  // right-hand side of the remainder estimate
  bool remainder_holds = true;
};

struct NLIntegralResult {
  NLControlledPath Z;  // Zdot = Y
  NLIntegralReport report;
};

struct NLIntegralOptions {
  SewOptions sew;
  std::size_t samples = 5;
  // Driver norms for the bound; estimated from the driver itself when absent.
  std::optional<DriverNormReport> norms;
  bool check_bounds = true;
};

NLIntegralResult nl_rough_integral(const NLControlledPath& ctrl, const AnalysisParams& p, const NLIntegralOptions& opt = {});

struct StabilityReport {
  double d = 0.0;
  double Y_gap = 0.0;  // |Y - Y~|_alpha
  double gap_bound = 0.0;
  bool gap_holds = true;
  bool integral_checked = false;
  double C3 = 0.0, C4 = 0.0, C5 = 0.0, rho = 0.0;
  double d_inputs = 0.0;
  double integral_bound = 0.0;
  bool integral_holds = true;
};

double nl_distance(const NLControlledPath& a, const NLControlledPath& b, double alpha);

// a, b may be integral outputs of a_in, b_in; the integral inequality is checked when both are given.
StabilityReport stability_distance(const NLControlledPath& a, const NLControlledPath& b, const AnalysisParams& p,
                                   const std::vector<Vec>& samples, const NLControlledPath* a_in = nullptr,
                                   const NLControlledPath* b_in = nullptr);

struct EquivalenceResult {
  SampledPath nonlinear;  // int W(dr, Y_r)
  SampledPath linear;     // int D1 f(X, Y) dX + 1/2 int D11 f(X, Y) d<X>
  SampledPath young;      // the bracket term alone
  double gap = 0.0;      // max over grid times
  double end_gap = 0.0;  // at the final time
};

// ctrl must be driven by a composition driver with no refinement.
EquivalenceResult eqlnri_check(const NLControlledPath& ctrl, double alpha, const SewOptions& opt = {});

}  // namespace roughkit
