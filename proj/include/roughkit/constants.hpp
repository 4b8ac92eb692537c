#pragma once

#include <array>
#include <limits>

namespace roughkit {

struct AnalysisParams {
  double alpha = 0.45;
  double T = 1.0;
  std::array<double, 4> beta{0.0, 0.0, 0.0, 0.0};

  void validate() const;
  double gamma1() const;
  double gamma2() const;
  // max(beta_0..beta_k) and max(beta_1..beta_{k+1}); weights of the second level.
  double beta_star(int k) const;
  double beta_star2(int k) const;
};

struct ConstantsReport {
  double k_alpha = 0.0;
  double C1 = std::numeric_limits<double>::quiet_NaN();
  double h1 = 0.0;
  double h2 = 0.0;
  double C6 = 0.0;
  double C7 = 0.0;
  double K0 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double hypothesis_value = 0.0;
  bool hypothesis_H_holds = false;
  double driver_norm = 0.0;
  double xi_norm = 0.0;
};

double sewing_constant(double gamma);  // (1 - 2^{1-gamma})^{-1}
double k_alpha(double alpha);          // sewing_constant(3 alpha)

// x^p with the convention 0^0 = 1.
double pow0(double x, double p);

double hypothesis_value(const AnalysisParams& p);
// Tolerates rounding at the boundary value 1.
bool hypothesis_holds(double value);
ConstantsReport bound_constants(const AnalysisParams& p, double driver_norm, double xi_norm);

// Step size of the first Picard window for a given initial norm.
double window_length(const ConstantsReport& c, double alpha, double xi_norm);

}  // namespace roughkit
