#include "roughkit/constants.hpp"

#include <algorithm>
#include <cmath>

#include "roughkit/types.hpp"

namespace roughkit {

void AnalysisParams::validate() const {
  require(alpha > 1.0 / 3.0 && alpha <= 0.5, "alpha must lie in (1/3, 1/2]");
  require(T > 0.0 && std::isfinite(T), "T must be positive");
  for (double b : beta) require(b >= 0.0 && std::isfinite(b), "beta entries must be nonnegative");
}

double AnalysisParams::gamma1() const {
  return std::max(beta[0], beta[1]) + std::max(beta[1], beta[2]);
}

double AnalysisParams::gamma2() const {
  return std::max({beta[0], beta[1], beta[2]}) + std::max({beta[1], beta[2], beta[3]}) + beta[1];
}

double AnalysisParams::beta_star(int k) const {
  double m = 0.0;
  for (int i = 0; i <= std::min(k, 3); ++i) m = std::max(m, beta[static_cast<std::size_t>(i)]);
  return m;
}

double AnalysisParams::beta_star2(int k) const {
  double m = 0.0;
  for (int i = 1; i <= std::min(k + 1, 3); ++i) m = std::max(m, beta[static_cast<std::size_t>(i)]);
  return m;
}

double sewing_constant(double gamma) { return 1.0 / (1.0 - std::pow(2.0, 1.0 - gamma)); }

double k_alpha(double alpha) { return sewing_constant(3.0 * alpha); }

double pow0(double x, double p) {
  if (p == 0.0) return 1.0;
  return std::pow(x, p);
}

double hypothesis_value(const AnalysisParams& p) {
  const double g2 = p.gamma2();
  return g2 / p.alpha - g2 + p.beta[0];
}

bool hypothesis_holds(double value) { return value <= 1.0 + 1e-12; }

ConstantsReport bound_constants(const AnalysisParams& p, double driver_norm, double xi_norm) {
  p.validate();
  ConstantsReport c;
  const double a = p.alpha;
  const double g1 = p.gamma1();
  const double g2 = p.gamma2();
  const double g1f = std::max(g1, 1.0);  // floor inside the divergent factors
  const double ka = k_alpha(a);
  c.k_alpha = ka;
  c.gamma1 = g1;
  c.gamma2 = g2;
  c.driver_norm = driver_norm;
  c.xi_norm = xi_norm;

  const double growth = std::pow(1.0 + g1, 1.0 + g1) * pow0(g1, -g1);
  const double h1_base = 12.0 * ka * driver_norm * growth * pow0(1.0 + 2.0 * xi_norm, g1);
  c.h1 = h1_base > 0.0 ? std::min(std::pow(h1_base, -1.0 / a), 1.0) : 1.0;

  const double first = 2.0 * (18.0 * g1 * g1 + 15.0 * g1 + 2.0) / (3.0 * g1f * g1f) * ka *
                       pow0((3.0 * g1 + 2.0) / (3.0 * g1f) + 4.0, g2);
  const double second = 12.0 * ka * growth;
  c.C6 = std::max(first, second);
  const double w2 = (1.0 + driver_norm) * (1.0 + driver_norm);
  c.h2 = std::pow(2.0 * c.C6 * w2 * pow0(1.0 + xi_norm, g2), -1.0 / a);
  c.C7 = std::pow(1.0 + 1.0 / (6.0 * g1f), 1.0 + p.beta[0]) / (2.0 * c.C6);
  c.K0 = std::pow(2.0 * c.C6 * w2, 1.0 / a) * (g2 / a) * c.C7 * pow0(1.0 + c.C7, g2 / a);
  c.hypothesis_value = hypothesis_value(p);
  c.hypothesis_H_holds = hypothesis_holds(c.hypothesis_value);
  return c;
}

double window_length(const ConstantsReport& c, double alpha, double xi_norm) {
  const double w2 = (1.0 + c.driver_norm) * (1.0 + c.driver_norm);
  return std::pow(2.0 * c.C6 * w2 * pow0(1.0 + xi_norm, c.gamma2), -1.0 / alpha);
}

}  // namespace roughkit
