#pragma once

#include <array>
#include <utility>
#include <vector>

#include "roughkit/constants.hpp"
#include "roughkit/driver.hpp"
#include "roughkit/seminorm.hpp"

namespace roughkit {

using PointPair = std::pair<Vec, Vec>;

struct NLChenReport {
  double residual = 0.0;
  double scale = 1.0;
  std::size_t triples = 0;
};

// Dyadic (parent, left, right) triples at every level plus consecutive triples.
NLChenReport nl_chen_residual(const NonlinearDriver& drv, const std::vector<PointPair>& pairs);
NLChenReport nl_chen_residual_serial(const NonlinearDriver& drv, const std::vector<PointPair>& pairs);

struct DriverNormReport {
  std::array<double, 4> W_terms{0, 0, 0, 0};  // weighted alpha seminorms of D^k W
  std::array<double, 2> WW_terms{0, 0};       // weighted 2 alpha seminorms of WW and its first derivative
  int order = 0;
  double W_norm = 0.0;
  double WW_norm = 0.0;
  double total = 0.0;  // estimate of the driver norm
};

// Grid/sample estimate; a lower bound of the continuous norm.
DriverNormReport weighted_driver_norm(const NonlinearDriver& drv, const AnalysisParams& p, const std::vector<Vec>& samples,
                                      int order, PairBudget budget = PairBudget::automatic, bool second_level = true);

// Same estimate for the difference of two drivers on one grid (the pseudometric rho).
DriverNormReport driver_distance(const NonlinearDriver& a, const NonlinearDriver& b, const AnalysisParams& p,
                                 const std::vector<Vec>& samples, int order, PairBudget budget = PairBudget::automatic,
                                 bool second_level = true);

struct TaylorReport {
  double value = 0.0, bound = 0.0;
  bool holds = true;
  double deriv_value = 0.0, deriv_bound = 0.0;
  bool deriv_holds = true;
};

// Value remainder W(y) - W(x) - DW(x)(y - x) of the increment W_{s,t} and its derivative in direction (z1, z2).
TaylorReport taylor_remainder_phi(const NonlinearDriver& drv, const DriverNormReport& norms, const AnalysisParams& p,
                                  std::size_t i, std::size_t j, const Vec& x, const Vec& y, const Vec& z1, const Vec& z2);
// Difference WW(y1, y2) - WW(x1, x2) of the second level and the first-order bound.
TaylorReport taylor_remainder_psi(const NonlinearDriver& drv, const DriverNormReport& norms, const AnalysisParams& p,
                                  std::size_t i, std::size_t j, const PointPair& x, const PointPair& y);

}  // namespace roughkit
