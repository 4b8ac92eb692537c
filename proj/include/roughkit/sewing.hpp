#pragma once

#include <functional>
#include <vector>

#include "roughkit/grid.hpp"

namespace roughkit {

// Two-parameter approximant evaluated on grid index pairs (i < j).
using Approximant = std::function<Vec(std::size_t, std::size_t)>;

struct SewOptions {
  double rel_tol = 1e-10;
  int level_cap = 16;
  bool parallel = true;
  bool check_convergence = true;
};

struct IntervalDefect {
  int level = 0;
  std::size_t i = 0, j = 0;
  double span = 0.0;
  double defect = 0.0;  // |J_{s,t} - Xi_{s,t}|
};

struct SewReport {
  double gamma = 0.0;
  double observed_C = 0.0;    // max |delta Xi| / |t-s|^gamma over dyadic triples
  double sewing_const = 0.0;  // (1 - 2^{1-gamma})^{-1}
  double max_ratio = 0.0;     // max |J - Xi| / |t-s|^gamma over dyadic intervals
  bool bound_holds = true;
  std::size_t violations = 0;
  std::vector<double> level_change;  // relative change of the level-m total
  int converged_level = -1;
};

struct SewResult {
  SampledPath J;  // J_0 = 0, additive on the grid
  SewReport report;
  std::vector<IntervalDefect> defects;
};

SewResult sew(const TimeGrid& g, std::size_t dim, const Approximant& xi, double gamma, const SewOptions& opt = {});

// Number of violations of |J - Xi| <= C |t-s|^p (+ roundoff slack) among the defects.
std::size_t count_violations(const std::vector<IntervalDefect>& d, double C, double p, double slack = 1e-12);

}  // namespace roughkit
