#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "roughkit/types.hpp"

namespace roughkit {

struct TimeGrid {
  double T = 1.0;
  int level = 0;
  std::vector<double> times;

  std::size_t size() const { return times.size(); }
  std::size_t intervals() const { return times.size() - 1; }
  double mesh() const { return T / static_cast<double>(intervals()); }
  double span(std::size_t i, std::size_t j) const { return std::abs(times[j] - times[i]); }
};

TimeGrid make_grid(double T, int level);

// Coarser grid obtained by keeping every 2^drop-th point.
TimeGrid coarsen(const TimeGrid& g, int drop);

struct SampledPath {
  TimeGrid grid;
  std::size_t dim = 0;
  std::vector<double> data;  // point-major, dim entries per grid point

  SampledPath() = default;
  SampledPath(TimeGrid g, std::size_t d);

  std::size_t size() const { return grid.size(); }
  Vec at(std::size_t k) const;
  void set(std::size_t k, const Vec& v);
  Vec inc(std::size_t i, std::size_t j) const { return at(j) - at(i); }
  double sup_norm() const;
  bool finite() const;
};

SampledPath sample_path(const TimeGrid& g, std::size_t d, const std::function<Vec(double)>& fn);

// Two-parameter object evaluated lazily on grid index pairs. Values are
// matrices; vectors use a single column.
struct TwoParamField {
  TimeGrid grid;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::function<Mat(std::size_t, std::size_t)> eval;
};

TwoParamField increments(const SampledPath& p);

}  // namespace roughkit
