#include "roughkit/grid.hpp"

#include <string>

namespace roughkit {

TimeGrid make_grid(double T, int level) {
  require(T > 0.0 && std::isfinite(T), "make_grid: horizon must be positive");
  require(level >= 0 && level <= 24, "make_grid: level must lie in [0, 24]");
  TimeGrid g;
  g.T = T;
  g.level = level;
  const std::size_t n = std::size_t{1} << level;
  g.times.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) g.times[k] = static_cast<double>(k) * T / static_cast<double>(n);
  g.times[n] = T;
  return g;
}

TimeGrid coarsen(const TimeGrid& g, int drop) {
  require(drop >= 0 && drop <= g.level, "coarsen: drop exceeds grid level");
  return make_grid(g.T, g.level - drop);
}

SampledPath::SampledPath(TimeGrid g, std::size_t d) : grid(std::move(g)), dim(d), data(grid.size() * d, 0.0) {}

Vec SampledPath::at(std::size_t k) const {
  Vec v(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) v[static_cast<Eigen::Index>(i)] = data[k * dim + i];
  return v;
}

void SampledPath::set(std::size_t k, const Vec& v) {
  for (std::size_t i = 0; i < dim; ++i) data[k * dim + i] = v[static_cast<Eigen::Index>(i)];
}

double SampledPath::sup_norm() const {
  double m = 0.0;
  for (std::size_t k = 0; k < size(); ++k) m = std::max(m, at(k).norm());
  return m;
}

bool SampledPath::finite() const {
  for (double x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

SampledPath sample_path(const TimeGrid& g, std::size_t d, const std::function<Vec(double)>& fn) {
  SampledPath p(g, d);
  for (std::size_t k = 0; k < g.size(); ++k) p.set(k, fn(g.times[k]));
  return p;
}

TwoParamField increments(const SampledPath& p) {
  TwoParamField f;
  f.grid = p.grid;
  f.rows = p.dim;
  f.cols = 1;
  f.eval = [&p](std::size_t i, std::size_t j) -> Mat { return p.inc(i, j); };
  return f;
}

}  // namespace roughkit
