#pragma once

#include <functional>
#include <string>
#include <vector>

#include "roughkit/grid.hpp"
#include "roughkit/seminorm.hpp"

namespace roughkit {

enum class LiftKind { smooth_canonical, pure_area, perturbed_geometric, custom };
std::string to_string(LiftKind k);

// A curve t -> X_t with its time derivative, used for canonical lifts.
struct SmoothCurve {
  std::size_t dim = 1;
  std::function<Vec(double)> value;
  std::function<Vec(double)> deriv;
};

SmoothCurve linear_curve(const Vec& velocity);
SmoothCurve sine_curve(const Vec& amplitude, double frequency, double phase);
SmoothCurve circle_curve(double radius);

// Second level stored on the dyadic interval tree of the grid: level m holds
// the 2^m intervals of length T/2^m. Arbitrary pairs are assembled from the
// maximal dyadic blocks with Chen's relation.
class RoughPath {
 public:
  RoughPath() = default;
  // Leaves are the finest-level second-level increments; coarser nodes follow from Chen.
  RoughPath(SampledPath X, const std::vector<Mat>& leaves, LiftKind kind);

  const TimeGrid& grid() const { return X_.grid; }
  std::size_t dim() const { return X_.dim; }
  int level() const { return X_.grid.level; }
  LiftKind provenance() const { return kind_; }
  const SampledPath& path() const { return X_; }

  Vec X(std::size_t k) const { return X_.at(k); }
  Vec dX(std::size_t i, std::size_t j) const { return X_.inc(i, j); }
  Mat XX(std::size_t i, std::size_t j) const;
  Mat bracket(std::size_t i, std::size_t j) const;  // X⊗X - 2 XX

  Mat node(int m, std::size_t k) const;
  void set_node(int m, std::size_t k, const Mat& v);
  Mat leaf(std::size_t k) const { return node(level(), k); }

  TwoParamField second_level() const;
  TwoParamField bracket_field() const;

 private:
  SampledPath X_;
  LiftKind kind_ = LiftKind::custom;
  std::vector<std::vector<double>> tree_;
};

RoughPath make_canonical_lift(const SmoothCurve& c, const TimeGrid& g, int refine = 8);
RoughPath make_pure_area_lift(const Mat& A, const TimeGrid& g);
RoughPath make_perturbed_lift(const SmoothCurve& c, const Mat& A, const TimeGrid& g, int refine = 8);
// Custom lift from the path and every tree node (nodes[m][k]); rejected when
// the nodes violate Chen's relation beyond tol * scale.
RoughPath make_custom_lift(const SampledPath& X, const std::vector<std::vector<Mat>>& nodes, double tol = 1e-12);

// All triples are scanned up to this many points, midpoint triples beyond.
inline constexpr std::size_t kChenAllTriplesLimit = kAllPairsLimit;

struct ChenReport {
  double residual = 0.0;
  double scale = 1.0;
  std::size_t triples = 0;
};

ChenReport chen_residual(const RoughPath& rp);
ChenReport chen_residual_serial(const RoughPath& rp);

}  // namespace roughkit
