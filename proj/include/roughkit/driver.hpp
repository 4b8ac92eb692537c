#pragma once

#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "roughkit/fbundle.hpp"
#include "roughkit/rough_path.hpp"

namespace roughkit {

// Vector field W(t, x) on R^n, smooth in time, with spatial derivatives.
struct SmoothField {
  std::size_t dim = 1;
  std::function<Tensor(double t, const Vec& x, int k)> value;  // D^k_x W(t, x), layout [i][x-slots]
  std::function<Tensor(double t, const Vec& x, int k)> rate;   // d/dt of the same
};

SmoothField field_from_bundle(const FBundle& f, const SmoothCurve& c);
SmoothField zero_field(std::size_t dim);

Mat as_matrix(const Tensor& t, std::size_t rows, std::size_t cols);

// Nonlinear rough path (W, WW) sampled on a base grid. Increments are taken
// between base grid indices i <= j.
class NonlinearDriver {
 public:
  NonlinearDriver(TimeGrid g, std::size_t dim) : grid_(std::move(g)), dim_(dim) {}
  virtual ~NonlinearDriver() = default;

  virtual std::string kind() const = 0;
  const TimeGrid& grid() const { return grid_; }
  std::size_t dim() const { return dim_; }
  virtual int max_order() const { return 3; }

  // D^k W_{s,t}(x), k = 0..3
  virtual Tensor DkW(std::size_t i, std::size_t j, const Vec& x, int k) const = 0;
  Vec W(std::size_t i, std::size_t j, const Vec& x) const;
  Mat DW(std::size_t i, std::size_t j, const Vec& x) const;

  // WW_{s,t}(x, y), memoized on dyadic intervals.
  Vec WW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const;
  virtual Mat DxWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const = 0;
  virtual Mat DyWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const = 0;

  // int W_{s,r}(x) (x) dW_r(y)
  virtual Mat cross(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const = 0;
  // int DW_{s,r}(x) dW_r(x)
  virtual Vec star(std::size_t i, std::size_t j, const Vec& x) const = 0;
  // int DW_{s,r}(y) (x) dDW_r(y), indices (i n + j, p n + q)
  virtual Mat FF(std::size_t i, std::size_t j, const Vec& y) const = 0;

  // <W(x)>, <<DW(x), W(x)>>, <<W(x), DW(x)>>
  virtual Mat bracket(std::size_t i, std::size_t j, const Vec& x) const = 0;
  virtual Vec bracket_DW_W(std::size_t i, std::size_t j, const Vec& x) const = 0;
  virtual Vec bracket_W_DW(std::size_t i, std::size_t j, const Vec& x) const = 0;

  // Overwrites a memo entry; used to exercise the Chen check.
  void inject(std::size_t i, std::size_t j, const Vec& x, const Vec& y, const Vec& value) const;
  void clear_cache() const;
  std::size_t cache_size() const;

 protected:
  virtual Vec compute_WW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const = 0;

 private:
  struct Key {
    std::size_t i, j;
    double x[kMaxDim], y[kMaxDim];
    bool operator==(const Key& o) const;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };
  Key make_key(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const;

  TimeGrid grid_;
  std::size_t dim_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<Key, Vec, KeyHash> cache_;
};

using DriverPtr = std::shared_ptr<const NonlinearDriver>;

// W(t, x) = f(X_t, x) with X carried on a grid 2^r times finer than the base grid.
class CompositionDriver final : public NonlinearDriver {
 public:
  CompositionDriver(FBundle f, RoughPath rp, int base_level);
  std::string kind() const override { return "composition"; }
  const FBundle& bundle() const { return f_; }
  const RoughPath& rough_path() const { return rp_; }
  int refinement() const { return r_; }

  Tensor DkW(std::size_t i, std::size_t j, const Vec& x, int k) const override;
  Mat DxWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const override;
  Mat DyWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const override;
  Mat cross(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const override;
  Vec star(std::size_t i, std::size_t j, const Vec& x) const override;
  Mat FF(std::size_t i, std::size_t j, const Vec& y) const override;
  Mat bracket(std::size_t i, std::size_t j, const Vec& x) const override;
  Vec bracket_DW_W(std::size_t i, std::size_t j, const Vec& x) const override;
  Vec bracket_W_DW(std::size_t i, std::size_t j, const Vec& x) const override;

 protected:
  Vec compute_WW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const override;

 private:
  std::size_t fine(std::size_t i) const { return i << r_; }
  FBundle f_;
  RoughPath rp_;
  int r_;
  std::vector<Mat> bx_;  // dX dX^T - 2 XX on each fine interval
};

// Defining integrals evaluated by composite Simpson quadrature.
class SmoothDriver final : public NonlinearDriver {
 public:
  SmoothDriver(SmoothField W, TimeGrid g, int refine = 8);
  std::string kind() const override { return "smooth"; }
  const SmoothField& field() const { return W_; }

  Tensor DkW(std::size_t i, std::size_t j, const Vec& x, int k) const override;
  Mat DxWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const override;
  Mat DyWW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const override;
  Mat cross(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const override;
  Vec star(std::size_t i, std::size_t j, const Vec& x) const override;
  Mat FF(std::size_t i, std::size_t j, const Vec& y) const override;
  Mat bracket(std::size_t i, std::size_t j, const Vec& x) const override;
  Vec bracket_DW_W(std::size_t i, std::size_t j, const Vec& x) const override;
  Vec bracket_W_DW(std::size_t i, std::size_t j, const Vec& x) const override;

 protected:
  Vec compute_WW(std::size_t i, std::size_t j, const Vec& x, const Vec& y) const override;

 private:
  template <class Fn>
  auto simpson(std::size_t i, std::size_t j, Fn&& fn) const;
  SmoothField W_;
  int refine_;
};

std::shared_ptr<CompositionDriver> composition_driver(const FBundle& f, const RoughPath& rp, int base_level);
std::shared_ptr<SmoothDriver> smooth_driver(const SmoothField& W, const TimeGrid& g, int refine = 8);
// W_{s,t}(x) = sum_a X^a_{s,t} A_a x, the linear case.
std::shared_ptr<CompositionDriver> linear_adapter(const RoughPath& rp, const std::vector<Mat>& A, int base_level);
std::shared_ptr<SmoothDriver> zero_driver(const TimeGrid& g, std::size_t dim);

}  // namespace roughkit
