#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace roughkit {

// Small tensors live on the stack; dimension of the state space is capped.
inline constexpr int kMaxDim = 4;
inline constexpr int kMaxFlat = kMaxDim * kMaxDim;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxFlat, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxFlat, kMaxFlat>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HypothesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

inline Vec zeros(std::size_t n) { return Vec::Zero(static_cast<Eigen::Index>(n)); }
inline Mat zeros(std::size_t r, std::size_t c) {
  return Mat::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

}  // namespace roughkit
