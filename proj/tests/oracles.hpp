// Test-only reference computations. Nothing here calls into the closed-form
// kernels under test.

#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <complex>
#include <functional>

namespace oracle {

/// sum_{k <= terms} A^k / k!
template <typename Derived>
auto expm_series(const Eigen::MatrixBase<Derived>& a, int terms = 30) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  M sum = M::Identity(a.rows(), a.cols());
  M term = M::Identity(a.rows(), a.cols());
  for (int k = 1; k <= terms; ++k) {
    term = (term * a) / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

/// Relative 2-norm error |a - b| / |b| for real matrices.
inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

/// Central finite difference of a scalar function; used only where the
/// test wants a second, non-complex route.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
