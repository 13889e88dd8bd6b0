// Scalar helpers that behave identically for double and std::complex<double>.
//
// Everything here is written so that a function built from these pieces stays
// complex-analytic around real arguments. Branching decisions look at real
// parts only, transposes never conjugate, and "norms" are the unconjugated
// sqrt(sum z_i^2).

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numbers>
#include <type_traits>

namespace cslie {

using cd = std::complex<double>;

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using Mat3 = Eigen::Matrix<S, 3, 3>;
template <typename S>
using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat2 = Eigen::Matrix<S, 2, 2>;
template <typename S>
using Vec2 = Eigen::Matrix<S, 2, 1>;

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};
template <typename T>
inline constexpr bool is_complex_v = is_complex<T>::value;

/// Scalar types the library is instantiated for.
template <typename S>
concept Scalar = std::is_same_v<S, double> || std::is_same_v<S, cd>;

inline double real_part(double x) { return x; }
inline double real_part(const cd& x) { return x.real(); }
inline double imag_part(double) { return 0.0; }
inline double imag_part(const cd& x) { return x.imag(); }

/// abs() for complex-step use: sign decided by the real part, so the result
/// is analytic wherever Re(x) != 0.
template <Scalar S>
S cs_abs(const S& x) {
  return real_part(x) < 0.0 ? S(-x) : x;
}

template <Scalar S>
S cs_max(const S& a, const S& b) {
  return real_part(a) >= real_part(b) ? a : b;
}

template <Scalar S>
S cs_min(const S& a, const S& b) {
  return real_part(a) <= real_part(b) ? a : b;
}

template <typename Derived>
auto real_of(const Eigen::MatrixBase<Derived>& m) {
  if constexpr (is_complex_v<typename Derived::Scalar>) {
    return m.real().eval();
  } else {
    return m.eval();
  }
}

template <typename Derived>
auto imag_of(const Eigen::MatrixBase<Derived>& m) {
  using Plain = Eigen::Matrix<double, Derived::RowsAtCompileTime,
                              Derived::ColsAtCompileTime>;
  if constexpr (is_complex_v<typename Derived::Scalar>) {
    return Plain(m.imag());
  } else {
    return Plain(Plain::Zero(m.rows(), m.cols()));
  }
}

/// Unconjugated squared norm sum z_i^2.
template <typename Derived>
typename Derived::Scalar analytic_squared_norm(
    const Eigen::MatrixBase<Derived>& v) {
  return v.cwiseProduct(v).sum();
}

/// Unconjugated norm, principal-branch sqrt.
template <typename Derived>
typename Derived::Scalar analytic_norm(const Eigen::MatrixBase<Derived>& v) {
  using std::sqrt;
  return sqrt(analytic_squared_norm(v));
}

/// Largest absolute real part over all entries. Used for tolerance checks.
template <typename Derived>
double max_abs_real(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  return real_of(m).cwiseAbs().maxCoeff();
}

/// First-order analytic extension of atan2 about the real point
/// (Re y, Re x). Real inputs give the ordinary atan2.
template <Scalar S>
S atan2_cs(const S& y, const S& x);

/// Wrap the real part of an angle into (-pi, pi]; the imaginary part is kept.
template <Scalar S>
S wrap_angle(const S& a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double re = real_part(a);
  double wrapped = std::remainder(re, two_pi);
  if (wrapped <= -std::numbers::pi) wrapped += two_pi;
  return a + S(wrapped - re);
}

bool all_finite(double x);
bool all_finite(const cd& x);

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!all_finite(m(i, j))) return false;
  return true;
}

}  // namespace cslie
