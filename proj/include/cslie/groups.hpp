// Matrix Lie group kernels for SO(3), SE(2), SE(3), SE2(3), T(n) and their
// block-diagonal composites.
//
// Every function is a template over the scalar type so the same code path is
// evaluated with real and complex arguments. Closed forms are used throughout;
// nothing here calls a general matrix exponential, logarithm, or inverse.
//
// Tangent ordering:
//   SO3  [phi(3)]
//   SE2  [phi, r1, r2]
//   SE3  [phi(3), r(3)]
//   SE23 [phi(3), v(3), r(3)]
//   Rn   [x(n)]
//   Composite: the concatenation of the blocks.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cslie/errors.hpp"
#include "cslie/group_kind.hpp"
#include "cslie/scalar.hpp"

namespace cslie {

/// Real part of the rotation angle below which the sinc-family coefficients
/// switch to their 4-term Maclaurin series. The truncation error there is
/// below 1e-24, while the closed forms of (phi - sin phi)/phi^3 and the
/// J_l^{-1} coefficient lose digits to cancellation at smaller angles.
inline constexpr double kSmallAngle = 1e-3;
/// Logarithm refuses rotation angles this close to pi.
inline constexpr double kLogAngleMargin = 1e-9;
/// Off-pattern tolerance used by vee.
inline constexpr double kPatternTol = 1e-12;

// ---------------------------------------------------------------------------
// Tangent vectors and group elements
// ---------------------------------------------------------------------------

template <Scalar S>
struct Tangent {
  GroupKind kind;
  VecX<S> coords;

  Tangent(GroupKind k, VecX<S> c) : kind(std::move(k)), coords(std::move(c)) {
    if (coords.size() != kind.dof()) {
      throw DimensionError("tangent of kind " + kind.name() + " needs " +
                           std::to_string(kind.dof()) + " coordinates, got " +
                           std::to_string(coords.size()));
    }
  }

  static Tangent zero(const GroupKind& k) {
    return Tangent(k, VecX<S>::Zero(k.dof()));
  }
  /// jh along basis direction i, or h along it when S is real.
  static Tangent basis(const GroupKind& k, int i, S value) {
    VecX<S> c = VecX<S>::Zero(k.dof());
    c(i) = value;
    return Tangent(k, std::move(c));
  }

  auto block(int k) const {
    return coords.segment(kind.dof_offset(k), kind.block(k).dof());
  }
};

template <Scalar S>
class Element {
 public:
  /// A non-composite element. The matrix must be dim x dim.
  Element(GroupKind kind, MatX<S> m) : kind_(std::move(kind)), m_(std::move(m)) {
    if (kind_.is_composite()) {
      throw ValidationError("use composite_pack to build composite elements");
    }
    if (m_.rows() != kind_.dim() || m_.cols() != kind_.dim()) {
      throw DimensionError("element of kind " + kind_.name() + " must be " +
                           std::to_string(kind_.dim()) + "x" +
                           std::to_string(kind_.dim()));
    }
  }

  static Element identity(const GroupKind& kind) {
    if (!kind.is_composite()) {
      return Element(kind, MatX<S>::Identity(kind.dim(), kind.dim()));
    }
    std::vector<Element> blocks;
    blocks.reserve(kind.children().size());
    for (const auto& c : kind.children()) blocks.push_back(identity(c));
    return Element(kind, std::move(blocks));
  }

  const GroupKind& kind() const { return kind_; }
  bool is_composite() const { return kind_.is_composite(); }

  /// The matrix of a non-composite element.
  const MatX<S>& mat() const {
    if (is_composite()) throw ValidationError("mat() called on a composite element");
    return m_;
  }

  /// Full matrix representation; composites are materialized block-diagonally.
  MatX<S> matrix() const {
    if (!is_composite()) return m_;
    MatX<S> out = MatX<S>::Zero(kind_.dim(), kind_.dim());
    for (int k = 0; k < kind_.block_count(); ++k) {
      const int o = kind_.dim_offset(k);
      const auto& b = blocks_[static_cast<std::size_t>(k)].m_;
      out.block(o, o, b.rows(), b.cols()) = b;
    }
    return out;
  }

  /// Blocks of a composite element; a non-composite element has none.
  std::span<const Element> blocks() const { return blocks_; }
  const Element& block(int k) const {
    return is_composite() ? blocks_.at(static_cast<std::size_t>(k)) : *this;
  }
  /// Replace block k of a composite element.
  void set_block(int k, Element b) {
    if (!is_composite()) throw ValidationError("set_block on non-composite element");
    if (!(b.kind() == kind_.block(k))) throw DimensionError("block kind mismatch");
    blocks_.at(static_cast<std::size_t>(k)) = std::move(b);
  }

  Element operator*(const Element& rhs) const {
    if (!(kind_ == rhs.kind_)) {
      throw DimensionError("cannot multiply " + kind_.name() + " by " + rhs.kind_.name());
    }
    if (!is_composite()) return Element(kind_, m_ * rhs.m_);
    std::vector<Element> out;
    out.reserve(blocks_.size());
    for (std::size_t k = 0; k < blocks_.size(); ++k) out.push_back(blocks_[k] * rhs.blocks_[k]);
    return Element(kind_, std::move(out));
  }

  template <Scalar T>
  Element<T> cast() const {
    if (!is_composite()) return Element<T>(kind_, m_.template cast<T>());
    std::vector<Element<T>> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) out.push_back(b.template cast<T>());
    return Element<T>::from_blocks(kind_, std::move(out));
  }

  /// Real part of every entry.
  Element<double> real() const {
    if (!is_composite()) return Element<double>(kind_, real_of(m_));
    std::vector<Element<double>> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) out.push_back(b.real());
    return Element<double>::from_blocks(kind_, std::move(out));
  }

  static Element from_blocks(GroupKind kind, std::vector<Element> blocks) {
    return Element(std::move(kind), std::move(blocks));
  }

 private:
  Element(GroupKind kind, std::vector<Element> blocks)
      : kind_(std::move(kind)), blocks_(std::move(blocks)) {}

  GroupKind kind_;
  MatX<S> m_;
  std::vector<Element> blocks_;
};

// ---------------------------------------------------------------------------
// Sinc-family coefficients as functions of theta2 = phi^2
// ---------------------------------------------------------------------------

namespace detail {

/// phi and phi^2 together, with the series switch already decided.
template <Scalar S>
struct Angle {
  S phi;
  S phi2;
  bool series;
};

template <Scalar S>
Angle<S> angle_from_phi2(const S& phi2) {
  using std::sqrt;
  const S phi = sqrt(phi2);
  return {phi, phi2, std::abs(real_part(phi)) < kSmallAngle};
}

template <Scalar S>
Angle<S> angle_from_phi(const S& phi) {
  return {phi, phi * phi, std::abs(real_part(phi)) < kSmallAngle};
}

// sin(phi)/phi
template <Scalar S>
S coef_a(const Angle<S>& a) {
  using std::sin;
  if (a.series) {
    const S t = a.phi2;
    return S(1.0) - t / 6.0 + t * t / 120.0 - t * t * t / 5040.0;
  }
  return sin(a.phi) / a.phi;
}

// (1 - cos(phi))/phi^2
template <Scalar S>
S coef_b(const Angle<S>& a) {
  using std::sin;
  if (a.series) {
    const S t = a.phi2;
    return S(0.5) - t / 24.0 + t * t / 720.0 - t * t * t / 40320.0;
  }
  const S s = sin(a.phi / 2.0);
  return S(2.0) * s * s / a.phi2;
}

// (phi - sin(phi))/phi^3
template <Scalar S>
S coef_c(const Angle<S>& a) {
  using std::sin;
  if (a.series) {
    const S t = a.phi2;
    return S(1.0 / 6.0) - t / 120.0 + t * t / 5040.0 - t * t * t / 362880.0;
  }
  return (a.phi - sin(a.phi)) / (a.phi2 * a.phi);
}

// (1 - (phi/2) cot(phi/2)) / phi^2, the quadratic coefficient of J_l^{-1}
template <Scalar S>
S coef_d(const Angle<S>& a) {
  using std::sin;
  if (a.series) {
    const S t = a.phi2;
    return S(1.0 / 12.0) + t / 720.0 + t * t / 30240.0 + t * t * t / 1209600.0;
  }
  const S half = sin(a.phi / 2.0);
  return (S(1.0) - a.phi * sin(a.phi) / (S(4.0) * half * half)) / a.phi2;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SO(3) building blocks
// ---------------------------------------------------------------------------

template <typename Derived>
Mat3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  Mat3<S> m;
  // clang-format off
  m << S(0), -v(2), v(1),
       v(2), S(0), -v(0),
       -v(1), v(0), S(0);
  // clang-format on
  return m;
}

template <typename Derived>
Vec3<typename Derived::Scalar> unskew(const Eigen::MatrixBase<Derived>& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

/// Rodrigues formula for exp(phi^x).
template <Scalar S>
Mat3<S> so3_exp(const Vec3<S>& phi) {
  const auto a = detail::angle_from_phi2(analytic_squared_norm(phi));
  const Mat3<S> k = skew(phi);
  return Mat3<S>::Identity() + detail::coef_a(a) * k + detail::coef_b(a) * (k * k);
}

/// Left Jacobian of SO(3).
template <Scalar S>
Mat3<S> so3_left_jacobian(const Vec3<S>& phi) {
  const auto a = detail::angle_from_phi2(analytic_squared_norm(phi));
  const Mat3<S> k = skew(phi);
  return Mat3<S>::Identity() + detail::coef_b(a) * k + detail::coef_c(a) * (k * k);
}

template <Scalar S>
Mat3<S> so3_left_jacobian_inverse(const Vec3<S>& phi) {
  const auto a = detail::angle_from_phi2(analytic_squared_norm(phi));
  const Mat3<S> k = skew(phi);
  return Mat3<S>::Identity() - S(0.5) * k + detail::coef_d(a) * (k * k);
}

/// Rotation vector of C via acos((tr C - 1)/2). Throws DomainError when the
/// angle is within kLogAngleMargin of pi.
template <Scalar S>
Vec3<S> so3_log(const Mat3<S>& c) {
  using std::acos;
  const S x = (c.trace() - S(1.0)) / 2.0;
  const S u = S(1.0) - x;
  detail::Angle<S> a;
  // 1 - cos(kSmallAngle) ~ kSmallAngle^2 / 2
  if (real_part(u) < 0.5 * kSmallAngle * kSmallAngle) {
    // acos(1 - u)^2 = 2u + u^2/3 + 4u^3/45 + ...
    const S phi2 = S(2.0) * u + u * u / 3.0 + S(4.0 / 45.0) * u * u * u;
    a = {S(0.0), phi2, true};
  } else {
    if (real_part(x) <= -1.0) {
      throw DomainError("logarithm undefined: rotation angle is pi");
    }
    const S phi = acos(x);
    if (real_part(phi) >= std::numbers::pi - kLogAngleMargin) {
      throw DomainError("logarithm ill-conditioned: rotation angle within 1e-9 of pi");
    }
    a = {phi, phi * phi, false};
  }
  const Vec3<S> skew_part = unskew(Mat3<S>(c - c.transpose()));
  return skew_part / (S(2.0) * detail::coef_a(a));
}

// ---------------------------------------------------------------------------
// SE(2) building blocks
// ---------------------------------------------------------------------------

template <Scalar S>
Mat2<S> so2_exp(const S& phi) {
  using std::cos;
  using std::sin;
  Mat2<S> c;
  c << cos(phi), -sin(phi), sin(phi), cos(phi);
  return c;
}

/// (1/phi) [[sin, -(1 - cos)], [1 - cos, sin]]
template <Scalar S>
Mat2<S> so2_left_jacobian(const S& phi) {
  const auto a = detail::angle_from_phi(phi);
  const S s = detail::coef_a(a);
  const S c = phi * detail::coef_b(a);
  Mat2<S> j;
  j << s, -c, c, s;
  return j;
}

template <Scalar S>
Mat2<S> so2_left_jacobian_inverse(const S& phi) {
  const auto a = detail::angle_from_phi(phi);
  const S s = detail::coef_a(a);
  const S c = phi * detail::coef_b(a);
  Mat2<S> j;
  j << s, c, -c, s;
  return j / (s * s + c * c);
}

// ---------------------------------------------------------------------------
// wedge / vee
// ---------------------------------------------------------------------------

template <Scalar S>
MatX<S> wedge(const Tangent<S>& xi) {
  const GroupKind& kind = xi.kind;
  const int m = kind.dim();
  MatX<S> out = MatX<S>::Zero(m, m);
  const auto& c = xi.coords;
  switch (kind.tag()) {
    case GroupKind::Tag::SO3:
      out = skew(c.template head<3>());
      break;
    case GroupKind::Tag::SE2:
      out(0, 1) = -c(0);
      out(1, 0) = c(0);
      out(0, 2) = c(1);
      out(1, 2) = c(2);
      break;
    case GroupKind::Tag::SE3:
      out.template topLeftCorner<3, 3>() = skew(c.template head<3>());
      out.template block<3, 1>(0, 3) = c.template segment<3>(3);
      break;
    case GroupKind::Tag::SE23:
      out.template topLeftCorner<3, 3>() = skew(c.template head<3>());
      out.template block<3, 1>(0, 3) = c.template segment<3>(3);
      out.template block<3, 1>(0, 4) = c.template segment<3>(6);
      break;
    case GroupKind::Tag::Rn:
      out.col(m - 1).head(kind.dof()) = c;
      break;
    case GroupKind::Tag::Composite:
      for (int k = 0; k < kind.block_count(); ++k) {
        const auto& bk = kind.block(k);
        const int o = kind.dim_offset(k);
        out.block(o, o, bk.dim(), bk.dim()) =
            wedge(Tangent<S>(bk, xi.block(k)));
      }
      break;
  }
  return out;
}

namespace detail {

template <typename Derived>
bool off_pattern_small(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return true;
  if (max_abs_real(m) > kPatternTol) return false;
  return imag_of(m).cwiseAbs().maxCoeff() <= kPatternTol;
}

template <typename Derived>
bool skew_pattern_ok(const Eigen::MatrixBase<Derived>& m) {
  return off_pattern_small(m.diagonal()) &&
         off_pattern_small((m + m.transpose()).eval());
}

}  // namespace detail

template <Scalar S>
Tangent<S> vee(const MatX<S>& xi, const GroupKind& kind) {
  const int m = kind.dim();
  if (xi.rows() != m || xi.cols() != m) {
    throw DimensionError("vee: expected " + std::to_string(m) + "x" +
                         std::to_string(m) + " matrix for kind " + kind.name());
  }
  VecX<S> c(kind.dof());
  bool ok = true;
  switch (kind.tag()) {
    case GroupKind::Tag::SO3:
      ok = detail::skew_pattern_ok(xi);
      c = unskew(xi);
      break;
    case GroupKind::Tag::SE2:
      ok = detail::skew_pattern_ok(xi.template topLeftCorner<2, 2>()) &&
           detail::off_pattern_small(xi.row(2));
      c << xi(1, 0), xi(0, 2), xi(1, 2);
      break;
    case GroupKind::Tag::SE3:
      ok = detail::skew_pattern_ok(xi.template topLeftCorner<3, 3>()) &&
           detail::off_pattern_small(xi.row(3));
      c << unskew(xi.template topLeftCorner<3, 3>()), xi.template block<3, 1>(0, 3);
      break;
    case GroupKind::Tag::SE23:
      ok = detail::skew_pattern_ok(xi.template topLeftCorner<3, 3>()) &&
           detail::off_pattern_small(xi.bottomRows(2));
      c << unskew(xi.template topLeftCorner<3, 3>()), xi.template block<3, 1>(0, 3),
          xi.template block<3, 1>(0, 4);
      break;
    case GroupKind::Tag::Rn:
      ok = detail::off_pattern_small(xi.leftCols(m - 1)) &&
           detail::off_pattern_small(xi.row(m - 1));
      c = xi.col(m - 1).head(kind.dof());
      break;
    case GroupKind::Tag::Composite: {
      MatX<S> rest = xi;
      for (int k = 0; k < kind.block_count(); ++k) {
        const auto& bk = kind.block(k);
        const int o = kind.dim_offset(k);
        c.segment(kind.dof_offset(k), bk.dof()) =
            vee<S>(xi.block(o, o, bk.dim(), bk.dim()), bk).coords;
        rest.block(o, o, bk.dim(), bk.dim()).setZero();
      }
      ok = detail::off_pattern_small(rest);
      break;
    }
  }
  if (!ok) {
    throw ValidationError("vee: matrix is not in the Lie algebra of " + kind.name());
  }
  return Tangent<S>(kind, std::move(c));
}

// ---------------------------------------------------------------------------
// exp / log
// ---------------------------------------------------------------------------

template <Scalar S>
Element<S> exp_map(const Tangent<S>& xi) {
  const GroupKind& kind = xi.kind;
  const auto& c = xi.coords;
  MatX<S> out = MatX<S>::Identity(kind.dim(), kind.dim());
  switch (kind.tag()) {
    case GroupKind::Tag::SO3:
      out = so3_exp<S>(c.template head<3>());
      break;
    case GroupKind::Tag::SE2:
      out.template topLeftCorner<2, 2>() = so2_exp(c(0));
      out.template block<2, 1>(0, 2) = so2_left_jacobian(c(0)) * c.template segment<2>(1);
      break;
    case GroupKind::Tag::SE3: {
      const Vec3<S> phi = c.template head<3>();
      out.template topLeftCorner<3, 3>() = so3_exp(phi);
      out.template block<3, 1>(0, 3) = so3_left_jacobian(phi) * c.template segment<3>(3);
      break;
    }
    case GroupKind::Tag::SE23: {
      const Vec3<S> phi = c.template head<3>();
      const Mat3<S> j = so3_left_jacobian(phi);
      out.template topLeftCorner<3, 3>() = so3_exp(phi);
      out.template block<3, 1>(0, 3) = j * c.template segment<3>(3);
      out.template block<3, 1>(0, 4) = j * c.template segment<3>(6);
      break;
    }
    case GroupKind::Tag::Rn:
      out.col(kind.dim() - 1).head(kind.dof()) = c;
      break;
    case GroupKind::Tag::Composite: {
      std::vector<Element<S>> blocks;
      blocks.reserve(kind.children().size());
      for (int k = 0; k < kind.block_count(); ++k) {
        blocks.push_back(exp_map(Tangent<S>(kind.block(k), xi.block(k))));
      }
      return Element<S>::from_blocks(kind, std::move(blocks));
    }
  }
  return Element<S>(kind, std::move(out));
}

template <Scalar S>
Tangent<S> log_map(const Element<S>& x) {
  const GroupKind& kind = x.kind();
  VecX<S> c(kind.dof());
  if (kind.is_composite()) {
    for (int k = 0; k < kind.block_count(); ++k) {
      c.segment(kind.dof_offset(k), kind.block(k).dof()) = log_map(x.block(k)).coords;
    }
    return Tangent<S>(kind, std::move(c));
  }
  const MatX<S>& m = x.mat();
  switch (kind.tag()) {
    case GroupKind::Tag::SO3:
      c = so3_log<S>(m.template topLeftCorner<3, 3>());
      break;
    case GroupKind::Tag::SE2: {
      const S phi = atan2_cs(m(1, 0), m(0, 0));
      if (std::abs(real_part(phi)) >= std::numbers::pi - kLogAngleMargin) {
        throw DomainError("logarithm ill-conditioned: heading within 1e-9 of pi");
      }
      c(0) = phi;
      c.template segment<2>(1) = so2_left_jacobian_inverse(phi) * m.template block<2, 1>(0, 2);
      break;
    }
    case GroupKind::Tag::SE3: {
      const Vec3<S> phi = so3_log<S>(m.template topLeftCorner<3, 3>());
      c << phi, so3_left_jacobian_inverse(phi) * m.template block<3, 1>(0, 3);
      break;
    }
    case GroupKind::Tag::SE23: {
      const Vec3<S> phi = so3_log<S>(m.template topLeftCorner<3, 3>());
      const Mat3<S> jinv = so3_left_jacobian_inverse(phi);
      c << phi, jinv * m.template block<3, 1>(0, 3), jinv * m.template block<3, 1>(0, 4);
      break;
    }
    case GroupKind::Tag::Rn:
      c = m.col(kind.dim() - 1).head(kind.dof());
      break;
    case GroupKind::Tag::Composite:
      break;
  }
  return Tangent<S>(kind, std::move(c));
}

// ---------------------------------------------------------------------------
// inverse / adjoint / odot
// ---------------------------------------------------------------------------

template <Scalar S>
Element<S> inverse(const Element<S>& x) {
  const GroupKind& kind = x.kind();
  if (kind.is_composite()) {
    std::vector<Element<S>> blocks;
    blocks.reserve(kind.children().size());
    for (const auto& b : x.blocks()) blocks.push_back(inverse(b));
    return Element<S>::from_blocks(kind, std::move(blocks));
  }
  const MatX<S>& m = x.mat();
  MatX<S> out = MatX<S>::Identity(kind.dim(), kind.dim());
  switch (kind.tag()) {
    case GroupKind::Tag::SO3:
      out = m.transpose();
      break;
    case GroupKind::Tag::SE2: {
      const Mat2<S> ct = m.template topLeftCorner<2, 2>().transpose();
      out.template topLeftCorner<2, 2>() = ct;
      out.template block<2, 1>(0, 2) = -ct * m.template block<2, 1>(0, 2);
      break;
    }
    case GroupKind::Tag::SE3: {
      const Mat3<S> ct = m.template topLeftCorner<3, 3>().transpose();
      out.template topLeftCorner<3, 3>() = ct;
      out.template block<3, 1>(0, 3) = -ct * m.template block<3, 1>(0, 3);
      break;
    }
    case GroupKind::Tag::SE23: {
      const Mat3<S> ct = m.template topLeftCorner<3, 3>().transpose();
      out.template topLeftCorner<3, 3>() = ct;
      out.template block<3, 1>(0, 3) = -ct * m.template block<3, 1>(0, 3);
      out.template block<3, 1>(0, 4) = -ct * m.template block<3, 1>(0, 4);
      break;
    }
    case GroupKind::Tag::Rn:
      out.col(kind.dim() - 1).head(kind.dof()) = -m.col(kind.dim() - 1).head(kind.dof());
      break;
    case GroupKind::Tag::Composite:
      break;
  }
  return Element<S>(kind, std::move(out));
}

/// Ad(X), the n x n matrix with (Ad(X) z)^ = X z^ X^{-1}.
template <Scalar S>
MatX<S> adjoint(const Element<S>& x) {
  const GroupKind& kind = x.kind();
  const int n = kind.dof();
  MatX<S> ad = MatX<S>::Zero(n, n);
  if (kind.is_composite()) {
    for (int k = 0; k < kind.block_count(); ++k) {
      const int o = kind.dof_offset(k);
      const int nk = kind.block(k).dof();
      ad.block(o, o, nk, nk) = adjoint(x.block(k));
    }
    return ad;
  }
  const MatX<S>& m = x.mat();
  switch (kind.tag()) {
    case GroupKind::Tag::SO3:
      ad = m;
      break;
    case GroupKind::Tag::SE2:
      ad(0, 0) = S(1.0);
      ad(1, 0) = m(1, 2);
      ad(2, 0) = -m(0, 2);
      ad.template bottomRightCorner<2, 2>() = m.template topLeftCorner<2, 2>();
      break;
    case GroupKind::Tag::SE3: {
      const Mat3<S> c = m.template topLeftCorner<3, 3>();
      ad.template topLeftCorner<3, 3>() = c;
      ad.template bottomRightCorner<3, 3>() = c;
      ad.template block<3, 3>(3, 0) = skew(m.template block<3, 1>(0, 3)) * c;
      break;
    }
    case GroupKind::Tag::SE23: {
      const Mat3<S> c = m.template topLeftCorner<3, 3>();
      ad.template block<3, 3>(0, 0) = c;
      ad.template block<3, 3>(3, 3) = c;
      ad.template block<3, 3>(6, 6) = c;
      ad.template block<3, 3>(3, 0) = skew(m.template block<3, 1>(0, 3)) * c;
      ad.template block<3, 3>(6, 0) = skew(m.template block<3, 1>(0, 4)) * c;
      break;
    }
    case GroupKind::Tag::Rn:
      ad.setIdentity();
      break;
    case GroupKind::Tag::Composite:
      break;
  }
  return ad;
}

/// p^odot with x^ p = p^odot x, for SE3 (p in R^4) and SE23 (p in R^5).
template <typename Derived>
MatX<typename Derived::Scalar> odot(const Eigen::MatrixBase<Derived>& p,
                                    const GroupKind& kind) {
  using S = typename Derived::Scalar;
  if (kind.tag() != GroupKind::Tag::SE3 && kind.tag() != GroupKind::Tag::SE23) {
    throw ValidationError("odot is only defined for SE3 and SE23, not " + kind.name());
  }
  if (p.size() != kind.dim()) {
    throw DimensionError("odot: point must have length " + std::to_string(kind.dim()));
  }
  MatX<S> out = MatX<S>::Zero(kind.dim(), kind.dof());
  out.template topLeftCorner<3, 3>() = -skew(p.template head<3>());
  out.template block<3, 3>(0, 3) = p(3) * Mat3<S>::Identity();
  if (kind.tag() == GroupKind::Tag::SE23) {
    out.template block<3, 3>(0, 6) = p(4) * Mat3<S>::Identity();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Composite packing
// ---------------------------------------------------------------------------

template <Scalar S>
Element<S> composite_pack(std::vector<Element<S>> elements) {
  if (elements.empty()) throw ValidationError("composite_pack: empty list");
  std::vector<GroupKind> kinds;
  std::vector<Element<S>> flat;
  for (auto& e : elements) {
    if (e.is_composite()) {
      for (const auto& b : e.blocks()) {
        kinds.push_back(b.kind());
        flat.push_back(b);
      }
    } else {
      kinds.push_back(e.kind());
      flat.push_back(std::move(e));
    }
  }
  return Element<S>::from_blocks(GroupKind::composite(kinds), std::move(flat));
}

template <Scalar S>
std::vector<Element<S>> composite_unpack(const Element<S>& x) {
  if (!x.is_composite()) return {x};
  return {x.blocks().begin(), x.blocks().end()};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Checks the bottom rows and rotation block of a real element.
bool is_valid(const Element<double>& x, double tol = 1e-9);

/// X * exp(xi^) or exp(xi^) * X.
enum class Side { Right, Left };

template <Scalar S>
Element<S> perturb(const Element<S>& x, const Tangent<S>& xi, Side side) {
  return side == Side::Right ? x * exp_map(xi) : exp_map(xi) * x;
}

std::string to_string(Side side);

}  // namespace cslie
