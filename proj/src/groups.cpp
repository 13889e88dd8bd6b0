#include "cslie/groups.hpp"

#include <Eigen/LU>

namespace cslie {

namespace {

bool rotation_ok(const MatX<double>& c, double tol) {
  const MatX<double> e = c.transpose() * c - MatX<double>::Identity(c.rows(), c.cols());
  if (e.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(c.determinant() - 1.0) <= tol;
}

}  // namespace

bool is_valid(const Element<double>& x, double tol) {
  const GroupKind& kind = x.kind();
  if (kind.is_composite()) {
    for (const auto& b : x.blocks()) {
      if (!is_valid(b, tol)) return false;
    }
    return true;
  }
  const MatX<double>& m = x.mat();
  if (!all_finite(m)) return false;
  const int d = kind.dim();
  switch (kind.tag()) {
    case GroupKind::Tag::SO3:
      return rotation_ok(m, tol);
    case GroupKind::Tag::SE2:
    case GroupKind::Tag::SE3: {
      const int r = d - 1;
      MatX<double> bottom = MatX<double>::Zero(1, d);
      bottom(0, r) = 1.0;
      return (m.row(r) - bottom).cwiseAbs().maxCoeff() <= tol &&
             rotation_ok(m.topLeftCorner(r, r), tol);
    }
    case GroupKind::Tag::SE23: {
      MatX<double> bottom = MatX<double>::Zero(2, 5);
      bottom(0, 3) = 1.0;
      bottom(1, 4) = 1.0;
      return (m.bottomRows(2) - bottom).cwiseAbs().maxCoeff() <= tol &&
             rotation_ok(m.topLeftCorner(3, 3), tol);
    }
    case GroupKind::Tag::Rn: {
      MatX<double> left = m.leftCols(d - 1);
      left.topRows(d - 1) -= MatX<double>::Identity(d - 1, d - 1);
      return left.cwiseAbs().maxCoeff() <= tol && std::abs(m(d - 1, d - 1) - 1.0) <= tol;
    }
    case GroupKind::Tag::Composite:
      break;
  }
  return false;
}

std::string to_string(Side side) { return side == Side::Right ? "right" : "left"; }

}  // namespace cslie
