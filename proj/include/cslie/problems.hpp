// Small built-in problems with known analytic Jacobians.

#pragma once

#include <memory>

#include "cslie/cstep.hpp"
#include "cslie/random.hpp"
#include "cslie/solver.hpp"

namespace cslie::problems {

/// f(T) = v^T T y on SE(3).
struct BilinearPose {
  Eigen::Vector4d v;
  Eigen::Vector4d y;

  template <Scalar S>
  VecX<S> operator()(const Element<S>& t) const {
    VecX<S> out(1);
    out(0) = (v.cast<S>().transpose() * t.mat() * y.cast<S>())(0, 0);
    return out;
  }

  /// Left Jacobian v^T (T y)^odot; at T = I it is also the right Jacobian.
  MatX<double> left_jacobian(const Element<double>& t) const {
    const Eigen::Vector4d ty = t.mat() * y;
    return v.transpose() * odot(ty, GroupKind::se3());
  }

  std::shared_ptr<GroupFunction> function() const {
    return make_group_function(1, [self = *this](const auto& t) { return self(t); });
  }

  static BilinearPose random(Rng& rng) {
    BilinearPose p;
    for (int i = 0; i < 4; ++i) {
      p.v(i) = rng.gaussian();
      p.y(i) = rng.gaussian();
    }
    return p;
  }
};

/// e(T) = ln(T^-1 T_ref)^vee; the pose-to-reference error.
struct PoseError {
  Element<double> reference;

  template <Scalar S>
  VecX<S> operator()(const Element<S>& t) const {
    return log_map(Element<S>(inverse(t) * reference.cast<S>())).coords;
  }

  /// First-order left Jacobian -Ad(T^-1).
  MatX<double> left_jacobian(const Element<double>& t) const { return -adjoint(inverse(t)); }

  std::shared_ptr<GroupFunction> function() const {
    return make_group_function(reference.kind().dof(),
                               [self = *this](const auto& t) { return self(t); });
  }
};

/// Pose-to-reference least squares on SE(3) with a random SPD weight, left
/// perturbations and analytic Jacobian -Ad(T^-1).
struct PoseFit {
  LeastSquaresProblem problem;
  PoseError error;
  DenseJacobianFn analytic;
};

inline PoseFit make_pose_fit(Rng& rng) {
  const auto kind = GroupKind::se3();
  PoseError e{random_element(kind, rng)};
  const Element<double> start = random_element(kind, rng);
  MatX<double> a(6, 6);
  for (int i = 0; i < 36; ++i) a(i) = rng.gaussian();
  const MatX<double> w = a * a.transpose() + MatX<double>::Identity(6, 6);
  PoseFit fit{LeastSquaresProblem{e.function(), BlockDiagonal({w}), start, Side::Left}, e, {}};
  fit.analytic = [e](const Element<double>& t) { return e.left_jacobian(t); };
  return fit;
}

}  // namespace cslie::problems
