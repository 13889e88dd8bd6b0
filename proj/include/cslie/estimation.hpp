// Batch MAP estimation problems: error stacks, weights, process and
// measurement models, dead reckoning.

#pragma once

#include <map>
#include <memory>
#include <vector>

#include "cslie/solver.hpp"

namespace cslie::estimation {

inline const Vec3<double> kDefaultGravity{0.0, 0.0, -9.81};

/// Body-frame accelerometer (m/s^2) and gyroscope (rad/s) readings.
struct ImuInput {
  Vec3<double> acc = Vec3<double>::Zero();
  Vec3<double> gyro = Vec3<double>::Zero();
  /// [acc; gyro]
  VecX<double> to_vector() const;
};

/// Forward speed (m/s) and yaw rate (rad/s).
struct OdometryInput {
  double vel = 0.0;
  double ang = 0.0;
  /// [vel; ang]
  VecX<double> to_vector() const;
};

enum class ProcessKind { ImuSE23, UnicycleSE2 };
enum class MeasurementKind { Position3D, RangeBearing };

std::string to_string(ProcessKind k);

// ---------------------------------------------------------------------------
// Process models
// ---------------------------------------------------------------------------

/// C_k = C exp(T(w + n_w)), v_k = v + T g + T C (a + n_a), r_k = r + T v.
/// u = [a; w] (6), noise has the same layout.
template <Scalar S>
Element<S> imu_propagate(const Element<S>& x, const VecX<double>& u, const VecX<double>& noise,
                         double dt, const Vec3<double>& gravity = kDefaultGravity) {
  if (x.kind().tag() != GroupKind::Tag::SE23) throw DimensionError("imu_propagate needs SE23");
  if (u.size() != 6 || (noise.size() != 0 && noise.size() != 6)) {
    throw DimensionError("IMU input and noise have 6 entries");
  }
  if (!(dt > 0.0)) throw ValidationError("sampling period must be positive");
  const VecX<double> un = noise.size() ? VecX<double>(u + noise) : u;
  const MatX<S>& m = x.mat();
  const Mat3<S> c = m.template topLeftCorner<3, 3>();
  const Vec3<S> v = m.template block<3, 1>(0, 3);
  const Vec3<S> r = m.template block<3, 1>(0, 4);
  const Vec3<S> a = un.head<3>().cast<S>();
  const Vec3<S> w = un.tail<3>().cast<S>();
  MatX<S> out = MatX<S>::Identity(5, 5);
  out.template topLeftCorner<3, 3>() = c * so3_exp(Vec3<S>(S(dt) * w));
  out.template block<3, 1>(0, 3) = v + S(dt) * gravity.cast<S>() + S(dt) * (c * a);
  out.template block<3, 1>(0, 4) = r + S(dt) * v;
  return Element<S>(x.kind(), std::move(out));
}

/// X_k = X_{k-1} [[exp(T w), T v e1], [0, 1]] with u = [v; w].
template <Scalar S>
Element<S> unicycle_propagate(const Element<S>& x, const VecX<double>& u,
                              const VecX<double>& noise, double dt) {
  if (x.kind().tag() != GroupKind::Tag::SE2) throw DimensionError("unicycle_propagate needs SE2");
  if (u.size() != 2 || (noise.size() != 0 && noise.size() != 2)) {
    throw DimensionError("odometry input and noise have 2 entries");
  }
  if (!(dt > 0.0)) throw ValidationError("sampling period must be positive");
  const VecX<double> un = noise.size() ? VecX<double>(u + noise) : u;
  MatX<double> psi = MatX<double>::Identity(3, 3);
  psi.topLeftCorner<2, 2>() = so2_exp(dt * un(1));
  psi(0, 2) = dt * un(0);
  return Element<S>(x.kind(), x.mat() * psi.cast<S>());
}

struct ProcessModel {
  ProcessKind kind = ProcessKind::ImuSE23;
  Vec3<double> gravity = kDefaultGravity;

  GroupKind state_kind() const;
  int input_dim() const;

  template <Scalar S>
  Element<S> propagate(const Element<S>& x, const VecX<double>& u, double dt,
                       const VecX<double>& noise = {}) const {
    if (kind == ProcessKind::ImuSE23) return imu_propagate(x, u, noise, dt, gravity);
    return unicycle_propagate(x, u, noise, dt);
  }
};

// ---------------------------------------------------------------------------
// Error terms
// ---------------------------------------------------------------------------

/// ln(X0^-1 Xcheck)^vee
template <Scalar S>
VecX<S> error_prior(const Element<S>& x0, const Element<double>& check) {
  return log_map(Element<S>(inverse(x0) * check.cast<S>())).coords;
}

/// ln(X_k^-1 F(X_{k-1}, u, 0))^vee
template <Scalar S>
VecX<S> error_process(const Element<S>& xk, const Element<S>& xkm1, const VecX<double>& u,
                      const ProcessModel& model, double dt) {
  return log_map(Element<S>(inverse(xk) * model.propagate(xkm1, u, dt))).coords;
}

/// y - [1 0 0] X p with p = [0 0 0 0 1]^T, i.e. y - r.
template <Scalar S>
VecX<S> error_position(const Element<S>& x, const Vec3<double>& y) {
  if (x.kind().tag() != GroupKind::Tag::SE23) throw DimensionError("position error needs SE23");
  return VecX<S>(y.cast<S>() - x.mat().template block<3, 1>(0, 4));
}

/// Predicted [range, bearing] of a landmark from a sensor offset d along the
/// body x axis. Bearing is relative to the heading taken from the group log.
template <Scalar S>
Vec2<S> predict_range_bearing(const Element<S>& x, const Vec2<double>& landmark, double d) {
  if (x.kind().tag() != GroupKind::Tag::SE2) throw DimensionError("range-bearing needs SE2");
  Vec3<S> p(S(d), S(0.0), S(1.0));
  const Vec3<S> tp = x.mat() * p;
  const Vec2<S> rel = landmark.cast<S>() - tp.template head<2>();
  const S heading = log_map(x).coords(0);
  Vec2<S> out;
  out(0) = analytic_norm(rel);
  out(1) = atan2_cs(rel(1), rel(0)) - heading;
  return out;
}

/// y - g(X); the bearing component is wrapped to (-pi, pi] on its real part.
template <Scalar S>
VecX<S> error_range_bearing(const Element<S>& x, const Vec2<double>& y,
                            const Vec2<double>& landmark, double d) {
  const Vec2<S> g = predict_range_bearing(x, landmark, d);
  VecX<S> e(2);
  e(0) = S(y(0)) - g(0);
  e(1) = wrap_angle(S(y(1)) - g(1));
  return e;
}

// ---------------------------------------------------------------------------
// Batch problems
// ---------------------------------------------------------------------------

struct Measurement {
  int state = 0;
  MeasurementKind kind = MeasurementKind::Position3D;
  VecX<double> y;
  MatX<double> covariance;
  /// Landmark id for range-bearing measurements.
  int landmark = -1;
};

struct BatchProblem {
  ProcessModel process;
  /// t_0 ... t_K, strictly increasing.
  std::vector<double> times;
  Element<double> prior = Element<double>::identity(GroupKind::se23());
  MatX<double> prior_covariance;
  /// inputs[k-1] drives the step from t_{k-1} to t_k; size K.
  std::vector<VecX<double>> inputs;
  /// Q_1 ... Q_K.
  std::vector<MatX<double>> process_covariances;
  std::vector<Measurement> measurements;
  std::map<int, Vec2<double>> landmarks;
  /// Range sensor offset along the body x axis (m).
  double sensor_offset = 0.0;

  int state_count() const { return static_cast<int>(times.size()); }
  GroupKind composite_kind() const;
  /// Throws ValidationError on inconsistent sizes, times or ids.
  void validate() const;
};

/// Measurements in stack order: by state index, then by input order.
std::vector<const Measurement*> ordered_measurements(const BatchProblem& p);

/// Prior, process blocks 1..K, then measurement blocks in time order.
std::shared_ptr<StackedFunction> build_error_stack(const BatchProblem& p);

/// diag(P0^-1, Q_1^-1 ... Q_K^-1, R^-1 ...) in stack order.
BlockDiagonal build_weight(const BatchProblem& p);

/// Right Jacobian of the SE23 IMU/position stack from the first-order
/// closed forms: -1 and Ad(T_k^-1 F^op_{k-1}) B on process rows, and the
/// derivative of y - r on measurement rows.
BlockJacobian analytic_jacobian_euroc(const BatchProblem& p, const Element<double>& states);

/// Ad(T_k^-1 F^op_{k-1}) B.
MatX<double> euroc_process_jacobian(const Element<double>& xk, const Element<double>& xkm1,
                                    double dt, const Vec3<double>& gravity);

/// d(D T p)/d(eps) for p = [0 0 0 0 1]^T, i.e. [0 | 0 | C].
MatX<double> euroc_position_jacobian(const Element<double>& xk);

/// X_0 = start, X_k = F(X_{k-1}, u_{k-1}, 0).
std::vector<Element<double>> dead_reckon(const Element<double>& start,
                                         const std::vector<VecX<double>>& inputs,
                                         const ProcessModel& model,
                                         const std::vector<double>& times);

/// Least-squares problem with right perturbations, initialized at `initial`.
LeastSquaresProblem make_least_squares(const BatchProblem& p,
                                       const std::vector<Element<double>>& initial);

/// Index of the state time nearest to t, or -1 if farther than half the
/// local sampling period.
int nearest_state(const std::vector<double>& times, double t);

}  // namespace cslie::estimation
