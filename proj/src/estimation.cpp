#include "cslie/estimation.hpp"

#include <Eigen/Cholesky>

#include <algorithm>

namespace cslie::estimation {

VecX<double> ImuInput::to_vector() const {
  VecX<double> u(6);
  u << acc, gyro;
  return u;
}

VecX<double> OdometryInput::to_vector() const {
  VecX<double> u(2);
  u << vel, ang;
  return u;
}

std::string to_string(ProcessKind k) {
  return k == ProcessKind::ImuSE23 ? "imu-se23" : "unicycle-se2";
}

GroupKind ProcessModel::state_kind() const {
  return kind == ProcessKind::ImuSE23 ? GroupKind::se23() : GroupKind::se2();
}

int ProcessModel::input_dim() const { return kind == ProcessKind::ImuSE23 ? 6 : 2; }

GroupKind BatchProblem::composite_kind() const {
  return GroupKind::composite(process.state_kind(), state_count());
}

namespace {

void require_square(const MatX<double>& m, int n, const std::string& what) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionError(what + " must be " + std::to_string(n) + "x" + std::to_string(n));
  }
}

}  // namespace

void BatchProblem::validate() const {
  const GroupKind sk = process.state_kind();
  const int n = sk.dof();
  if (times.empty()) throw ValidationError("batch problem without states");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw ValidationError("state times must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
  if (!(prior.kind() == sk)) throw ValidationError("prior has kind " + prior.kind().name());
  require_square(prior_covariance, n, "prior covariance");
  const std::size_t k = times.size() - 1;
  if (inputs.size() != k) {
    throw DimensionError("expected " + std::to_string(k) + " inputs, got " + std::to_string(inputs.size()));
  }
  if (process_covariances.size() != k) {
    throw DimensionError("expected " + std::to_string(k) + " process covariances");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (inputs[i].size() != process.input_dim()) {
      throw DimensionError("input " + std::to_string(i) + " has the wrong size");
    }
    if (!all_finite(inputs[i])) throw ValidationError("input " + std::to_string(i) + " is not finite");
    require_square(process_covariances[i], n, "process covariance " + std::to_string(i + 1));
  }
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const auto& m = measurements[i];
    const std::string tag = "measurement " + std::to_string(i);
    if (m.state < 0 || m.state >= state_count()) throw ValidationError(tag + " refers to a missing state");
    if (!all_finite(m.y)) throw ValidationError(tag + " is not finite");
    if (m.kind == MeasurementKind::Position3D) {
      if (process.kind != ProcessKind::ImuSE23) throw ValidationError(tag + ": position needs SE23 states");
      if (m.y.size() != 3) throw DimensionError(tag + " must have 3 entries");
      require_square(m.covariance, 3, tag + " covariance");
    } else {
      if (process.kind != ProcessKind::UnicycleSE2) throw ValidationError(tag + ": range-bearing needs SE2 states");
      if (m.y.size() != 2) throw DimensionError(tag + " must have 2 entries");
      require_square(m.covariance, 2, tag + " covariance");
      if (!landmarks.contains(m.landmark)) {
        throw ValidationError(tag + " refers to unknown landmark id " + std::to_string(m.landmark));
      }
    }
  }
}

std::vector<const Measurement*> ordered_measurements(const BatchProblem& p) {
  std::vector<const Measurement*> out;
  out.reserve(p.measurements.size());
  for (const auto& m : p.measurements) out.push_back(&m);
  std::stable_sort(out.begin(), out.end(),
                   [](const Measurement* a, const Measurement* b) { return a->state < b->state; });
  return out;
}

std::shared_ptr<StackedFunction> build_error_stack(const BatchProblem& p) {
  p.validate();
  const int n = p.process.state_kind().dof();
  std::vector<ErrorTerm> terms;
  terms.reserve(p.times.size() + p.measurements.size());

  const Element<double> check = p.prior;
  terms.push_back(make_term({0}, n, [check]<Scalar S>(std::span<const Element<S>> x) {
    return error_prior(x[0], check);
  }));

  for (int k = 1; k < p.state_count(); ++k) {
    const VecX<double> u = p.inputs[k - 1];
    const double dt = p.times[k] - p.times[k - 1];
    const ProcessModel model = p.process;
    terms.push_back(make_term({k - 1, k}, n, [u, dt, model]<Scalar S>(std::span<const Element<S>> x) {
      return error_process(x[1], x[0], u, model, dt);
    }));
  }

  for (const Measurement* m : ordered_measurements(p)) {
    if (m->kind == MeasurementKind::Position3D) {
      const Vec3<double> y = m->y;
      terms.push_back(make_term({m->state}, 3, [y]<Scalar S>(std::span<const Element<S>> x) {
        return error_position(x[0], y);
      }));
    } else {
      const Vec2<double> y = m->y;
      const Vec2<double> lm = p.landmarks.at(m->landmark);
      const double d = p.sensor_offset;
      terms.push_back(make_term({m->state}, 2, [y, lm, d]<Scalar S>(std::span<const Element<S>> x) {
        return error_range_bearing(x[0], y, lm, d);
      }));
    }
  }
  return std::make_shared<StackedFunction>(p.composite_kind(), std::move(terms));
}

namespace {

MatX<double> spd_inverse(const MatX<double>& cov, const std::string& what) {
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (!all_finite(cov) || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ValidationError(what + " is not symmetric and finite");
  }
  Eigen::LLT<MatX<double>> llt(cov);
  if (llt.info() != Eigen::Success) throw ValidationError(what + " is not positive definite");
  MatX<double> w = llt.solve(MatX<double>::Identity(cov.rows(), cov.cols()));
  return 0.5 * (w + w.transpose());
}

}  // namespace

BlockDiagonal build_weight(const BatchProblem& p) {
  p.validate();
  BlockDiagonal w;
  int block = 0;
  w.push_back(spd_inverse(p.prior_covariance, "covariance block 0 (prior)"));
  for (const auto& q : p.process_covariances) {
    ++block;
    w.push_back(spd_inverse(q, "covariance block " + std::to_string(block) + " (process)"));
  }
  for (const Measurement* m : ordered_measurements(p)) {
    ++block;
    w.push_back(spd_inverse(m->covariance, "covariance block " + std::to_string(block) + " (measurement)"));
  }
  return w;
}

MatX<double> euroc_process_jacobian(const Element<double>& xk, const Element<double>& xkm1,
                                    double dt, const Vec3<double>& gravity) {
  const MatX<double>& m = xkm1.mat();
  MatX<double> fop = MatX<double>::Identity(5, 5);
  fop.topLeftCorner<3, 3>() = m.topLeftCorner<3, 3>();
  fop.block<3, 1>(0, 3) = m.block<3, 1>(0, 3) + dt * gravity;
  fop.block<3, 1>(0, 4) = m.block<3, 1>(0, 4) + dt * m.block<3, 1>(0, 3);
  MatX<double> b = MatX<double>::Identity(9, 9);
  b.block<3, 3>(6, 3) = dt * Mat3<double>::Identity();
  const Element<double> rel = inverse(xk) * Element<double>(GroupKind::se23(), fop);
  return adjoint(rel) * b;
}

MatX<double> euroc_position_jacobian(const Element<double>& xk) {
  const Eigen::Matrix<double, 5, 1> p = (Eigen::Matrix<double, 5, 1>() << 0, 0, 0, 0, 1).finished();
  const MatX<double> tp = xk.mat() * odot(p, GroupKind::se23());
  return tp.topRows(3);
}

BlockJacobian analytic_jacobian_euroc(const BatchProblem& p, const Element<double>& states) {
  if (p.process.kind != ProcessKind::ImuSE23) {
    throw ValidationError("analytic Jacobian is only available for the SE23 IMU model");
  }
  p.validate();
  const GroupKind kind = p.composite_kind();
  if (!(states.kind() == kind)) throw DimensionError("state kind does not match the problem");
  const int n = 9;
  BlockJacobian out;
  out.cols = kind.dof();
  int row = 0;
  int term = 0;
  out.blocks.push_back({term++, row, 0, 0, -MatX<double>::Identity(n, n)});
  row += n;
  for (int k = 1; k < p.state_count(); ++k) {
    const double dt = p.times[k] - p.times[k - 1];
    out.blocks.push_back({term, row, k - 1, kind.dof_offset(k - 1),
                          euroc_process_jacobian(states.block(k), states.block(k - 1), dt,
                                                 p.process.gravity)});
    out.blocks.push_back({term, row, k, kind.dof_offset(k), -MatX<double>::Identity(n, n)});
    ++term;
    row += n;
  }
  for (const Measurement* m : ordered_measurements(p)) {
    if (m->kind != MeasurementKind::Position3D) {
      throw ValidationError("analytic Jacobian only supports position measurements");
    }
    // the error is y - g, so its Jacobian is -H
    out.blocks.push_back({term++, row, m->state, kind.dof_offset(m->state),
                          -euroc_position_jacobian(states.block(m->state))});
    row += 3;
  }
  out.rows = row;
  return out;
}

std::vector<Element<double>> dead_reckon(const Element<double>& start,
                                         const std::vector<VecX<double>>& inputs,
                                         const ProcessModel& model,
                                         const std::vector<double>& times) {
  if (times.empty()) throw ValidationError("dead reckoning needs at least one time");
  if (inputs.size() + 1 != times.size()) {
    throw DimensionError("dead reckoning needs one input per interval");
  }
  std::vector<Element<double>> out{start};
  out.reserve(times.size());
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double dt = times[k] - times[k - 1];
    if (!(dt > 0.0)) throw ValidationError("dead reckoning times must be strictly increasing");
    out.push_back(model.propagate(out.back(), inputs[k - 1], dt));
  }
  return out;
}

LeastSquaresProblem make_least_squares(const BatchProblem& p,
                                       const std::vector<Element<double>>& initial) {
  if (static_cast<int>(initial.size()) != p.state_count()) {
    throw DimensionError("initial guess has " + std::to_string(initial.size()) + " states, problem has " +
                         std::to_string(p.state_count()));
  }
  return {build_error_stack(p), build_weight(p), composite_pack(initial), Side::Right};
}

int nearest_state(const std::vector<double>& times, double t) {
  if (times.empty()) return -1;
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  int idx;
  if (it == times.begin()) {
    idx = 0;
  } else if (it == times.end()) {
    idx = static_cast<int>(times.size()) - 1;
  } else {
    const int hi = static_cast<int>(it - times.begin());
    idx = (t - times[hi - 1] <= times[hi] - t) ? hi - 1 : hi;
  }
  double period;
  if (times.size() == 1) {
    return t == times[0] ? 0 : -1;
  } else if (idx == 0) {
    period = times[1] - times[0];
  } else if (idx + 1 == static_cast<int>(times.size())) {
    period = times[idx] - times[idx - 1];
  } else {
    period = std::min(times[idx] - times[idx - 1], times[idx + 1] - times[idx]);
  }
  return std::abs(t - times[idx]) <= 0.5 * period ? idx : -1;
}

}  // namespace cslie::estimation
