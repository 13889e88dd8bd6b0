// Dataset logs: CSV loaders and writers, downsampling, synthetic data and
// run configuration.

#pragma once

#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cslie/estimation.hpp"

namespace cslie::data {

using estimation::ImuInput;
using estimation::OdometryInput;

struct ImuSample {
  double t = 0.0;
  ImuInput u;
};

/// Times are seconds relative to t0_ns.
struct ImuLog {
  std::int64_t t0_ns = 0;
  std::vector<ImuSample> samples;
};

/// Position, attitude and optional velocity at a time.
struct PoseRecord3 {
  double t = 0.0;
  Vec3<double> position = Vec3<double>::Zero();
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();
  std::optional<Vec3<double>> velocity;

  /// SE23 element; requires a velocity.
  Element<double> se23() const;
  static PoseRecord3 from_se23(double t, const Element<double>& x);
};

struct GroundTruthLog {
  std::int64_t t0_ns = 0;
  std::vector<PoseRecord3> records;
};

struct PoseRecord2 {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Element<double> se2() const;
  static PoseRecord2 from_se2(double t, const Element<double>& x);
};

struct OdometrySample {
  double t = 0.0;
  OdometryInput u;
};

struct RangeBearingSample {
  double t = 0.0;
  int landmark = 0;
  double range = 0.0;
  double bearing = 0.0;
};

struct PositionSample {
  double t = 0.0;
  Vec3<double> y = Vec3<double>::Zero();
};

using LandmarkMap = std::map<int, Vec2<double>>;

// ---------------------------------------------------------------------------
// Loaders. Errors carry the file and 1-based line number.
// ---------------------------------------------------------------------------

/// `timestamp_ns,wx,wy,wz,ax,ay,az`
ImuLog load_imu_csv(const std::filesystem::path& path);
/// `timestamp_ns,px,py,pz,qw,qx,qy,qz,vx,vy,vz`; extra trailing columns are ignored.
GroundTruthLog load_groundtruth_csv(const std::filesystem::path& path);
/// `t_s,v_mps,omega_radps`
std::vector<OdometrySample> load_odometry_csv(const std::filesystem::path& path);
/// `t_s,landmark_id,range_m,bearing_rad`
std::vector<RangeBearingSample> load_rangebearing_csv(const std::filesystem::path& path);
/// `landmark_id,x_m,y_m`
LandmarkMap load_landmarks_csv(const std::filesystem::path& path);
/// `t_s,x_m,y_m,theta_rad`
std::vector<PoseRecord2> load_pose2_csv(const std::filesystem::path& path);

/// Express a log in another ns origin.
void rebase(GroundTruthLog& log, std::int64_t t0_ns);

// ---------------------------------------------------------------------------
// Stream utilities
// ---------------------------------------------------------------------------

/// Native rate from the median sample spacing.
double native_rate(const std::vector<double>& times);

/// Indices of the samples nearest to the grid t_0 + i / target_hz (ties go
/// to the earlier sample, duplicates dropped).
std::vector<std::size_t> downsample_indices(const std::vector<double>& times, double target_hz);

template <typename Record>
std::vector<double> times_of(const std::vector<Record>& records) {
  std::vector<double> t;
  t.reserve(records.size());
  for (const auto& r : records) t.push_back(r.t);
  return t;
}

template <typename Record>
std::vector<Record> downsample(const std::vector<Record>& records, double target_hz) {
  std::vector<Record> out;
  for (std::size_t i : downsample_indices(times_of(records), target_hz)) out.push_back(records[i]);
  return out;
}

template <typename Record>
std::vector<Record> window(const std::vector<Record>& records, double t_start, double t_end) {
  std::vector<Record> out;
  for (const auto& r : records) {
    if (r.t >= t_start && r.t <= t_end) out.push_back(r);
  }
  return out;
}

/// Truth positions at rate_hz plus iid N(0, sigma^2) noise per axis.
std::vector<PositionSample> simulate_position_measurements(const std::vector<PoseRecord3>& truth,
                                                           double sigma, double rate_hz,
                                                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  estimation::ProcessKind kind = estimation::ProcessKind::ImuSE23;
  double t_start = 0.0;
  double duration = 10.0;
  /// Input and state rate.
  double rate_hz = 25.0;
  std::uint64_t seed = 1;
  bool noise_free = false;

  // SE23
  double acc_sigma = 0.035;
  double gyro_sigma = 0.01;
  /// Constant sensor biases added to the logged inputs; the estimator does
  /// not model them.
  Vec3<double> acc_bias = Vec3<double>::Zero();
  Vec3<double> gyro_bias = Vec3<double>::Zero();

  // SE2
  double vel_sigma = 0.047;
  double ang_sigma = 0.095;
  double range_sigma = 0.031;
  double bearing_sigma = 0.026;
  double max_range = 10.0;
  int landmark_count = 17;
  double sensor_offset = 0.0;
};

struct SyntheticData {
  std::vector<double> times;
  std::vector<Element<double>> truth;
  /// One input sample per state time, noisy unless noise_free. Sample k
  /// drives the step from t_k to t_{k+1}; the last one is unused.
  ImuLog imu;
  GroundTruthLog groundtruth;
  std::vector<OdometrySample> odometry;
  std::vector<RangeBearingSample> rangebearing;
  std::vector<PoseRecord2> pose2;
  LandmarkMap landmarks;
};

/// Smooth trajectory with inputs obtained by inverting the discrete process
/// model, so noise-free inputs dead-reckon back onto the truth. Reproducible
/// from the seed.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

/// `t,px,py,pz,qw,qx,qy,qz,vx,vy,vz` for SE23, `t,x,y,theta` for SE2.
void write_trajectory_csv(std::ostream& os, const std::vector<double>& times,
                          const std::vector<Element<double>>& states);

/// `t,pos_err,vel_err,att_err`
void write_error_csv_se23(std::ostream& os, const std::vector<double>& times,
                          const std::vector<Element<double>>& estimate,
                          const std::vector<Element<double>>& truth);

/// `t,x_err,y_err,theta_err,sigma_x,sigma_y,sigma_theta`; sigmas come from
/// per-state tangent covariances and are written as nan when absent.
void write_error_csv_se2(std::ostream& os, const std::vector<double>& times,
                         const std::vector<Element<double>>& estimate,
                         const std::vector<Element<double>>& truth,
                         const std::vector<MatX<double>>* covariances = nullptr);

/// ||ln(C_est^T C_true)^vee||
double attitude_error(const Mat3<double>& c_est, const Mat3<double>& c_true);

/// World-frame standard deviations (x, y, theta) of an SE2 state from its
/// right-perturbation covariance.
Vec3<double> se2_sigmas(const Element<double>& x, const MatX<double>& covariance);

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct SolverConfig {
  int max_iterations = 50;
  double step_tol = 1e-8;
  double cost_tol = 1e-10;
  double fd_step = 1e-6;
  JacobianBackend backend = JacobianBackend::ComplexStep;
  LinearSolver linear_solver = LinearSolver::SparseBlock;
};

struct DatasetPaths {
  std::string imu;
  std::string groundtruth;
  std::string odometry;
  std::string rangebearing;
  std::string landmarks;
  std::string pose2;
};

struct RunConfig {
  double t_start = 0.0;
  double t_end = 0.0;
  /// Input (state) rate and measurement rate.
  double input_rate_hz = 0.0;
  double measurement_rate_hz = 0.0;
  std::optional<std::vector<double>> q_diag;
  std::optional<std::vector<double>> r_diag;
  std::optional<std::vector<double>> p0_diag;
  double position_sigma = 0.1;
  double h = kDefaultComplexStep;
  SolverConfig solver;
  std::uint64_t seed = 1;
  bool synthetic = false;
  /// Constant IMU biases of the synthetic SE23 data.
  std::optional<std::vector<double>> acc_bias;
  std::optional<std::vector<double>> gyro_bias;
  std::optional<double> sensor_offset;
  DatasetPaths paths;

  void validate() const;
};

/// Names as printed by to_string; ParseError otherwise.
JacobianBackend parse_backend(const std::string& name);
LinearSolver parse_linear_solver(const std::string& name);

/// Throws ParseError on malformed JSON or unknown keys.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace cslie::data
