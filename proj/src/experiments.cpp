#include "cslie/experiments.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "cslie/problems.hpp"
#include "cslie/random.hpp"

namespace cslie::experiments {

using estimation::BatchProblem;
using estimation::Measurement;
using estimation::MeasurementKind;
using estimation::ProcessKind;

namespace {

// Independent streams from one user seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed * 0x9E3779B97F4A7C15ULL + stream;
}

MatX<double> diag_or(const std::optional<std::vector<double>>& v, const VecX<double>& fallback,
                     const char* name) {
  if (!v) return fallback.asDiagonal();
  if (static_cast<Eigen::Index>(v->size()) != fallback.size()) {
    throw ValidationError(std::string(name) + " needs " + std::to_string(fallback.size()) + " entries");
  }
  return Eigen::Map<const VecX<double>>(v->data(), fallback.size()).asDiagonal();
}

template <typename Record>
const Record& nearest_record(const std::vector<Record>& records, const std::vector<double>& times,
                             double t, const char* what) {
  const int i = estimation::nearest_state(times, t);
  if (i < 0) throw ValidationError(std::string("no ") + what + " record near t=" + std::to_string(t));
  return records[static_cast<std::size_t>(i)];
}

}  // namespace

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

bool SweepOutcome::central_ok() const {
  const auto rows = report.rows_for(DiffMethod::Central);
  if (rows.empty()) return false;
  const bool interior = central_argmin != rows.front().h && central_argmin != rows.back().h;
  return interior && central_min > cs_min && central_min > cs_floor;
}

SweepOutcome run_sweep(const SweepOptions& options) {
  Rng rng(options.seed);
  const auto f = problems::BilinearPose::random(rng);
  const auto t = random_element(GroupKind::se3(), rng);
  SweepOutcome out;
  out.report = step_sweep(*f.function(), t, Side::Left, f.left_jacobian(t), "analytic",
                          decade_steps(options.h_max, options.h_min));
  out.cs_min = out.report.min_error(DiffMethod::ComplexStep);
  out.central_min = out.report.min_error(DiffMethod::Central);
  out.cs_floor = 0.0;
  bool any = false;
  for (const auto& r : out.report.rows_for(DiffMethod::ComplexStep)) {
    if (r.h <= 1e-10 * (1 + 1e-9)) {
      out.cs_floor = std::max(out.cs_floor, r.rel_error);
      any = true;
    }
  }
  if (!any) out.cs_floor = out.cs_min;
  for (const auto& r : out.report.rows_for(DiffMethod::Central)) {
    if (r.rel_error == out.central_min) out.central_argmin = r.h;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pose fit
// ---------------------------------------------------------------------------

double Example2Outcome::first_step_cost(const SolveResult& r) {
  return r.history.size() > 1 ? r.history[1].cost : r.final_cost;
}

bool Example2Outcome::passed() const {
  const double cs = first_step_cost(complex_step);
  const double an = first_step_cost(analytic);
  return cs <= 1e-18 && an <= 1e-18 && cs <= an + 1e-24;
}

Example2Outcome run_example2(std::uint64_t seed) {
  Rng rng(seed);
  const auto fit = problems::make_pose_fit(rng);
  SolveOptions cs;
  cs.max_iterations = 10;
  cs.backend = JacobianBackend::ComplexStep;
  SolveOptions an = cs;
  an.backend = JacobianBackend::Analytic;
  an.analytic_dense = fit.analytic;
  return {solve(fit.problem, cs), solve(fit.problem, an)};
}

void write_example2_csv(std::ostream& os, const Example2Outcome& outcome) {
  char buf[128];
  os << "backend,iter,cost,step_norm\n";
  for (const auto& [name, r] : {std::pair{"complex-step", &outcome.complex_step}, std::pair{"analytic", &outcome.analytic}}) {
    for (const auto& h : r->history) {
      std::snprintf(buf, sizeof buf, "%s,%d,%.17e,%.17e\n", name, h.iteration, h.cost, h.step_norm);
      os << buf;
    }
  }
}

// ---------------------------------------------------------------------------
// SE23 setup
// ---------------------------------------------------------------------------

BatchSetup setup_se23(const data::RunConfig& config) {
  config.validate();
  BatchSetup s;
  BatchProblem& p = s.problem;
  p.process.kind = ProcessKind::ImuSE23;

  std::vector<data::ImuSample> imu;
  std::vector<data::PoseRecord3> gt;
  if (config.synthetic) {
    data::SyntheticSpec spec;
    spec.kind = ProcessKind::ImuSE23;
    spec.t_start = config.t_start;
    spec.duration = config.t_end - config.t_start;
    spec.rate_hz = config.input_rate_hz;
    spec.seed = config.seed;
    if (config.acc_bias) spec.acc_bias = Eigen::Map<const Vec3<double>>(config.acc_bias->data());
    if (config.gyro_bias) spec.gyro_bias = Eigen::Map<const Vec3<double>>(config.gyro_bias->data());
    auto d = data::generate_synthetic(spec);
    imu = std::move(d.imu.samples);
    gt = std::move(d.groundtruth.records);
    s.truth = std::move(d.truth);
  } else {
    const auto log = data::load_imu_csv(config.paths.imu);
    auto truth_log = data::load_groundtruth_csv(config.paths.groundtruth);
    data::rebase(truth_log, log.t0_ns);
    imu = data::downsample(data::window(log.samples, config.t_start, config.t_end), config.input_rate_hz);
    gt = data::window(truth_log.records, config.t_start, config.t_end);
    if (imu.size() < 2 || gt.empty()) throw ValidationError("time window holds too few samples");
    const auto gt_times = data::times_of(gt);
    for (const auto& u : imu) s.truth.push_back(nearest_record(gt, gt_times, u.t, "ground truth").se23());
  }

  p.times = data::times_of(imu);
  for (std::size_t k = 0; k + 1 < imu.size(); ++k) p.inputs.push_back(imu[k].u.to_vector());

  VecX<double> q(9);
  q << Vec3<double>::Constant(1.6e-7), Vec3<double>::Constant(2e-6), Vec3<double>::Constant(1e-10);
  const MatX<double> qk = diag_or(config.q_diag, q, "q_diag");
  p.process_covariances.assign(p.inputs.size(), qk);
  p.prior = s.truth.front();
  p.prior_covariance = diag_or(config.p0_diag, VecX<double>::Constant(9, 1e-10), "p0_diag");

  const MatX<double> r = diag_or(config.r_diag, VecX<double>::Constant(3, config.position_sigma * config.position_sigma),
                                 "r_diag");
  for (const auto& y : data::simulate_position_measurements(gt, config.position_sigma, config.measurement_rate_hz,
                                                            stream_seed(config.seed, 1))) {
    const int k = estimation::nearest_state(p.times, y.t);
    if (k < 0) continue;
    p.measurements.push_back({k, MeasurementKind::Position3D, y.y, r, -1});
  }
  s.initial = estimation::dead_reckon(p.prior, p.inputs, p.process, p.times);
  return s;
}

// ---------------------------------------------------------------------------
// SE2 setup
// ---------------------------------------------------------------------------

BatchSetup setup_se2(const data::RunConfig& config) {
  config.validate();
  BatchSetup s;
  BatchProblem& p = s.problem;
  p.process.kind = ProcessKind::UnicycleSE2;
  const data::SyntheticSpec defaults;

  std::vector<data::OdometrySample> odo;
  std::vector<data::RangeBearingSample> obs;
  if (config.synthetic) {
    data::SyntheticSpec spec;
    spec.kind = ProcessKind::UnicycleSE2;
    spec.t_start = config.t_start;
    spec.duration = config.t_end - config.t_start;
    spec.rate_hz = config.input_rate_hz;
    spec.seed = config.seed;
    spec.sensor_offset = config.sensor_offset.value_or(0.0);
    auto d = data::generate_synthetic(spec);
    odo = std::move(d.odometry);
    obs = std::move(d.rangebearing);
    p.landmarks = std::move(d.landmarks);
    s.truth = std::move(d.truth);
  } else {
    odo = data::downsample(data::window(data::load_odometry_csv(config.paths.odometry), config.t_start, config.t_end),
                           config.input_rate_hz);
    obs = data::window(data::load_rangebearing_csv(config.paths.rangebearing), config.t_start, config.t_end);
    p.landmarks = data::load_landmarks_csv(config.paths.landmarks);
    const auto poses = data::load_pose2_csv(config.paths.pose2);
    if (odo.size() < 2) throw ValidationError("time window holds too few odometry samples");
    const auto pose_times = data::times_of(poses);
    for (const auto& o : odo) s.truth.push_back(nearest_record(poses, pose_times, o.t, "pose").se2());
  }
  p.sensor_offset = config.sensor_offset.value_or(0.0);
  p.times = data::times_of(odo);
  for (std::size_t k = 0; k + 1 < odo.size(); ++k) p.inputs.push_back(odo[k].u.to_vector());

  // tangent order is [heading, forward, lateral]; the lateral term keeps Q definite
  constexpr double kLateralSigma = 0.01;
  for (std::size_t k = 1; k < p.times.size(); ++k) {
    const double dt = p.times[k] - p.times[k - 1];
    const VecX<double> q = dt * dt * Vec3<double>(defaults.ang_sigma * defaults.ang_sigma,
                                                  defaults.vel_sigma * defaults.vel_sigma,
                                                  kLateralSigma * kLateralSigma);
    p.process_covariances.push_back(diag_or(config.q_diag, q, "q_diag"));
  }
  const MatX<double> r = diag_or(
      config.r_diag,
      Vec2<double>(defaults.range_sigma * defaults.range_sigma, defaults.bearing_sigma * defaults.bearing_sigma),
      "r_diag");

  // observation epochs thinned to the measurement rate
  std::vector<double> epochs;
  for (const auto& o : obs) {
    if (epochs.empty() || o.t != epochs.back()) epochs.push_back(o.t);
  }
  std::set<double> kept;
  if (epochs.size() > 1) {
    for (std::size_t i : data::downsample_indices(epochs, config.measurement_rate_hz)) kept.insert(epochs[i]);
  } else {
    kept.insert(epochs.begin(), epochs.end());
  }
  for (const auto& o : obs) {
    if (!kept.contains(o.t)) continue;
    const int k = estimation::nearest_state(p.times, o.t);
    if (k < 0) continue;
    p.measurements.push_back({k, MeasurementKind::RangeBearing, Vec2<double>(o.range, o.bearing), r, o.landmark});
  }

  p.prior_covariance = diag_or(config.p0_diag, VecX<double>::Ones(3), "p0_diag");
  const Eigen::LLT<MatX<double>> llt(p.prior_covariance);
  if (llt.info() != Eigen::Success) throw ValidationError("p0 is not positive definite");
  Rng rng(stream_seed(config.seed, 2));
  const VecX<double> draw = llt.matrixL() * rng.gaussian_vector(3, 1.0);
  p.prior = perturb(s.truth.front(), Tangent<double>(GroupKind::se2(), draw), Side::Right);
  s.initial = estimation::dead_reckon(p.prior, p.inputs, p.process, p.times);
  return s;
}

SolveOptions solve_options(const data::RunConfig& config, const BatchSetup& setup) {
  SolveOptions o;
  o.max_iterations = config.solver.max_iterations;
  o.step_tol = config.solver.step_tol;
  o.cost_tol = config.solver.cost_tol;
  o.fd_step = config.solver.fd_step;
  o.h = config.h;
  o.backend = config.solver.backend;
  o.linear_solver = config.solver.linear_solver;
  o.compute_marginals = setup.problem.process.kind == ProcessKind::UnicycleSE2;
  if (o.backend == JacobianBackend::Analytic) {
    if (setup.problem.process.kind != ProcessKind::ImuSE23) {
      throw ValidationError("the analytic backend is only available for the SE23 problem");
    }
    o.analytic_blocks = [p = setup.problem](const Element<double>& x) {
      return estimation::analytic_jacobian_euroc(p, x);
    };
  }
  return o;
}

// ---------------------------------------------------------------------------
// Batch runs
// ---------------------------------------------------------------------------

bool BatchOutcome::cost_rises_first() const {
  return result.history.size() > 1 && result.history[1].cost > result.history[0].cost;
}

BatchOutcome run_batch(const BatchSetup& setup, const SolveOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const LeastSquaresProblem problem = estimation::make_least_squares(setup.problem, setup.initial);
  BatchOutcome out{.result = solve(problem, options), .estimate = {}};
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.estimate = composite_unpack(out.result.state);
  if (!out.result.history.empty()) out.evaluations_per_jacobian = out.result.history.front().evaluations;

  const bool se23 = setup.problem.process.kind == ProcessKind::ImuSE23;
  const int pos_rows = se23 ? 3 : 2;
  const int pos_col = se23 ? 4 : 2;
  double sum = 0.0;
  for (std::size_t k = 0; k < out.estimate.size(); ++k) {
    const MatX<double>& a = out.estimate[k].mat();
    const MatX<double>& b = setup.truth[k].mat();
    const double e = (a.block(0, pos_col, pos_rows, 1) - b.block(0, pos_col, pos_rows, 1)).norm();
    sum += e * e;
    out.max_position_error = std::max(out.max_position_error, e);
    const double att = se23 ? data::attitude_error(a.topLeftCorner<3, 3>(), b.topLeftCorner<3, 3>())
                            : std::abs(wrap_angle(std::atan2(a(1, 0), a(0, 0)) - std::atan2(b(1, 0), b(0, 0))));
    out.max_attitude_error = std::max(out.max_attitude_error, att);
  }
  out.position_rmse = std::sqrt(sum / static_cast<double>(out.estimate.size()));
  return out;
}

void write_batch_outputs(const std::filesystem::path& dir, const BatchSetup& setup, const BatchOutcome& outcome) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw ValidationError("cannot write " + (dir / name).string());
    return f;
  };
  const auto& times = setup.problem.times;
  {
    auto f = open("trajectory.csv");
    data::write_trajectory_csv(f, times, outcome.estimate);
  }
  {
    auto f = open("truth.csv");
    data::write_trajectory_csv(f, times, setup.truth);
  }
  {
    auto f = open("errors.csv");
    if (setup.problem.process.kind == ProcessKind::ImuSE23) {
      data::write_error_csv_se23(f, times, outcome.estimate, setup.truth);
    } else {
      const auto& cov = outcome.result.marginal_covariances;
      data::write_error_csv_se2(f, times, outcome.estimate, setup.truth, cov ? &*cov : nullptr);
    }
  }
  {
    auto f = open("convergence.csv");
    write_convergence_csv(f, outcome.result.history);
  }
}

// ---------------------------------------------------------------------------
// Self-test suites
// ---------------------------------------------------------------------------

namespace {

const std::vector<GroupKind>& test_kinds() {
  static const std::vector<GroupKind> kinds{
      GroupKind::so3(), GroupKind::se2(), GroupKind::se3(), GroupKind::se23(), GroupKind::rn(3),
      GroupKind::composite({GroupKind::se2(), GroupKind::so3(), GroupKind::se23()})};
  return kinds;
}

struct Check {
  bool ok = true;
  std::ostringstream why;

  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) why << msg;
    ok = ok && cond;
  }
};

MatX<double> expm_series(const MatX<double>& a) {
  MatX<double> sum = MatX<double>::Identity(a.rows(), a.cols());
  MatX<double> term = sum;
  for (int k = 1; k <= 40; ++k) {
    term = (term * a) / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

void suite_roundtrip(Check& c, const ExpFn& exp, Rng& rng) {
  for (const auto& kind : test_kinds()) {
    for (int i = 0; i < 100; ++i) {
      const auto xi = random_tangent(kind, rng, 1.0, 2.5);
      const auto x = exp(xi);
      const double e1 = (log_map(x).coords - xi.coords).norm();
      c.expect(e1 <= 1e-9 * std::max(1.0, xi.coords.norm()),
               kind.name() + ": log(exp(xi)) off by " + std::to_string(e1));
      const auto y = random_element(kind, rng);
      const double e2 = (exp(log_map(y)).matrix() - y.matrix()).norm();
      c.expect(e2 <= 1e-9 * std::max(1.0, y.matrix().norm()), kind.name() + ": exp(log(X)) off by " + std::to_string(e2));
    }
  }
}

void suite_series(Check& c, const ExpFn& exp, Rng& rng) {
  for (const auto& kind : test_kinds()) {
    if (kind.is_composite()) continue;
    for (int i = 0; i < 50; ++i) {
      const auto xi = random_tangent(kind, rng, 0.5, 1.5);
      const double e = (exp(xi).mat() - expm_series(wedge(xi))).norm();
      c.expect(e <= 1e-12, kind.name() + ": exp differs from the series by " + std::to_string(e));
    }
  }
}

void suite_adjoint(Check& c, Rng& rng) {
  for (const auto& kind : test_kinds()) {
    if (kind.is_composite()) continue;
    for (int i = 0; i < 50; ++i) {
      const auto x = random_element(kind, rng);
      const auto z = random_tangent(kind, rng);
      const MatX<double> lhs = wedge(Tangent<double>(kind, adjoint(x) * z.coords));
      const MatX<double> rhs = x.mat() * wedge(z) * inverse(x).mat();
      c.expect((lhs - rhs).norm() <= 1e-10 * std::max(1.0, rhs.norm()), kind.name() + ": adjoint identity fails");
    }
  }
  for (const auto& kind : {GroupKind::se3(), GroupKind::se23()}) {
    for (int i = 0; i < 50; ++i) {
      const auto xi = random_tangent(kind, rng);
      const VecX<double> p = rng.gaussian_vector(kind.dim(), 1.0);
      const double e = (wedge(xi) * p - odot(p, kind) * xi.coords).norm();
      c.expect(e <= 1e-12 * std::max(1.0, p.norm() * xi.coords.norm()), kind.name() + ": odot identity fails");
    }
  }
}

void suite_side_relation(Check& c, Rng& rng) {
  for (int i = 0; i < 20; ++i) {
    const auto f = problems::BilinearPose::random(rng);
    const auto x = random_element(GroupKind::se3(), rng);
    const auto jr = jacobian_right(*f.function(), x).matrix;
    const auto jl = jacobian_left(*f.function(), x).matrix;
    const double e = (jr - jl * adjoint(x)).norm();
    c.expect(e <= 1e-12 * std::max(1.0, jr.norm()), "J_right != J_left Ad(X): " + std::to_string(e));
    const double a = (jl - f.left_jacobian(x)).norm();
    c.expect(a <= 1e-12 * std::max(1.0, jl.norm()), "complex-step left Jacobian differs from analytic");
  }
}

void suite_composite(Check& c, const ExpFn& exp, Rng& rng) {
  const auto kind = test_kinds().back();
  for (int i = 0; i < 50; ++i) {
    const auto xi = random_tangent(kind, rng);
    const auto x = exp(xi);
    for (int b = 0; b < kind.block_count(); ++b) {
      const auto blk = exp(Tangent<double>(kind.block(b), xi.block(b)));
      c.expect((x.block(b).mat() - blk.mat()).norm() <= 1e-14, "composite exp differs from blockwise exp");
    }
  }
}

void suite_step_insensitivity(Check& c, Rng& rng) {
  const auto f = problems::BilinearPose::random(rng);
  const auto x = random_element(GroupKind::se3(), rng);
  const auto pe = problems::PoseError{random_element(GroupKind::se3(), rng)};
  for (const auto& fn : {f.function(), pe.function()}) {
    const MatX<double> ref = jacobian_right(*fn, x, 1e-20).matrix;
    for (double h = 1e-12; h >= 1e-30 * 0.999; h /= 10.0) {
      const double e = (jacobian_right(*fn, x, h).matrix - ref).norm() / ref.norm();
      c.expect(e <= 1e-13, "complex-step Jacobian changes with h=" + std::to_string(h));
    }
  }
}

void suite_counts(Check& c, Rng& rng) {
  for (const auto& kind : test_kinds()) {
    const auto x = random_element(kind, rng);
    const auto f = make_group_function(2, []<Scalar S>(const Element<S>& e) {
      const MatX<S> m = e.matrix();
      VecX<S> out(2);
      out << m.sum(), m(0, 0) * m(0, 0);
      return out;
    });
    const auto cs = jacobian_complex_step(*f, x, Side::Right);
    const auto cd = jacobian_central(*f, x, 1e-6, Side::Right);
    c.expect(cs.evaluations == kind.dof(), kind.name() + ": complex-step evaluation count");
    c.expect(cd.evaluations == 2L * kind.dof(), kind.name() + ": central-difference evaluation count");
  }
}

void suite_determinism(Check& c, std::uint64_t seed) {
  std::ostringstream a, b;
  run_sweep({seed}).report.write_csv(a);
  run_sweep({seed}).report.write_csv(b);
  c.expect(a.str() == b.str(), "sweep is not reproducible");
  data::SyntheticSpec spec;
  spec.duration = 2.0;
  spec.seed = seed;
  const auto d1 = data::generate_synthetic(spec);
  const auto d2 = data::generate_synthetic(spec);
  bool same = d1.imu.samples.size() == d2.imu.samples.size();
  for (std::size_t k = 0; same && k < d1.imu.samples.size(); ++k) {
    same = d1.imu.samples[k].u.acc == d2.imu.samples[k].u.acc && d1.imu.samples[k].u.gyro == d2.imu.samples[k].u.gyro;
  }
  c.expect(same, "synthetic generator is not reproducible");
  std::ostringstream e1, e2;
  write_example2_csv(e1, run_example2(seed));
  write_example2_csv(e2, run_example2(seed));
  c.expect(e1.str() == e2.str(), "pose fit is not reproducible");
}

}  // namespace

std::vector<SuiteResult> run_selftest(const SelftestHooks& hooks, std::uint64_t seed) {
  const ExpFn exp = hooks.exp ? hooks.exp : ExpFn([](const Tangent<double>& xi) { return exp_map(xi); });
  std::vector<std::pair<std::string, std::function<void(Check&, Rng&)>>> suites{
      {"exp-log roundtrip", [&](Check& c, Rng& r) { suite_roundtrip(c, exp, r); }},
      {"series oracle", [&](Check& c, Rng& r) { suite_series(c, exp, r); }},
      {"adjoint and odot identities", [](Check& c, Rng& r) { suite_adjoint(c, r); }},
      {"left/right Jacobian relation", [](Check& c, Rng& r) { suite_side_relation(c, r); }},
      {"composite block exp", [&](Check& c, Rng& r) { suite_composite(c, exp, r); }},
      {"step-size insensitivity", [](Check& c, Rng& r) { suite_step_insensitivity(c, r); }},
      {"evaluation counts", [](Check& c, Rng& r) { suite_counts(c, r); }},
      {"determinism", [seed](Check& c, Rng&) { suite_determinism(c, seed); }},
  };
  std::vector<SuiteResult> out;
  std::uint64_t stream = 0;
  for (const auto& [name, run] : suites) {
    Rng rng(stream_seed(seed, 100 + stream++));
    Check c;
    try {
      run(c, rng);
    } catch (const std::exception& e) {
      c.expect(false, std::string("threw: ") + e.what());
    }
    out.push_back({name, c.ok, c.why.str()});
  }
  return out;
}

}  // namespace cslie::experiments
