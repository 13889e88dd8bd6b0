// End-to-end runs behind the command-line tool and the acceptance binary:
// the step-size sweep, the single-pose fit, the two batch problems and the
// self-test suites.

#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cslie/data.hpp"

namespace cslie::experiments {

// ---------------------------------------------------------------------------
// Step-size sweep on f(T) = v^T T y
// ---------------------------------------------------------------------------

struct SweepOptions {
  std::uint64_t seed = 1;
  double h_max = 1e-1;
  double h_min = 1e-20;
};

struct SweepOutcome {
  SweepReport report;
  /// Worst complex-step error over h <= 1e-10.
  double cs_floor = 0.0;
  double cs_min = 0.0;
  double central_min = 0.0;
  double central_argmin = 0.0;

  /// Complex-step floor within 1e-13.
  bool floor_ok() const { return cs_floor <= 1e-13; }
  /// Central difference is best at an interior h and never reaches the floor.
  bool central_ok() const;
};

SweepOutcome run_sweep(const SweepOptions& options = {});

// ---------------------------------------------------------------------------
// Pose-to-reference fit solved with complex-step and analytic Jacobians
// ---------------------------------------------------------------------------

struct Example2Outcome {
  SolveResult complex_step;
  SolveResult analytic;

  /// Cost after the first update (the final cost if no update was taken).
  static double first_step_cost(const SolveResult& r);
  /// Both reach 1e-18 in one step and complex-step is no worse than
  /// analytic. The two first steps coincide analytically, so costs within
  /// 1e-24 of each other count as a tie.
  bool passed() const;
};

Example2Outcome run_example2(std::uint64_t seed);

/// `backend,iter,cost,step_norm`
void write_example2_csv(std::ostream& os, const Example2Outcome& outcome);

// ---------------------------------------------------------------------------
// Batch problems
// ---------------------------------------------------------------------------

struct BatchSetup {
  estimation::BatchProblem problem;
  /// Ground truth at the state times.
  std::vector<Element<double>> truth;
  /// Dead-reckoned initial guess.
  std::vector<Element<double>> initial;
};

/// SE23 IMU/position problem from the run configuration, using synthetic
/// data or the logs named in `paths`.
BatchSetup setup_se23(const data::RunConfig& config);
/// SE2 odometry/range-bearing problem.
BatchSetup setup_se2(const data::RunConfig& config);

SolveOptions solve_options(const data::RunConfig& config, const BatchSetup& setup);

struct BatchOutcome {
  SolveResult result;
  std::vector<Element<double>> estimate;
  /// Root mean square position error over states.
  double position_rmse = 0.0;
  double max_position_error = 0.0;
  /// Attitude error for SE23, wrapped heading error for SE2.
  double max_attitude_error = 0.0;
  /// Evaluations per Jacobian (the column count n times 1 or 2).
  long evaluations_per_jacobian = 0;
  double seconds = 0.0;

  /// History shows J_1 > J_0.
  bool cost_rises_first() const;
};

BatchOutcome run_batch(const BatchSetup& setup, const SolveOptions& options);

/// Writes `trajectory.csv`, `truth.csv`, `errors.csv` and `convergence.csv`
/// into `dir`.
void write_batch_outputs(const std::filesystem::path& dir, const BatchSetup& setup,
                         const BatchOutcome& outcome);

// ---------------------------------------------------------------------------
// Self-test suites
// ---------------------------------------------------------------------------

using ExpFn = std::function<Element<double>(const Tangent<double>&)>;

struct SelftestHooks {
  /// Exponential map under test; the library one by default.
  ExpFn exp;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SuiteResult> run_selftest(const SelftestHooks& hooks = {}, std::uint64_t seed = 1);

}  // namespace cslie::experiments
