// Command-line front end. Exit codes: 0 success, 1 invalid input or data,
// 2 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "cslie/experiments.hpp"

using namespace cslie;
namespace ex = cslie::experiments;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kNumerical = 2;

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path);
  return f;
}

struct BatchFlags {
  std::string config;
  std::string out;
  bool synthetic = false;
  std::optional<std::string> backend;
  std::optional<double> h;
  std::optional<std::uint64_t> seed;
};

data::RunConfig batch_config(const BatchFlags& f, bool se23) {
  data::RunConfig c;
  if (!f.config.empty()) {
    c = data::load_run_config(f.config);
  } else if (se23) {
    c.t_start = 60.0;
    c.t_end = 80.0;
    c.input_rate_hz = 25.0;
    c.measurement_rate_hz = 10.0;
  } else {
    c.t_start = 500.0;
    c.t_end = 620.0;
    c.input_rate_hz = 5.0;
    c.measurement_rate_hz = 5.0;
  }
  if (f.synthetic) c.synthetic = true;
  if (f.h) c.h = *f.h;
  if (f.seed) c.seed = *f.seed;
  if (f.backend) {
    c.solver.backend = data::parse_backend(*f.backend);
  }
  if (!c.synthetic && (se23 ? c.paths.imu.empty() : c.paths.odometry.empty())) {
    throw ValidationError("no dataset paths configured; pass --synthetic or a config with paths");
  }
  c.validate();
  return c;
}

int run_batch(const BatchFlags& f, bool se23) {
  const auto config = batch_config(f, se23);
  const auto setup = se23 ? ex::setup_se23(config) : ex::setup_se2(config);
  const auto options = ex::solve_options(config, setup);
  const auto outcome = ex::run_batch(setup, options);
  ex::write_batch_outputs(f.out, setup, outcome);

  const auto& r = outcome.result;
  std::printf("states %zu, measurements %zu, backend %s, h %.0e\n", setup.truth.size(),
              setup.problem.measurements.size(), to_string(options.backend).c_str(), options.h);
  for (const auto& it : r.history) {
    std::printf("  iter %2d  cost %.6e  step %.3e  evals %ld\n", it.iteration, it.cost, it.step_norm, it.evaluations);
  }
  std::printf("termination %s, final cost %.6e, %ld evaluations per Jacobian, %ld total, %.2f s\n",
              to_string(r.termination).c_str(), r.final_cost, outcome.evaluations_per_jacobian,
              r.total_evaluations, outcome.seconds);
  std::printf("position rmse %.4f m, max position error %.4f m, max %s error %.4f rad\n", outcome.position_rmse,
              outcome.max_position_error, se23 ? "attitude" : "heading", outcome.max_attitude_error);
  std::printf("outputs in %s\n", f.out.c_str());
  if (!r.converged()) {
    std::fprintf(stderr, "error: no convergence in %d iterations\n", options.max_iterations);
    return kNumerical;
  }
  return kOk;
}

void add_batch_flags(CLI::App* cmd, BatchFlags& f, const std::string& default_out) {
  f.out = default_out;
  cmd->add_option("--config", f.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_flag("--synthetic", f.synthetic, "Use generated data instead of dataset files");
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--backend", f.backend, "complex-step, central or analytic");
  cmd->add_option("--step-size", f.h, "Complex-step size h");
  cmd->add_option("--seed", f.seed, "Random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-step Jacobians on matrix Lie groups and batch estimation"};
  app.require_subcommand(1);

  ex::SweepOptions sweep;
  std::string sweep_out = "sweep.csv";
  auto* sweep_cmd = app.add_subcommand("sweep", "Jacobian error against step size for f(T) = v^T T y");
  sweep_cmd->add_option("--h-min", sweep.h_min)->capture_default_str();
  sweep_cmd->add_option("--h-max", sweep.h_max)->capture_default_str();
  sweep_cmd->add_option("--seed", sweep.seed)->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out)->capture_default_str();

  std::uint64_t ex2_seed = 1;
  std::string ex2_out = "example2.csv";
  auto* ex2_cmd = app.add_subcommand("example2", "Gauss-Newton pose fit with complex-step and analytic Jacobians");
  ex2_cmd->add_option("--seed", ex2_seed)->capture_default_str();
  ex2_cmd->add_option("--out", ex2_out)->capture_default_str();

  BatchFlags se23_flags, se2_flags;
  auto* se23_cmd = app.add_subcommand("batch-se23", "IMU and position batch estimation on SE2(3)");
  add_batch_flags(se23_cmd, se23_flags, "out/se23");
  auto* se2_cmd = app.add_subcommand("batch-se2", "Odometry and range-bearing batch estimation on SE(2)");
  add_batch_flags(se2_cmd, se2_flags, "out/se2");

  std::uint64_t self_seed = 1;
  auto* self_cmd = app.add_subcommand("selftest", "Run the invariant suites");
  self_cmd->add_option("--seed", self_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*sweep_cmd) {
      const auto r = ex::run_sweep(sweep);
      auto f = open_out(sweep_out);
      r.report.write_csv(f);
      std::printf("complex-step floor (h <= 1e-10) %.3e, central minimum %.3e at h = %.0e\n", r.cs_floor,
                  r.central_min, r.central_argmin);
      std::printf("wrote %s\n", sweep_out.c_str());
      if (!r.floor_ok()) {
        std::fprintf(stderr, "error: complex-step floor %.3e exceeds 1e-13\n", r.cs_floor);
        return kNumerical;
      }
      return kOk;
    }
    if (*ex2_cmd) {
      const auto r = ex::run_example2(ex2_seed);
      auto f = open_out(ex2_out);
      ex::write_example2_csv(f, r);
      std::printf("cost after one step: complex-step %.3e, analytic %.3e\n",
                  ex::Example2Outcome::first_step_cost(r.complex_step),
                  ex::Example2Outcome::first_step_cost(r.analytic));
      std::printf("wrote %s\n", ex2_out.c_str());
      if (!r.passed()) {
        std::fprintf(stderr, "error: single-step optimum not reached\n");
        return kNumerical;
      }
      return kOk;
    }
    if (*se23_cmd) return run_batch(se23_flags, true);
    if (*se2_cmd) return run_batch(se2_flags, false);
    if (*self_cmd) {
      bool all = true;
      for (const auto& s : ex::run_selftest({}, self_seed)) {
        std::printf("%-30s %s%s%s\n", s.name.c_str(), s.passed ? "PASS" : "FAIL", s.detail.empty() ? "" : "  ",
                    s.detail.c_str());
        all = all && s.passed;
      }
      return all ? kOk : kNumerical;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kNumerical;
  }
  return kOk;
}
