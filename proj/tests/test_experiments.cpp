#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cslie/experiments.hpp"

using namespace cslie;
namespace ex = cslie::experiments;

namespace {

data::RunConfig short_se23() {
  data::RunConfig c;
  c.t_start = 60.0;
  c.t_end = 64.0;
  c.input_rate_hz = 25.0;
  c.measurement_rate_hz = 10.0;
  c.synthetic = true;
  return c;
}

data::RunConfig short_se2() {
  data::RunConfig c;
  c.t_start = 500.0;
  c.t_end = 530.0;
  c.input_rate_hz = 5.0;
  c.measurement_rate_hz = 5.0;
  c.synthetic = true;
  return c;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(CSLIE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("sweep") {
  const auto r = ex::run_sweep();
  CHECK(r.report.rows.size() == 40);
  CHECK(r.floor_ok());
  CHECK(r.central_ok());
  std::ostringstream a, b;
  r.report.write_csv(a);
  ex::run_sweep().report.write_csv(b);
  CHECK(a.str() == b.str());
}

TEST_CASE("pose fit") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = ex::run_example2(seed);
    CHECK(r.passed());
    CHECK(r.complex_step.history.size() >= 2);
  }
}

TEST_CASE("SE23 setup") {
  const auto s = ex::setup_se23(short_se23());
  CHECK(s.truth.size() == 100);
  CHECK(s.initial.size() == 100);
  CHECK(s.problem.measurements.size() == 40);
  CHECK((s.problem.prior.mat() - s.truth.front().mat()).norm() == 0.0);
  // the dead-reckoned start leaves every process error at zero
  for (std::size_t k = 1; k < s.initial.size(); ++k) {
    const double dt = s.problem.times[k] - s.problem.times[k - 1];
    CHECK(estimation::error_process(s.initial[k], s.initial[k - 1], s.problem.inputs[k - 1], s.problem.process, dt)
              .norm() <= 1e-12);
  }
}

TEST_CASE("SE23 backends agree") {
  const auto s = ex::setup_se23(short_se23());
  auto cfg = short_se23();
  const auto cs = ex::run_batch(s, ex::solve_options(cfg, s));
  cfg.solver.backend = JacobianBackend::Central;
  const auto cd = ex::run_batch(s, ex::solve_options(cfg, s));
  cfg.solver.backend = JacobianBackend::Analytic;
  const auto an = ex::run_batch(s, ex::solve_options(cfg, s));
  REQUIRE(cs.result.converged());
  CHECK(std::abs(cd.result.final_cost - cs.result.final_cost) <= 1e-6 * cs.result.final_cost);
  CHECK(std::abs(an.result.final_cost - cs.result.final_cost) <= 1e-6 * cs.result.final_cost);
  CHECK(cs.evaluations_per_jacobian == 900);
  CHECK(cd.evaluations_per_jacobian == 2 * cs.evaluations_per_jacobian);
  CHECK(cs.position_rmse < 0.1);
}

TEST_CASE("SE2 step-size independence") {
  const auto s = ex::setup_se2(short_se2());
  auto cfg = short_se2();
  cfg.h = 1e-20;
  const auto a = ex::run_batch(s, ex::solve_options(cfg, s));
  cfg.h = 1e-14;
  const auto b = ex::run_batch(s, ex::solve_options(cfg, s));
  REQUIRE(a.estimate.size() == b.estimate.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.estimate.size(); ++k) {
    worst = std::max(worst, (a.estimate[k].mat() - b.estimate[k].mat()).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-10);
  CHECK(a.result.converged());
  CHECK(a.max_position_error < 0.1);
  REQUIRE(a.result.marginal_covariances);
  CHECK(a.result.marginal_covariances->size() == a.estimate.size());
}

TEST_CASE("SE2 rejects the analytic backend") {
  const auto s = ex::setup_se2(short_se2());
  auto cfg = short_se2();
  cfg.solver.backend = JacobianBackend::Analytic;
  CHECK_THROWS_AS(ex::solve_options(cfg, s), ValidationError);
}

TEST_CASE("self-test") {
  const auto a = ex::run_selftest();
  const auto b = ex::run_selftest();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK_MESSAGE(a[i].passed, a[i].name << ": " << a[i].detail);
    CHECK(a[i].detail == b[i].detail);
  }

  // an exponential that is slightly off must be caught
  ex::SelftestHooks broken;
  broken.exp = [](const Tangent<double>& xi) {
    Tangent<double> bent = xi;
    bent.coords(0) *= 1.0 + 1e-6;
    return exp_map(bent);
  };
  bool roundtrip_failed = false;
  for (const auto& s : ex::run_selftest(broken)) {
    if (s.name == "exp-log roundtrip") roundtrip_failed = !s.passed;
  }
  CHECK(roundtrip_failed);
}

TEST_CASE("batch outputs") {
  const auto dir = std::filesystem::temp_directory_path() / "cslie_test_outputs";
  std::filesystem::remove_all(dir);
  const auto s = ex::setup_se2(short_se2());
  const auto r = ex::run_batch(s, ex::solve_options(short_se2(), s));
  ex::write_batch_outputs(dir, s, r);
  for (const char* name : {"trajectory.csv", "truth.csv", "errors.csv", "convergence.csv"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  const std::string err = slurp(dir / "errors.csv");
  CHECK(err.rfind("t,x_err,y_err,theta_err,sigma_x,sigma_y,sigma_theta\n", 0) == 0);
  CHECK(err.find("nan") == std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("command-line exit codes") {
  const auto dir = std::filesystem::temp_directory_path() / "cslie_test_cli";
  std::filesystem::create_directories(dir);
  CHECK(cli("selftest") == 0);
  CHECK(cli("sweep --out " + (dir / "s.csv").string()) == 0);
  CHECK(cli("example2 --out " + (dir / "e.csv").string()) == 0);
  CHECK(cli("batch-se2 --out " + (dir / "x").string()) == 1);  // no data and no --synthetic
  CHECK(cli("batch-se23 --config /nonexistent.json") == 1);
  CHECK(cli("nonsense") == 1);

  std::ofstream(dir / "bad.json") << R"({"t_start": 0, "t_end": 1, "bogus": 1})";
  CHECK(cli("batch-se23 --synthetic --config " + (dir / "bad.json").string()) == 1);

  // one iteration cannot converge from the dead-reckoned start
  std::ofstream(dir / "short.json") << R"({"t_start": 60, "t_end": 62, "input_rate_hz": 25,
      "measurement_rate_hz": 10, "synthetic": true, "solver": {"max_iterations": 1}})";
  CHECK(cli("batch-se23 --config " + (dir / "short.json").string() + " --out " + (dir / "y").string()) == 2);
  std::filesystem::remove_all(dir);
}
