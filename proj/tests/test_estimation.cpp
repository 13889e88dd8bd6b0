#include <doctest.h>

#include <numbers>

#include "cslie/estimation.hpp"
#include "cslie/random.hpp"

using namespace cslie;
using namespace cslie::estimation;

namespace {

constexpr double kPi = std::numbers::pi;

Element<double> se2(double x, double y, double theta) {
  MatX<double> m = MatX<double>::Identity(3, 3);
  m.topLeftCorner<2, 2>() = so2_exp(theta);
  m(0, 2) = x;
  m(1, 2) = y;
  return Element<double>(GroupKind::se2(), m);
}

Element<double> se23(const Mat3<double>& c, const Vec3<double>& v, const Vec3<double>& r) {
  MatX<double> m = MatX<double>::Identity(5, 5);
  m.topLeftCorner<3, 3>() = c;
  m.block<3, 1>(0, 3) = v;
  m.block<3, 1>(0, 4) = r;
  return Element<double>(GroupKind::se23(), m);
}

VecX<double> vec(std::initializer_list<double> xs) {
  VecX<double> v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

MatX<double> euroc_q() {
  VecX<double> d(9);
  d << Vec3<double>::Constant(1.6e-7), Vec3<double>::Constant(2e-6), Vec3<double>::Constant(1e-10);
  return d.asDiagonal();
}

// Small IMU/position problem with states at the dead-reckoned chain.
struct Euroc {
  BatchProblem problem;
  std::vector<Element<double>> states;
};

Euroc small_euroc(int k, std::uint64_t seed) {
  Rng rng(seed);
  Euroc e;
  BatchProblem& p = e.problem;
  p.process.kind = ProcessKind::ImuSE23;
  for (int i = 0; i <= k; ++i) p.times.push_back(0.04 * i);
  p.prior = random_element(GroupKind::se23(), rng, 1.0);
  p.prior_covariance = 1e-4 * MatX<double>::Identity(9, 9);
  for (int i = 0; i < k; ++i) {
    VecX<double> u(6);
    u << rng.gaussian(1.0), rng.gaussian(1.0), 9.81 + rng.gaussian(1.0), rng.gaussian_vector(3, 0.5);
    p.inputs.push_back(u);
    p.process_covariances.push_back(euroc_q());
  }
  e.states = dead_reckon(p.prior, p.inputs, p.process, p.times);
  for (int i = 0; i <= k; i += 2) {
    Measurement m;
    m.state = i;
    m.kind = MeasurementKind::Position3D;
    m.y = e.states[i].mat().block<3, 1>(0, 4) + rng.gaussian_vector(3, 0.1);
    m.covariance = 0.01 * MatX<double>::Identity(3, 3);
    p.measurements.push_back(m);
  }
  return e;
}

// Dense matrix of a block Jacobian restricted to rows [r0, r0 + rows).
MatX<double> rows_of(const MatX<double>& j, int r0, int rows) { return j.middleRows(r0, rows); }

}  // namespace

TEST_CASE("prior error") {
  Rng rng(11);
  const auto x = random_element(GroupKind::se23(), rng, 1.0);
  CHECK(error_prior(x, x).norm() <= 1e-12);

  const VecX<double> d = 1e-6 * rng.gaussian_vector(9, 1.0);
  const auto check = perturb(x, Tangent<double>(GroupKind::se23(), d), Side::Right);
  CHECK((error_prior(x, check) - d).norm() <= 1e-11);
  CHECK((error_prior(check, x) + d).norm() <= 1e-11);
}

TEST_CASE("process error") {
  Rng rng(12);
  ProcessModel model;
  const auto xkm1 = random_element(GroupKind::se23(), rng, 1.0);
  const VecX<double> u = rng.gaussian_vector(6, 1.0);
  const auto xk = model.propagate(xkm1, u, 0.05);
  CHECK(error_process(xk, xkm1, u, model, 0.05).norm() <= 1e-12);

  const VecX<double> d = 1e-6 * rng.gaussian_vector(9, 1.0);
  const auto moved = perturb(xk, Tangent<double>(GroupKind::se23(), d), Side::Right);
  CHECK((error_process(moved, xkm1, u, model, 0.05) + d).norm() <= 1e-11);

  SUBCASE("unicycle straight line") {
    ProcessModel uni{ProcessKind::UnicycleSE2};
    const auto e = error_process(se2(0.2, 0, 0), Element<double>::identity(GroupKind::se2()),
                                 vec({1.0, 0.0}), uni, 0.2);
    CHECK(e.norm() <= 1e-15);
  }
}

TEST_CASE("unicycle propagation") {
  const auto id = Element<double>::identity(GroupKind::se2());
  const VecX<double> none;
  CHECK((unicycle_propagate(id, vec({0, 0}), none, 1.0).mat() - id.mat()).norm() == 0.0);
  CHECK((unicycle_propagate(id, vec({1, 0}), none, 1.0).mat() - se2(1, 0, 0).mat()).norm() <= 1e-15);
  CHECK((unicycle_propagate(id, vec({0, kPi / 2}), none, 1.0).mat() - se2(0, 0, kPi / 2).mat()).norm() <=
        1e-15);
  // noise enters like the input
  CHECK((unicycle_propagate(id, vec({0.5, 0}), vec({0.5, 0}), 1.0).mat() - se2(1, 0, 0).mat()).norm() <=
        1e-15);
}

TEST_CASE("IMU propagation") {
  const Vec3<double> zero = Vec3<double>::Zero();
  const VecX<double> none;
  Rng rng(13);
  const auto x = random_element(GroupKind::se23(), rng, 1.0);
  MatX<double> still = x.mat();
  still.block<3, 1>(0, 3).setZero();
  const Element<double> xs(GroupKind::se23(), still);
  CHECK((imu_propagate(xs, VecX<double>::Zero(6), none, 0.3, zero).mat() - still).norm() <= 1e-15);

  const auto x0 = se23(Mat3<double>::Identity(), Vec3<double>(1, 0, 0), zero);
  const auto x1 = imu_propagate(x0, VecX<double>::Zero(6), none, 0.5, zero);
  CHECK((x1.mat().block<3, 1>(0, 4) - Vec3<double>(0.5, 0, 0)).norm() <= 1e-15);

  SUBCASE("gravity and specific force cancel at rest") {
    const auto c = random_element(GroupKind::so3(), rng, 1.0).mat();
    const auto rest = se23(c, zero, Vec3<double>(1, 2, 3));
    VecX<double> u(6);
    u << c.transpose() * Vec3<double>(0, 0, 9.81), zero;
    CHECK((imu_propagate(rest, u, none, 0.1).mat() - rest.mat()).norm() <= 1e-14);
  }
}

TEST_CASE("range-bearing prediction") {
  const auto id = Element<double>::identity(GroupKind::se2());
  const Vec2<double> a = predict_range_bearing(id, Vec2<double>(1, 0), 0.0);
  CHECK(a(0) == doctest::Approx(1.0));
  CHECK(std::abs(a(1)) <= 1e-15);
  const Vec2<double> b = predict_range_bearing(id, Vec2<double>(0, 2), 0.0);
  CHECK(b(0) == doctest::Approx(2.0));
  CHECK(b(1) == doctest::Approx(kPi / 2));

  // sensor offset and heading
  const Vec2<double> c = predict_range_bearing(se2(1, 1, kPi / 2), Vec2<double>(1, 4), 1.0);
  CHECK(c(0) == doctest::Approx(2.0));
  CHECK(std::abs(c(1)) <= 1e-15);

  CHECK(error_range_bearing(id, b, Vec2<double>(0, 2), 0.0).norm() <= 1e-15);
}

TEST_CASE("position error") {
  Rng rng(14);
  const auto x = random_element(GroupKind::se23(), rng, 1.0);
  const Vec3<double> r = x.mat().block<3, 1>(0, 4);
  CHECK(error_position(x, r).norm() == 0.0);
  CHECK((error_position(x, Vec3<double>(r + Vec3<double>(1, 2, 3))) - Vec3<double>(1, 2, 3)).norm() <= 1e-14);
}

TEST_CASE("bearing wrap") {
  const auto id = Element<double>::identity(GroupKind::se2());
  const Vec2<double> lm(-1.0, -1e-4);  // bearing just above -pi
  const Vec2<double> g = predict_range_bearing(id, lm, 0.0);
  const Vec2<double> y(g(0), kPi - 1e-4);
  const VecX<double> e = error_range_bearing(id, y, lm, 0.0);
  CHECK(e(1) > -kPi);
  CHECK(e(1) <= kPi);
  CHECK(std::abs(e(1) - (kPi - 1e-4 - g(1) - 2 * kPi)) <= 1e-12);

  // the wrap does not touch the derivative
  const auto at = se2(0.3, -0.2, 0.1);
  auto f = [&](const Vec2<double>& yy) {
    return make_group_function(2, [=]<Scalar S>(const Element<S>& x) { return error_range_bearing(x, yy, lm, 0.0); });
  };
  const auto j1 = jacobian_right(*f(y), at).matrix;
  const auto j2 = jacobian_right(*f(Vec2<double>(y(0), y(1) - 2 * kPi)), at).matrix;
  CHECK((j1 - j2).norm() <= 1e-15);
  CHECK(j1.norm() > 0.1);
}

TEST_CASE("error stack layout") {
  BatchProblem p;
  p.process.kind = ProcessKind::ImuSE23;
  p.times = {0.0, 0.04};
  p.prior_covariance = MatX<double>::Identity(9, 9);
  p.inputs = {VecX<double>::Zero(6)};
  p.process_covariances = {MatX<double>::Identity(9, 9)};
  p.measurements.push_back({1, MeasurementKind::Position3D, Vec3<double>::Zero(), MatX<double>::Identity(3, 3), -1});
  const auto stack = build_error_stack(p);
  CHECK(stack->output_dim() == 9 + 9 + 3);
  CHECK(stack->row_offset(2) == 18);

  const auto w = build_weight(p);
  CHECK(w.rows() == 21);
  CHECK((w.dense() - MatX<double>::Identity(21, 21)).norm() == 0.0);

  SUBCASE("measurements are ordered by state") {
    auto e = small_euroc(4, 3);
    std::reverse(e.problem.measurements.begin(), e.problem.measurements.end());
    const auto order = ordered_measurements(e.problem);
    for (std::size_t i = 1; i < order.size(); ++i) CHECK(order[i - 1]->state <= order[i]->state);
  }
}

TEST_CASE("weights") {
  auto e = small_euroc(3, 4);
  e.problem.measurements[1].covariance = (MatX<double>(3, 3) << 0.02, 0.005, 0, 0.005, 0.01, 0.001, 0, 0.001, 0.03)
                                             .finished();
  const auto w = build_weight(e.problem);
  std::vector<MatX<double>> covs{e.problem.prior_covariance};
  for (const auto& q : e.problem.process_covariances) covs.push_back(q);
  for (const auto* m : ordered_measurements(e.problem)) covs.push_back(m->covariance);
  REQUIRE(static_cast<std::size_t>(w.block_count()) == covs.size());
  for (std::size_t i = 0; i < covs.size(); ++i) {
    const MatX<double> prod = w.block(static_cast<int>(i)) * covs[i];
    CHECK((prod - MatX<double>::Identity(prod.rows(), prod.cols())).cwiseAbs().maxCoeff() <= 1e-10);
  }

  e.problem.process_covariances[0](0, 0) = -1.0;
  try {
    build_weight(e.problem);
    FAIL("expected a validation error");
  } catch (const ValidationError& err) {
    CHECK(std::string(err.what()).find("block 1") != std::string::npos);
  }
}

TEST_CASE("analytic blocks") {
  const MatX<double> h = euroc_position_jacobian(Element<double>::identity(GroupKind::se23()));
  MatX<double> expect = MatX<double>::Zero(3, 9);
  expect.rightCols<3>() = Mat3<double>::Identity();
  CHECK((h - expect).norm() == 0.0);

  const auto e = small_euroc(6, 5);
  const auto x = composite_pack(e.states);
  const auto analytic = analytic_jacobian_euroc(e.problem, x).to_dense();
  const auto stack = build_error_stack(e.problem);
  const auto cs = jacobian_blocks(*stack, x, DiffMethod::ComplexStep, kDefaultComplexStep, Side::Right).to_dense();
  REQUIRE(cs.rows() == analytic.rows());

  CHECK((analytic.topLeftCorner<9, 9>() + MatX<double>::Identity(9, 9)).norm() == 0.0);
  const int process_rows = 9 * static_cast<int>(e.problem.times.size());
  const MatX<double> dp = rows_of(cs, 0, process_rows) - rows_of(analytic, 0, process_rows);
  CHECK(dp.cwiseAbs().maxCoeff() / analytic.cwiseAbs().maxCoeff() <= 1e-9);
  const int meas_rows = static_cast<int>(cs.rows()) - process_rows;
  const MatX<double> dm = rows_of(cs, process_rows, meas_rows) - rows_of(analytic, process_rows, meas_rows);
  CHECK(dm.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((cs - analytic).lpNorm<Eigen::Infinity>() / analytic.lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("Jacobian sparsity pattern") {
  const auto e = small_euroc(5, 6);
  const auto x = composite_pack(e.states);
  const auto stack = build_error_stack(e.problem);
  const MatX<double> j = jacobian_complex_step(*stack, x, Side::Right).matrix;

  MatX<double> mask = MatX<double>::Zero(j.rows(), j.cols());
  for (std::size_t t = 0; t < stack->terms().size(); ++t) {
    const auto& term = stack->terms()[t];
    for (int s : term.states) mask.block(stack->row_offset(t), 9 * s, term.dim, 9).setOnes();
  }
  const MatX<double> off = j.cwiseProduct(MatX<double>::Ones(j.rows(), j.cols()) - mask);
  CHECK(off.cwiseAbs().maxCoeff() <= 1e-12 * j.norm());
}

TEST_CASE("dead reckoning") {
  ProcessModel uni{ProcessKind::UnicycleSE2};
  const auto start = se2(1, 2, 0.3);
  const std::vector<double> times{0, 0.2, 0.4, 0.6};
  const auto zero = dead_reckon(start, std::vector<VecX<double>>(3, VecX<double>::Zero(2)), uni, times);
  for (const auto& s : zero) CHECK((s.mat() - start.mat()).norm() == 0.0);

  const auto e = small_euroc(8, 7);
  for (std::size_t k = 1; k < e.states.size(); ++k) {
    const double dt = e.problem.times[k] - e.problem.times[k - 1];
    CHECK(error_process(e.states[k], e.states[k - 1], e.problem.inputs[k - 1], e.problem.process, dt).norm() <=
          1e-12);
  }

  CHECK_THROWS_AS(dead_reckon(start, std::vector<VecX<double>>(2, VecX<double>::Zero(2)), uni, times),
                  DimensionError);
  CHECK_THROWS_AS(dead_reckon(start, std::vector<VecX<double>>(3, VecX<double>::Zero(2)), uni, {0, 0.2, 0.2, 0.4}),
                  ValidationError);
}

TEST_CASE("problem validation") {
  BatchProblem p;
  p.process.kind = ProcessKind::UnicycleSE2;
  p.times = {0.0, 0.2};
  p.prior = Element<double>::identity(GroupKind::se2());
  p.prior_covariance = MatX<double>::Identity(3, 3);
  p.inputs = {VecX<double>::Zero(2)};
  p.process_covariances = {MatX<double>::Identity(3, 3)};
  p.landmarks[1] = Vec2<double>(1, 0);
  p.measurements.push_back({1, MeasurementKind::RangeBearing, Vec2<double>(1, 0), MatX<double>::Identity(2, 2), 1});
  CHECK_NOTHROW(build_error_stack(p));

  p.measurements[0].landmark = 9;
  CHECK_THROWS_AS(build_error_stack(p), ValidationError);
  p.measurements[0].landmark = 1;
  p.times = {0.0, 0.0};
  CHECK_THROWS_AS(build_error_stack(p), ValidationError);
}

TEST_CASE("nearest state") {
  const std::vector<double> t{0.0, 0.04, 0.08, 0.12};
  CHECK(nearest_state(t, 0.0) == 0);
  CHECK(nearest_state(t, 0.05) == 1);
  CHECK(nearest_state(t, 0.06) == 1);  // tie goes to the earlier state
  CHECK(nearest_state(t, 0.07) == 2);
  CHECK(nearest_state(t, 0.13) == 3);
  CHECK(nearest_state(t, 0.2) == -1);
  CHECK(nearest_state(t, -0.03) == -1);
}
