#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cslie/cstep.hpp"
#include "cslie/problems.hpp"
#include "cslie/random.hpp"
#include "oracles.hpp"

using namespace cslie;

namespace {

problems::BilinearPose unit_bilinear() {
  problems::BilinearPose p;
  p.v << 1, 0, 0, 0;
  p.y << 0, 0, 0, 1;
  return p;
}

// A smooth nonlinear function of any element.
struct Squish {
  int q;
  template <Scalar S>
  VecX<S> operator()(const Element<S>& x) const {
    const MatX<S> m = x.matrix();
    VecX<S> out(q);
    for (int i = 0; i < q; ++i) {
      const S a = m(i % m.rows(), (2 * i + 1) % m.cols());
      out(i) = std::sin(a) + a * m(0, 0);
    }
    return out;
  }
};

}  // namespace

TEST_CASE("complex_step_scalar examples") {
  const double d3 = complex_step_scalar([](cd x) { return x * x * x; }, 2.0);
  CHECK(std::abs(d3 - 12.0) <= 1e-14 * 12.0);
  CHECK(complex_step_scalar([](cd) { return cd(4.2, 0.0); }, 0.3) == 0.0);
  CHECK(complex_step_scalar([](cd x) { return std::sin(x); }, 0.7) ==
        doctest::Approx(std::cos(0.7)).epsilon(1e-15));
  // agrees with a real-arithmetic route
  const double fd = oracle::central_diff([](double x) { return std::exp(std::sin(x)); }, 0.4, 1e-5);
  CHECK(complex_step_scalar([](cd x) { return std::exp(std::sin(x)); }, 0.4) ==
        doctest::Approx(fd).epsilon(1e-9));
  CHECK_THROWS_AS(complex_step_scalar([](cd x) { return x; }, 1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(complex_step_scalar([](cd x) { return std::log(x - x); }, 1.0), NonFiniteError);
}

TEST_CASE("jacobian_right examples") {
  const auto f = unit_bilinear().function();
  const auto t = Element<double>::identity(GroupKind::se3());
  const auto j = jacobian_right(*f, t);
  Eigen::RowVectorXd expected(6);
  expected << 0, 0, 0, 1, 0, 0;
  CHECK((j.matrix - expected).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(j.side == Side::Right);
  CHECK(j.evaluations == 6);
  CHECK(jacobian_left(*f, t).matrix == j.matrix);

  SUBCASE("constant function") {
    const auto c = make_group_function(2, []<Scalar S>(const Element<S>&) {
      VecX<S> out(2);
      out << S(1.0), S(-3.0);
      return out;
    });
    Rng rng(3);
    const auto x = random_element(GroupKind::se23(), rng);
    const auto jc = jacobian_right(*c, x);
    CHECK(jc.matrix.rows() == 2);
    CHECK(jc.matrix.cols() == 9);
    CHECK(jc.matrix.isZero(0.0));
  }

  SUBCASE("log error at its own base is the identity") {
    Rng rng(11);
    for (const auto& kind : {GroupKind::so3(), GroupKind::se2(), GroupKind::se3(),
                             GroupKind::se23()}) {
      const auto x0 = random_element(kind, rng);
      const Element<double> x0inv = inverse(x0);
      const auto g = make_group_function(kind.dof(), [x0inv]<Scalar S>(const Element<S>& x) {
        return log_map(Element<S>(x0inv.cast<S>() * x)).coords;
      });
      const auto jg = jacobian_right(*g, x0);
      CHECK((jg.matrix - MatX<double>::Identity(kind.dof(), kind.dof())).cwiseAbs().maxCoeff() <=
            1e-12);
    }
  }
}

TEST_CASE("jacobian_left reproduces the analytic problems") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = problems::BilinearPose::random(rng);
    const auto t = random_element(GroupKind::se3(), rng);
    const auto j = jacobian_left(*p.function(), t);
    CHECK(oracle::rel_error(j.matrix, p.left_jacobian(t)) <= 1e-14);
  }
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_element(GroupKind::se3(), rng);
    const auto small = random_tangent(GroupKind::se3(), rng, 1e-9);
    problems::PoseError e{t * exp_map(small)};
    const auto j = jacobian_left(*e.function(), t);
    CHECK((j.matrix - e.left_jacobian(t)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("left and right Jacobians are related by the adjoint") {
  Rng rng(77);
  for (const auto& kind : {GroupKind::so3(), GroupKind::se2(), GroupKind::se3(),
                           GroupKind::se23()}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = random_element(kind, rng);
      const auto f = make_group_function(4, [s = Squish{4}](const auto& e) { return s(e); });
      const auto jr = jacobian_right(*f, x).matrix;
      const auto jl = jacobian_left(*f, x).matrix;
      const MatX<double> mapped = jr * adjoint(inverse(x));
      CHECK((jl - mapped).norm() <= 1e-10 * std::max(1.0, jl.norm()));
    }
    const auto id = Element<double>::identity(kind);
    const auto f = make_group_function(3, [s = Squish{3}](const auto& e) { return s(e); });
    CHECK(jacobian_left(*f, id).matrix == jacobian_right(*f, id).matrix);
  }
}

TEST_CASE("complex step is insensitive to h") {
  Rng rng(5);
  const auto p = problems::BilinearPose::random(rng);
  const auto t = random_element(GroupKind::se3(), rng);
  const auto f = p.function();
  std::vector<MatX<double>> js;
  for (double h : {1e-12, 1e-16, 1e-20, 1e-30}) js.push_back(jacobian_right(*f, t, h).matrix);
  for (std::size_t a = 0; a < js.size(); ++a) {
    for (std::size_t b = a + 1; b < js.size(); ++b) CHECK(oracle::rel_error(js[a], js[b]) <= 1e-13);
  }
}

TEST_CASE("evaluation counts and purity") {
  Rng rng(9);
  const auto x = random_element(GroupKind::se23(), rng);
  const auto f = make_group_function(2, [s = Squish{2}](const auto& e) { return s(e); });
  CHECK(jacobian_right(*f, x).evaluations == 9);
  CHECK(jacobian_central(*f, x, 1e-5, Side::Right).evaluations == 18);
  CHECK(jacobian_forward(*f, x, 1e-5, Side::Left).evaluations == 10);
  const auto a = jacobian_left(*f, x);
  const auto b = jacobian_left(*f, x);
  CHECK(a.matrix == b.matrix);
}

TEST_CASE("real-at-nominal check") {
  const auto bad = make_group_function(1, []<Scalar S>(const Element<S>&) {
    VecX<S> out(1);
    if constexpr (is_complex_v<S>) {
      out(0) = S(0.0, 1.0);
    } else {
      out(0) = 0.0;
    }
    return out;
  });
  const auto id = Element<double>::identity(GroupKind::se2());
  CHECK_THROWS_AS(jacobian_right(*bad, id, 1e-20, {.verify_real_at_nominal = true}), ValidationError);
  CHECK_NOTHROW(jacobian_right(*unit_bilinear().function(),
                               Element<double>::identity(GroupKind::se3()), 1e-20,
                               {.verify_real_at_nominal = true}));
}

TEST_CASE("finite differences") {
  Rng rng(31);
  SUBCASE("linear in the perturbation") {
    // exp on R^n is exactly linear
    const auto kind = GroupKind::rn(3);
    const auto x = random_element(kind, rng);
    const auto f = make_group_function(2, []<Scalar S>(const Element<S>& e) {
      const MatX<S>& m = e.mat();
      VecX<S> out(2);
      out << S(2.0) * m(0, 3) - m(1, 3), S(0.5) * m(2, 3);
      return out;
    });
    const auto jc = jacobian_central(*f, x, 1e-3, Side::Right).matrix;
    MatX<double> expected(2, 3);
    expected << 2, -1, 0, 0, 0, 0.5;
    CHECK((jc - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("error regimes on the bilinear problem") {
    const auto p = problems::BilinearPose::random(rng);
    const auto t = random_element(GroupKind::se3(), rng);
    const auto ref = p.left_jacobian(t);
    const double e5 = oracle::rel_error(jacobian_central(*p.function(), t, 1e-5, Side::Left).matrix, ref);
    const double e15 =
        oracle::rel_error(jacobian_central(*p.function(), t, 1e-15, Side::Left).matrix, ref);
    CHECK(e5 >= 1e-12);
    CHECK(e5 <= 1e-7);
    CHECK(e15 > 100.0 * e5);
    const double ef =
        oracle::rel_error(jacobian_forward(*p.function(), t, 1e-7, Side::Left).matrix, ref);
    CHECK(ef <= 1e-5);
  }
}

TEST_CASE("step sweep") {
  Rng rng(1);
  const auto p = problems::BilinearPose::random(rng);
  const auto t = random_element(GroupKind::se3(), rng);
  const auto steps = decade_steps(1e-1, 1e-20);
  REQUIRE(steps.size() == 20);
  const auto report = step_sweep(*p.function(), t, Side::Left, p.left_jacobian(t), "analytic", steps);
  REQUIRE(report.rows.size() == 40);

  const auto cs = report.rows_for(DiffMethod::ComplexStep);
  for (std::size_t i = 1; i < cs.size(); ++i) {
    CHECK(cs[i].h < cs[i - 1].h);
    CHECK((cs[i].rel_error <= cs[i - 1].rel_error || cs[i].rel_error <= 1e-15));
  }
  CHECK(cs.back().rel_error <= 1e-15);
  CHECK(report.min_error(DiffMethod::Central) > report.min_error(DiffMethod::ComplexStep));
  for (const auto& r : report.rows) CHECK(r.rel_error >= 0.0);

  std::ostringstream os;
  report.write_csv(os);
  const std::string csv = os.str();
  CHECK(csv.rfind("h,method,rel_error\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);

  const auto one = step_sweep(*p.function(), t, Side::Right, {1e-6});
  CHECK(one.rows.size() == 2);
  CHECK(one.reference == "complex-step(h=1e-20)");

  // duplicates and unsorted input
  const auto messy = step_sweep(*p.function(), t, Side::Right, {1e-3, 1e-1, 1e-3});
  CHECK(messy.rows_for(DiffMethod::Central).size() == 2);
  CHECK_THROWS_AS(step_sweep(*p.function(), t, Side::Right, {}), ValidationError);
  CHECK_THROWS_AS(step_sweep(*p.function(), t, Side::Right, {-1.0}), ValidationError);
}

TEST_CASE("stacked functions match the dense engine") {
  Rng rng(8);
  const int k = 5;
  const auto kind = GroupKind::composite(GroupKind::se23(), k);
  std::vector<Element<double>> xs;
  for (int i = 0; i < k; ++i) xs.push_back(random_element(GroupKind::se23(), rng, 0.5));
  const auto x = composite_pack(xs);

  std::vector<ErrorTerm> terms;
  const Element<double> anchor = random_element(GroupKind::se23(), rng);
  terms.push_back(make_term({0}, 9, [anchor]<Scalar S>(std::span<const Element<S>> b) {
    return log_map(Element<S>(inverse(b[0]) * anchor.cast<S>())).coords;
  }));
  for (int i = 1; i < k; ++i) {
    terms.push_back(make_term({i - 1, i}, 9, []<Scalar S>(std::span<const Element<S>> b) {
      return log_map(Element<S>(inverse(b[1]) * b[0])).coords;
    }));
  }
  terms.push_back(make_term({2}, 3, []<Scalar S>(std::span<const Element<S>> b) {
    return VecX<S>(b[0].mat().col(4).head(3));
  }));
  const StackedFunction f(kind, terms);
  CHECK(f.output_dim() == 9 * k + 3);
  CHECK(f.row_offset(2) == 18);

  for (auto side : {Side::Right, Side::Left}) {
    const auto dense = jacobian_complex_step(f, x, side);
    const auto blocks = jacobian_blocks(f, x, DiffMethod::ComplexStep, kDefaultComplexStep, side);
    CHECK(blocks.evaluations == dense.evaluations);
    CHECK((blocks.to_dense() - dense.matrix).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(blocks.blocks.size() == 1 + 2 * (k - 1) + 1);

    const auto dc = jacobian_central(f, x, 1e-6, side);
    const auto bc = jacobian_blocks(f, x, DiffMethod::Central, 1e-6, side);
    CHECK(bc.evaluations == 2 * kind.dof());
    CHECK((bc.to_dense() - dc.matrix).cwiseAbs().maxCoeff() <= 1e-8);
  }

  CHECK_THROWS_AS(StackedFunction(kind, {make_term({k}, 1, []<Scalar S>(std::span<const Element<S>>) {
                                     return VecX<S>(1);
                                   })}),
                  DimensionError);
}
