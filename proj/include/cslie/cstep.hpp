// Complex-step Jacobians of functions of matrix Lie group elements.
//
// For a function f of a group element X, column i of the right Jacobian at
// a real point Xb is
//
//     Im{ f(Xb * exp((j h e_i)^)) } / h
//
// and the left Jacobian perturbs on the other side. Finite-difference
// comparators with the same perturbation parameterization are provided for
// step-size studies.

#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cslie/groups.hpp"

namespace cslie {

/// Default complex step.
inline constexpr double kDefaultComplexStep = 1e-20;

/// A vector-valued function of a group element that can be evaluated at real
/// and at complex elements. Implementations must be pure and safe to call
/// concurrently, and must return a real vector for a real input.
class GroupFunction {
 public:
  virtual ~GroupFunction() = default;

  virtual int output_dim() const = 0;
  virtual VecX<double> operator()(const Element<double>& x) const = 0;
  virtual VecX<cd> operator()(const Element<cd>& x) const = 0;
};

namespace detail {

template <typename F>
class LambdaFunction final : public GroupFunction {
 public:
  LambdaFunction(int q, F f) : q_(q), f_(std::move(f)) {}
  int output_dim() const override { return q_; }
  VecX<double> operator()(const Element<double>& x) const override { return f_(x); }
  VecX<cd> operator()(const Element<cd>& x) const override { return f_(x); }

 private:
  int q_;
  F f_;
};

}  // namespace detail

/// Wrap a generic lambda `auto f(const Element<S>&) -> VecX<S>`.
template <typename F>
std::shared_ptr<GroupFunction> make_group_function(int output_dim, F f) {
  return std::make_shared<detail::LambdaFunction<F>>(output_dim, std::move(f));
}

enum class DiffMethod { ComplexStep, Central, Forward };

std::string to_string(DiffMethod m);

struct JacobianResult {
  MatX<double> matrix;
  Side side = Side::Right;
  DiffMethod method = DiffMethod::ComplexStep;
  double step = kDefaultComplexStep;
  /// Number of times the function was evaluated to build the matrix.
  long evaluations = 0;
};

struct ComplexStepOptions {
  /// Evaluate f once more at the unperturbed point (complex arithmetic) and
  /// reject f if its imaginary part is nonzero there. The extra call is not
  /// counted in JacobianResult::evaluations.
  bool verify_real_at_nominal = false;
};

/// Scalar complex-step derivative Im{f(x + jh)}/h.
double complex_step_scalar(const std::function<cd(cd)>& f, double x, double h = kDefaultComplexStep);

JacobianResult jacobian_right(const GroupFunction& f, const Element<double>& x,
                              double h = kDefaultComplexStep, ComplexStepOptions opts = {});
JacobianResult jacobian_left(const GroupFunction& f, const Element<double>& x,
                             double h = kDefaultComplexStep, ComplexStepOptions opts = {});
JacobianResult jacobian_complex_step(const GroupFunction& f, const Element<double>& x, Side side,
                                     double h = kDefaultComplexStep, ComplexStepOptions opts = {});

/// [f(X exp(h e_i)) - f(X exp(-h e_i))] / 2h, 2n evaluations.
JacobianResult jacobian_central(const GroupFunction& f, const Element<double>& x, double h,
                                Side side);
/// [f(X exp(h e_i)) - f(X)] / h, n + 1 evaluations.
JacobianResult jacobian_forward(const GroupFunction& f, const Element<double>& x, double h,
                                Side side);

JacobianResult jacobian(const GroupFunction& f, const Element<double>& x, DiffMethod method,
                        double h, Side side);

// ---------------------------------------------------------------------------
// Step-size sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  double h;
  DiffMethod method;
  double rel_error;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  /// "analytic" or "complex-step(h=1e-20)".
  std::string reference;

  std::vector<SweepRow> rows_for(DiffMethod m) const;
  /// Smallest error reached by a method.
  double min_error(DiffMethod m) const;
  void write_csv(std::ostream& os) const;
};

/// h_max, h_max/10, ..., down to h_min (inclusive, one per decade).
std::vector<double> decade_steps(double h_max, double h_min);

/// Relative 2-norm error of complex-step and central-difference Jacobians
/// against `reference`. h values are sorted into strictly decreasing order.
SweepReport step_sweep(const GroupFunction& f, const Element<double>& x, Side side,
                       const MatX<double>& reference, const std::string& reference_label,
                       std::vector<double> h_list);

/// As above, with a complex-step reference at h = 1e-20.
SweepReport step_sweep(const GroupFunction& f, const Element<double>& x, Side side,
                       std::vector<double> h_list);

// ---------------------------------------------------------------------------
// Stacked functions of composite states
// ---------------------------------------------------------------------------

/// One block of a stacked error vector. It reads only the composite blocks
/// listed in `states`, in that order.
struct ErrorTerm {
  std::vector<int> states;
  int dim = 0;
  std::function<VecX<double>(std::span<const Element<double>>)> eval_real;
  std::function<VecX<cd>(std::span<const Element<cd>>)> eval_complex;
};

/// Build a term from a generic lambda `auto f(std::span<const Element<S>>)`.
template <typename F>
ErrorTerm make_term(std::vector<int> states, int dim, F f) {
  ErrorTerm t;
  t.states = std::move(states);
  t.dim = dim;
  t.eval_real = [f](std::span<const Element<double>> x) -> VecX<double> { return f(x); };
  t.eval_complex = [f](std::span<const Element<cd>> x) -> VecX<cd> { return f(x); };
  return t;
}

/// The concatenation of error terms, viewed as one function of a composite
/// element. Jacobians can be formed term by term because each term only
/// depends on its declared states.
class StackedFunction final : public GroupFunction {
 public:
  StackedFunction(GroupKind kind, std::vector<ErrorTerm> terms);

  int output_dim() const override { return rows_; }
  VecX<double> operator()(const Element<double>& x) const override;
  VecX<cd> operator()(const Element<cd>& x) const override;

  const GroupKind& kind() const { return kind_; }
  const std::vector<ErrorTerm>& terms() const { return terms_; }
  int row_offset(std::size_t term) const { return offsets_[term]; }

 private:
  GroupKind kind_;
  std::vector<ErrorTerm> terms_;
  std::vector<int> offsets_;
  int rows_ = 0;
};

/// Dense block of a block-sparse Jacobian: rows of one term, columns of one
/// state.
struct JacobianBlock {
  int term;
  int row_offset;
  int state;
  int col_offset;
  MatX<double> value;
};

struct BlockJacobian {
  int rows = 0;
  int cols = 0;
  std::vector<JacobianBlock> blocks;
  long evaluations = 0;

  MatX<double> to_dense() const;
};

/// Term-by-term Jacobian of a stacked function. Each column still costs one
/// perturbed evaluation of the stacked function (two for central), but only
/// the terms that read the perturbed state are recomputed.
BlockJacobian jacobian_blocks(const StackedFunction& f, const Element<double>& x,
                              DiffMethod method, double h, Side side);

}  // namespace cslie
