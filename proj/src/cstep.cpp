#include "cslie/cstep.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace cslie {

std::string to_string(DiffMethod m) {
  switch (m) {
    case DiffMethod::ComplexStep:
      return "complex-step";
    case DiffMethod::Central:
      return "central";
    case DiffMethod::Forward:
      return "forward";
  }
  return "?";
}

namespace {

void require_positive_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("step size must be positive and finite");
}

template <typename V>
void require_finite(const V& v, const char* what) {
  if (!all_finite(v)) throw NonFiniteError(std::string(what) + ": function returned a non-finite value");
}

void require_dim(long got, int expected) {
  if (got != expected) {
    throw DimensionError("function returned " + std::to_string(got) + " values, declared " +
                         std::to_string(expected));
  }
}

}  // namespace

double complex_step_scalar(const std::function<cd(cd)>& f, double x, double h) {
  require_positive_step(h);
  const cd y = f(cd(x, h));
  if (!all_finite(y)) throw NonFiniteError("complex_step_scalar: non-finite function value");
  return y.imag() / h;
}

JacobianResult jacobian_complex_step(const GroupFunction& f, const Element<double>& x, Side side,
                                     double h, ComplexStepOptions opts) {
  require_positive_step(h);
  const GroupKind& kind = x.kind();
  const int n = kind.dof();
  const int q = f.output_dim();
  const Element<cd> xc = x.cast<cd>();

  if (opts.verify_real_at_nominal) {
    const VecX<cd> y0 = f(xc);
    require_dim(y0.size(), q);
    if (imag_of(y0).cwiseAbs().maxCoeff() != 0.0) {
      throw ValidationError("function is not real-valued at the real nominal point");
    }
  }

  JacobianResult out;
  out.matrix.resize(q, n);
  out.side = side;
  out.method = DiffMethod::ComplexStep;
  out.step = h;
  for (int i = 0; i < n; ++i) {
    const auto xi = Tangent<cd>::basis(kind, i, cd(0.0, h));
    const VecX<cd> y = f(perturb(xc, xi, side));
    ++out.evaluations;
    require_dim(y.size(), q);
    require_finite(y, "complex-step Jacobian");
    out.matrix.col(i) = y.imag() / h;
  }
  return out;
}

JacobianResult jacobian_right(const GroupFunction& f, const Element<double>& x, double h,
                              ComplexStepOptions opts) {
  return jacobian_complex_step(f, x, Side::Right, h, opts);
}

JacobianResult jacobian_left(const GroupFunction& f, const Element<double>& x, double h,
                             ComplexStepOptions opts) {
  return jacobian_complex_step(f, x, Side::Left, h, opts);
}

JacobianResult jacobian_central(const GroupFunction& f, const Element<double>& x, double h,
                                Side side) {
  require_positive_step(h);
  const GroupKind& kind = x.kind();
  const int n = kind.dof();
  const int q = f.output_dim();
  JacobianResult out;
  out.matrix.resize(q, n);
  out.side = side;
  out.method = DiffMethod::Central;
  out.step = h;
  for (int i = 0; i < n; ++i) {
    const VecX<double> yp = f(perturb(x, Tangent<double>::basis(kind, i, h), side));
    const VecX<double> ym = f(perturb(x, Tangent<double>::basis(kind, i, -h), side));
    out.evaluations += 2;
    require_dim(yp.size(), q);
    require_dim(ym.size(), q);
    require_finite(yp, "central-difference Jacobian");
    require_finite(ym, "central-difference Jacobian");
    out.matrix.col(i) = (yp - ym) / (2.0 * h);
  }
  return out;
}

JacobianResult jacobian_forward(const GroupFunction& f, const Element<double>& x, double h,
                                Side side) {
  require_positive_step(h);
  const GroupKind& kind = x.kind();
  const int n = kind.dof();
  const int q = f.output_dim();
  JacobianResult out;
  out.matrix.resize(q, n);
  out.side = side;
  out.method = DiffMethod::Forward;
  out.step = h;
  const VecX<double> y0 = f(x);
  ++out.evaluations;
  require_dim(y0.size(), q);
  require_finite(y0, "forward-difference Jacobian");
  for (int i = 0; i < n; ++i) {
    const VecX<double> yp = f(perturb(x, Tangent<double>::basis(kind, i, h), side));
    ++out.evaluations;
    require_finite(yp, "forward-difference Jacobian");
    out.matrix.col(i) = (yp - y0) / h;
  }
  return out;
}

JacobianResult jacobian(const GroupFunction& f, const Element<double>& x, DiffMethod method,
                        double h, Side side) {
  switch (method) {
    case DiffMethod::ComplexStep:
      return jacobian_complex_step(f, x, side, h);
    case DiffMethod::Central:
      return jacobian_central(f, x, h, side);
    case DiffMethod::Forward:
      return jacobian_forward(f, x, h, side);
  }
  throw ValidationError("unknown differentiation method");
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

std::vector<SweepRow> SweepReport::rows_for(DiffMethod m) const {
  std::vector<SweepRow> out;
  for (const auto& r : rows) {
    if (r.method == m) out.push_back(r);
  }
  return out;
}

double SweepReport::min_error(DiffMethod m) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (r.method == m) best = std::min(best, r.rel_error);
  }
  return best;
}

void SweepReport::write_csv(std::ostream& os) const {
  os << "h,method,rel_error\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17e,%s,%.17e\n", r.h, to_string(r.method).c_str(),
                  r.rel_error);
    os << buf;
  }
}

std::vector<double> decade_steps(double h_max, double h_min) {
  if (!(h_max > 0.0) || !(h_min > 0.0) || h_min > h_max) {
    throw ValidationError("decade range needs 0 < h_min <= h_max");
  }
  const int hi = static_cast<int>(std::lround(std::log10(h_max)));
  const int lo = static_cast<int>(std::lround(std::log10(h_min)));
  std::vector<double> out;
  for (int e = hi; e >= lo; --e) out.push_back(std::pow(10.0, e));
  return out;
}

SweepReport step_sweep(const GroupFunction& f, const Element<double>& x, Side side,
                       const MatX<double>& reference, const std::string& reference_label,
                       std::vector<double> h_list) {
  if (h_list.empty()) throw ValidationError("step_sweep: empty step list");
  for (double h : h_list) require_positive_step(h);
  std::sort(h_list.begin(), h_list.end(), std::greater<>());
  h_list.erase(std::unique(h_list.begin(), h_list.end()), h_list.end());

  const double ref_norm = reference.norm();
  const double scale = ref_norm > 0.0 ? ref_norm : 1.0;
  SweepReport report;
  report.reference = reference_label;
  for (double h : h_list) {
    const auto cs = jacobian_complex_step(f, x, side, h);
    report.rows.push_back({h, DiffMethod::ComplexStep, (cs.matrix - reference).norm() / scale});
  }
  for (double h : h_list) {
    const auto cd = jacobian_central(f, x, h, side);
    report.rows.push_back({h, DiffMethod::Central, (cd.matrix - reference).norm() / scale});
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.h > b.h; });
  return report;
}

SweepReport step_sweep(const GroupFunction& f, const Element<double>& x, Side side,
                       std::vector<double> h_list) {
  const auto ref = jacobian_complex_step(f, x, side, kDefaultComplexStep);
  return step_sweep(f, x, side, ref.matrix, "complex-step(h=1e-20)", std::move(h_list));
}

// ---------------------------------------------------------------------------
// Stacked functions
// ---------------------------------------------------------------------------

StackedFunction::StackedFunction(GroupKind kind, std::vector<ErrorTerm> terms)
    : kind_(std::move(kind)), terms_(std::move(terms)) {
  offsets_.reserve(terms_.size());
  for (const auto& t : terms_) {
    if (t.dim < 0) throw DimensionError("error term with negative dimension");
    if (t.states.empty()) throw ValidationError("error term without state dependencies");
    for (int s : t.states) {
      if (s < 0 || s >= kind_.block_count()) {
        throw DimensionError("error term depends on state " + std::to_string(s) +
                             " outside the composite");
      }
    }
    if (!t.eval_real || !t.eval_complex) throw ValidationError("error term without evaluator");
    offsets_.push_back(rows_);
    rows_ += t.dim;
  }
}

namespace {

template <Scalar S>
std::vector<Element<S>> gather(const Element<S>& x, const std::vector<int>& states) {
  std::vector<Element<S>> out;
  out.reserve(states.size());
  for (int s : states) out.push_back(x.block(s));
  return out;
}

template <Scalar S>
VecX<S> eval_term(const ErrorTerm& t, std::span<const Element<S>> xs) {
  if constexpr (std::is_same_v<S, double>) {
    return t.eval_real(xs);
  } else {
    return t.eval_complex(xs);
  }
}

template <Scalar S>
VecX<S> eval_stacked(const StackedFunction& f, const Element<S>& x) {
  if (!(x.kind() == f.kind())) {
    throw DimensionError("stacked function expects " + f.kind().name() + ", got " +
                         x.kind().name());
  }
  VecX<S> out(f.output_dim());
  for (std::size_t i = 0; i < f.terms().size(); ++i) {
    const auto& t = f.terms()[i];
    const auto xs = gather(x, t.states);
    const VecX<S> e = eval_term<S>(t, xs);
    require_dim(e.size(), t.dim);
    out.segment(f.row_offset(i), t.dim) = e;
  }
  return out;
}

}  // namespace

VecX<double> StackedFunction::operator()(const Element<double>& x) const {
  return eval_stacked(*this, x);
}

VecX<cd> StackedFunction::operator()(const Element<cd>& x) const { return eval_stacked(*this, x); }

MatX<double> BlockJacobian::to_dense() const {
  MatX<double> out = MatX<double>::Zero(rows, cols);
  for (const auto& b : blocks) {
    out.block(b.row_offset, b.col_offset, b.value.rows(), b.value.cols()) += b.value;
  }
  return out;
}

BlockJacobian jacobian_blocks(const StackedFunction& f, const Element<double>& x,
                              DiffMethod method, double h, Side side) {
  require_positive_step(h);
  const GroupKind& kind = f.kind();
  if (!(x.kind() == kind)) throw DimensionError("jacobian_blocks: state kind mismatch");

  BlockJacobian out;
  out.rows = f.output_dim();
  out.cols = kind.dof();

  // nominal values are needed by the forward scheme only
  std::vector<VecX<double>> nominal;
  if (method == DiffMethod::Forward) {
    for (const auto& t : f.terms()) nominal.push_back(t.eval_real(gather(x, t.states)));
    ++out.evaluations;
  }

  for (std::size_t ti = 0; ti < f.terms().size(); ++ti) {
    const auto& t = f.terms()[ti];
    const auto xr = gather(x, t.states);
    std::vector<Element<cd>> xc;
    if (method == DiffMethod::ComplexStep) {
      for (const auto& e : xr) xc.push_back(e.cast<cd>());
    }
    for (std::size_t p = 0; p < t.states.size(); ++p) {
      const int s = t.states[p];
      // a state listed twice in one term contributes through both slots
      const GroupKind& sk = kind.block(s);
      JacobianBlock blk{static_cast<int>(ti), f.row_offset(ti), s, kind.dof_offset(s),
                        MatX<double>(t.dim, sk.dof())};
      for (int i = 0; i < sk.dof(); ++i) {
        switch (method) {
          case DiffMethod::ComplexStep: {
            auto xs = xc;
            for (std::size_t r = 0; r < t.states.size(); ++r) {
              if (t.states[r] == s) {
                xs[r] = perturb(xc[r], Tangent<cd>::basis(sk, i, cd(0.0, h)), side);
              }
            }
            const VecX<cd> y = t.eval_complex(xs);
            require_dim(y.size(), t.dim);
            require_finite(y, "complex-step Jacobian");
            blk.value.col(i) = y.imag() / h;
            break;
          }
          case DiffMethod::Central:
          case DiffMethod::Forward: {
            auto xp = xr;
            auto xm = xr;
            for (std::size_t r = 0; r < t.states.size(); ++r) {
              if (t.states[r] == s) {
                xp[r] = perturb(xr[r], Tangent<double>::basis(sk, i, h), side);
                xm[r] = perturb(xr[r], Tangent<double>::basis(sk, i, -h), side);
              }
            }
            const VecX<double> yp = t.eval_real(xp);
            require_finite(yp, "finite-difference Jacobian");
            if (method == DiffMethod::Central) {
              const VecX<double> ym = t.eval_real(xm);
              require_finite(ym, "finite-difference Jacobian");
              blk.value.col(i) = (yp - ym) / (2.0 * h);
            } else {
              blk.value.col(i) = (yp - nominal[ti]) / h;
            }
            break;
          }
        }
      }
      // duplicated state slots: the first slot already saw every perturbation
      bool seen = false;
      for (std::size_t r = 0; r < p; ++r) seen = seen || t.states[r] == s;
      if (!seen) out.blocks.push_back(std::move(blk));
    }
  }

  // one stacked-function evaluation (two for central) per tangent direction
  const long per_column = method == DiffMethod::Central ? 2 : 1;
  out.evaluations += per_column * kind.dof();
  return out;
}

}  // namespace cslie
