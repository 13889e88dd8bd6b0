#include "cslie/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cstdio>
#include <limits>

namespace cslie {

namespace {

// pivots below this fraction of the largest diagonal entry count as singular
constexpr double kPivotRelTol = 1e-14;

void check_spd_block(const MatX<double>& b, std::size_t index) {
  if (b.rows() != b.cols() || b.rows() == 0) {
    throw DimensionError("weight block " + std::to_string(index) + " is not square");
  }
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ValidationError("weight block " + std::to_string(index) + " is not symmetric");
  }
  if (!all_finite(b)) throw ValidationError("weight block " + std::to_string(index) + " is not finite");
  Eigen::LLT<MatX<double>> llt(b);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("weight block " + std::to_string(index) + " is not positive definite");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// BlockDiagonal
// ---------------------------------------------------------------------------

BlockDiagonal::BlockDiagonal(std::vector<MatX<double>> blocks) {
  for (auto& b : blocks) push_back(std::move(b));
}

BlockDiagonal BlockDiagonal::identity(int n) {
  BlockDiagonal w;
  w.push_back(MatX<double>::Identity(n, n));
  return w;
}

void BlockDiagonal::push_back(MatX<double> block) {
  check_spd_block(block, blocks_.size());
  offsets_.push_back(rows_);
  rows_ += static_cast<int>(block.rows());
  blocks_.push_back(std::move(block));
}

MatX<double> BlockDiagonal::dense() const {
  MatX<double> out = MatX<double>::Zero(rows_, rows_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto n = blocks_[i].rows();
    out.block(offsets_[i], offsets_[i], n, n) = blocks_[i];
  }
  return out;
}

VecX<double> BlockDiagonal::apply(const VecX<double>& v) const {
  if (v.size() != rows_) throw DimensionError("weight/vector size mismatch");
  VecX<double> out(rows_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto n = blocks_[i].rows();
    out.segment(offsets_[i], n) = blocks_[i] * v.segment(offsets_[i], n);
  }
  return out;
}

double BlockDiagonal::quadratic(const VecX<double>& v) const { return v.dot(apply(v)); }

// ---------------------------------------------------------------------------
// Options and names
// ---------------------------------------------------------------------------

std::string to_string(JacobianBackend b) {
  switch (b) {
    case JacobianBackend::ComplexStep:
      return "complex-step";
    case JacobianBackend::Central:
      return "central";
    case JacobianBackend::Analytic:
      return "analytic";
  }
  return "?";
}

std::string to_string(LinearSolver s) {
  return s == LinearSolver::Dense ? "dense" : "sparse-block";
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::StepTolerance:
      return "step-tolerance";
    case Termination::CostTolerance:
      return "cost-tolerance";
    case Termination::MaxIterations:
      return "max-iterations";
  }
  return "?";
}

void SolveOptions::validate() const {
  if (max_iterations < 1) throw ValidationError("max_iterations must be at least 1");
  if (!(step_tol > 0.0)) throw ValidationError("step tolerance must be positive");
  if (!(cost_tol > 0.0)) throw ValidationError("cost tolerance must be positive");
  if (!(h > 0.0)) throw ValidationError("complex step must be positive");
  if (!(fd_step > 0.0)) throw ValidationError("finite-difference step must be positive");
  if (backend == JacobianBackend::Analytic && !analytic_dense && !analytic_blocks) {
    throw ValidationError("analytic backend needs a Jacobian callback");
  }
  if (backend == JacobianBackend::Analytic && linear_solver == LinearSolver::SparseBlock &&
      !analytic_blocks) {
    throw ValidationError("sparse solver with the analytic backend needs a block Jacobian");
  }
}

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

namespace {

void check_problem(const LeastSquaresProblem& p) {
  if (!p.error) throw ValidationError("least-squares problem without an error function");
  if (p.weight.rows() != p.error->output_dim()) {
    throw DimensionError("weight is " + std::to_string(p.weight.rows()) + " rows, error has " +
                         std::to_string(p.error->output_dim()));
  }
}

VecX<double> evaluate_error(const LeastSquaresProblem& p, const Element<double>& x) {
  VecX<double> e = (*p.error)(x);
  if (e.size() != p.error->output_dim()) throw DimensionError("error function output size");
  if (!all_finite(e)) throw NonFiniteError("error vector is not finite");
  return e;
}

}  // namespace

double cost(const LeastSquaresProblem& problem, const Element<double>& x) {
  check_problem(problem);
  const double j = 0.5 * problem.weight.quadratic(evaluate_error(problem, x));
  if (!std::isfinite(j)) throw NonFiniteError("cost is not finite");
  return j;
}

Linearization linearize(const LeastSquaresProblem& problem, const Element<double>& x,
                        const SolveOptions& options) {
  check_problem(problem);
  Linearization lin;
  lin.error = evaluate_error(problem, x);
  lin.cost = 0.5 * problem.weight.quadratic(lin.error);
  if (!std::isfinite(lin.cost)) throw NonFiniteError("cost is not finite");

  const auto* stacked = dynamic_cast<const StackedFunction*>(problem.error.get());
  const bool want_sparse = options.linear_solver == LinearSolver::SparseBlock;

  switch (options.backend) {
    case JacobianBackend::ComplexStep:
    case JacobianBackend::Central: {
      const DiffMethod method = options.backend == JacobianBackend::ComplexStep
                                    ? DiffMethod::ComplexStep
                                    : DiffMethod::Central;
      const double h = method == DiffMethod::ComplexStep ? options.h : options.fd_step;
      if (stacked) {
        lin.blocks = jacobian_blocks(*stacked, x, method, h, problem.side);
        lin.evaluations = lin.blocks->evaluations;
      } else {
        if (want_sparse) throw ValidationError("sparse solver needs a stacked error function");
        auto j = jacobian(*problem.error, x, method, h, problem.side);
        lin.dense = std::move(j.matrix);
        lin.evaluations = j.evaluations;
      }
      break;
    }
    case JacobianBackend::Analytic:
      if (options.analytic_blocks) {
        lin.blocks = options.analytic_blocks(x);
      } else if (options.analytic_dense) {
        if (want_sparse) throw ValidationError("sparse solver needs a block Jacobian");
        lin.dense = options.analytic_dense(x);
      } else {
        throw ValidationError("analytic backend needs a Jacobian callback");
      }
      break;
  }
  if (lin.blocks && !want_sparse) lin.dense = lin.blocks->to_dense();
  const int q = problem.error->output_dim();
  const int n = x.kind().dof();
  if (!want_sparse && (lin.dense.rows() != q || lin.dense.cols() != n)) {
    throw DimensionError("Jacobian has the wrong shape");
  }
  if (lin.blocks && (lin.blocks->rows != q || lin.blocks->cols != n)) {
    throw DimensionError("block Jacobian has the wrong shape");
  }
  return lin;
}

// ---------------------------------------------------------------------------
// Normal equations
// ---------------------------------------------------------------------------

NormalEquations assemble_dense_normal(const LeastSquaresProblem& problem,
                                      const Linearization& lin) {
  const auto& w = problem.weight;
  const MatX<double>& j = lin.dense;
  MatX<double> wj(j.rows(), j.cols());
  for (std::size_t i = 0; i < w.block_count(); ++i) {
    const auto n = w.block(i).rows();
    wj.middleRows(w.offset(i), n) = w.block(i) * j.middleRows(w.offset(i), n);
  }
  NormalEquations ne;
  ne.dense_matrix = j.transpose() * wj;
  ne.rhs = -(wj.transpose() * lin.error);
  return ne;
}

NormalEquations assemble_sparse_normal(const LeastSquaresProblem& problem,
                                       const BlockJacobian& jac, const VecX<double>& error) {
  const auto* stacked = dynamic_cast<const StackedFunction*>(problem.error.get());
  if (!stacked) throw ValidationError("sparse assembly needs a stacked error function");
  const auto& w = problem.weight;
  const auto& terms = stacked->terms();
  if (w.block_count() != terms.size()) {
    throw DimensionError("weight has " + std::to_string(w.block_count()) + " blocks for " +
                         std::to_string(terms.size()) + " error terms");
  }
  for (std::size_t t = 0; t < terms.size(); ++t) {
    if (w.offset(t) != stacked->row_offset(t) || w.block(t).rows() != terms[t].dim) {
      throw DimensionError("weight block " + std::to_string(t) + " does not match its error term");
    }
  }

  // group Jacobian blocks by term
  std::vector<std::vector<const JacobianBlock*>> by_term(terms.size());
  for (const auto& b : jac.blocks) {
    if (b.term < 0 || static_cast<std::size_t>(b.term) >= terms.size()) {
      throw DimensionError("Jacobian block refers to an unknown term");
    }
    by_term[b.term].push_back(&b);
  }

  const int n = jac.cols;
  NormalEquations ne;
  ne.sparse = true;
  ne.rhs = VecX<double>::Zero(n);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const MatX<double>& wt = w.block(t);
    const VecX<double> we = wt * error.segment(stacked->row_offset(t), terms[t].dim);
    for (const JacobianBlock* a : by_term[t]) {
      ne.rhs.segment(a->col_offset, a->value.cols()) -= a->value.transpose() * we;
      const MatX<double> aw = a->value.transpose() * wt;
      for (const JacobianBlock* b : by_term[t]) {
        const MatX<double> hab = aw * b->value;
        for (int r = 0; r < hab.rows(); ++r) {
          for (int c = 0; c < hab.cols(); ++c) {
            if (hab(r, c) != 0.0) trip.emplace_back(a->col_offset + r, b->col_offset + c, hab(r, c));
          }
        }
      }
    }
  }
  ne.sparse_matrix.resize(n, n);
  ne.sparse_matrix.setFromTriplets(trip.begin(), trip.end());
  return ne;
}

namespace {

struct Factored {
  VecX<double> delta;
  double min_pivot = 0.0;
  std::optional<std::vector<MatX<double>>> marginals;
};

// (offset, size) of each state block
std::vector<std::pair<int, int>> state_ranges(const GroupKind& kind) {
  std::vector<std::pair<int, int>> out;
  if (!kind.is_composite()) return {{0, kind.dof()}};
  for (int b = 0; b < kind.block_count(); ++b) out.emplace_back(kind.dof_offset(b), kind.block(b).dof());
  return out;
}

// In-place lower Cholesky with pivot reporting.
MatX<double> dense_cholesky(const MatX<double>& h, double& min_pivot) {
  const long n = h.rows();
  MatX<double> l = MatX<double>::Zero(n, n);
  const double scale = h.diagonal().cwiseAbs().maxCoeff();
  min_pivot = std::numeric_limits<double>::infinity();
  for (long j = 0; j < n; ++j) {
    const double d = h(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > kPivotRelTol * scale)) {
      throw SingularSystemError("normal matrix is not positive definite", static_cast<int>(j), d);
    }
    min_pivot = std::min(min_pivot, d);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    if (j + 1 < n) {
      l.col(j).tail(n - j - 1) =
          (h.col(j).tail(n - j - 1) - l.bottomLeftCorner(n - j - 1, j) * l.row(j).head(j).transpose()) /
          ljj;
    }
  }
  return l;
}

Factored factor_solve(const NormalEquations& ne, const GroupKind* marginals) {
  Factored out;
  if (!all_finite(ne.rhs)) throw NonFiniteError("gradient is not finite");
  if (!ne.sparse) {
    const MatX<double>& h = ne.dense_matrix;
    if (!all_finite(h)) throw NonFiniteError("normal matrix is not finite");
    const MatX<double> l = dense_cholesky(h, out.min_pivot);
    const auto tri = l.triangularView<Eigen::Lower>();
    out.delta = tri.transpose().solve(tri.solve(ne.rhs));
    if (marginals) {
      const MatX<double> linv = tri.solve(MatX<double>::Identity(h.rows(), h.cols()));
      std::vector<MatX<double>> blocks;
      for (auto [off, d] : state_ranges(*marginals)) {
        blocks.push_back(linv.middleCols(off, d).transpose() * linv.middleCols(off, d));
      }
      out.marginals = std::move(blocks);
    }
    return out;
  }

  const auto& h = ne.sparse_matrix;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(h);
  if (ldlt.info() != Eigen::Success) {
    throw SingularSystemError("sparse factorization failed", -1, 0.0);
  }
  const VecX<double> d = ldlt.vectorD();
  const double scale = h.diagonal().cwiseAbs().maxCoeff();
  Eigen::Index imin = 0;
  out.min_pivot = d.minCoeff(&imin);
  if (!(out.min_pivot > kPivotRelTol * scale)) {
    const int original = ldlt.permutationPinv().indices()(imin);
    throw SingularSystemError("normal matrix is not positive definite", original, out.min_pivot);
  }
  out.delta = ldlt.solve(ne.rhs);
  if (marginals) {
    const long n = h.rows();
    std::vector<MatX<double>> blocks;
    for (auto [off, d] : state_ranges(*marginals)) {
      MatX<double> rhs = MatX<double>::Zero(n, d);
      for (int k = 0; k < d; ++k) rhs(off + k, k) = 1.0;
      const MatX<double> sol = ldlt.solve(rhs);
      blocks.push_back(sol.middleRows(off, d));
    }
    out.marginals = std::move(blocks);
  }
  return out;
}

NormalEquations assemble(const LeastSquaresProblem& problem, const Linearization& lin,
                         const SolveOptions& options) {
  if (options.linear_solver == LinearSolver::SparseBlock) {
    return assemble_sparse_normal(problem, *lin.blocks, lin.error);
  }
  return assemble_dense_normal(problem, lin);
}

}  // namespace

StepResult gauss_newton_step(const LeastSquaresProblem& problem, const Element<double>& x,
                             const SolveOptions& options) {
  options.validate();
  const Linearization lin = linearize(problem, x, options);
  const Factored f = factor_solve(assemble(problem, lin, options), nullptr);
  StepResult r;
  r.delta = f.delta;
  r.cost = lin.cost;
  r.evaluations = lin.evaluations;
  r.min_pivot = f.min_pivot;
  return r;
}

Element<double> apply_update(const Element<double>& x, const VecX<double>& delta, Side side) {
  if (delta.size() != x.kind().dof()) {
    throw DimensionError("update has " + std::to_string(delta.size()) + " entries, state has " +
                         std::to_string(x.kind().dof()) + " degrees of freedom");
  }
  return perturb(x, Tangent<double>{x.kind(), delta}, side);
}

SolveResult solve(const LeastSquaresProblem& problem, const SolveOptions& options) {
  options.validate();
  check_problem(problem);
  SolveResult res{.state = problem.initial, .history = {}, .marginal_covariances = {}};
  Element<double> x = problem.initial;
  double prev_cost = 0.0;
  std::optional<std::vector<MatX<double>>> marginals;
  bool stopped = false;

  for (int it = 0; it < options.max_iterations; ++it) {
    const Linearization lin = linearize(problem, x, options);
    const Factored f = factor_solve(assemble(problem, lin, options),
                                    options.compute_marginals ? &x.kind() : nullptr);
    const double step = f.delta.norm();
    res.history.push_back({it, lin.cost, step, lin.evaluations});
    res.total_evaluations += lin.evaluations;

    if (step < options.step_tol) {
      res.termination = Termination::StepTolerance;
    } else if (it > 0 && std::abs(lin.cost - prev_cost) < options.cost_tol * std::max(1.0, lin.cost)) {
      res.termination = Termination::CostTolerance;
    }
    if (res.termination != Termination::MaxIterations) {
      marginals = f.marginals;
      res.final_cost = lin.cost;
      stopped = true;
      break;
    }
    x = apply_update(x, f.delta, problem.side);
    prev_cost = lin.cost;
  }

  if (!stopped) {
    res.final_cost = cost(problem, x);
    if (options.compute_marginals) {
      const Linearization lin = linearize(problem, x, options);
      marginals = factor_solve(assemble(problem, lin, options), &x.kind()).marginals;
    }
  }
  res.state = x;
  res.marginal_covariances = std::move(marginals);
  return res;
}

int block_bandwidth(const Eigen::SparseMatrix<double>& h, const GroupKind& kind) {
  std::vector<int> owner(kind.dof());
  for (int b = 0; b < kind.block_count(); ++b) {
    for (int i = 0; i < kind.block(b).dof(); ++i) owner[kind.dof_offset(b) + i] = b;
  }
  int bw = 0;
  for (int c = 0; c < h.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(h, c); it; ++it) {
      if (it.value() != 0.0) bw = std::max(bw, std::abs(owner[it.row()] - owner[it.col()]));
    }
  }
  return bw;
}

void write_convergence_csv(std::ostream& os, const std::vector<IterationRecord>& history) {
  os << "iter,cost,step_norm\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17e,%.17e\n", r.iteration, r.cost, r.step_norm);
    os << buf;
  }
}

}  // namespace cslie
