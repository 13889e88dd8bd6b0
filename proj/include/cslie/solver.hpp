// Gauss-Newton for weighted least squares over group-valued states.

#pragma once

#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "cslie/cstep.hpp"

namespace cslie {

/// Symmetric positive-definite block-diagonal matrix.
class BlockDiagonal {
 public:
  BlockDiagonal() = default;
  explicit BlockDiagonal(std::vector<MatX<double>> blocks);

  static BlockDiagonal identity(int n);

  void push_back(MatX<double> block);

  int rows() const { return rows_; }
  std::size_t block_count() const { return blocks_.size(); }
  const MatX<double>& block(std::size_t i) const { return blocks_[i]; }
  int offset(std::size_t i) const { return offsets_[i]; }

  MatX<double> dense() const;
  VecX<double> apply(const VecX<double>& v) const;
  /// v^T W v
  double quadratic(const VecX<double>& v) const;

 private:
  std::vector<MatX<double>> blocks_;
  std::vector<int> offsets_;
  int rows_ = 0;
};

struct LeastSquaresProblem {
  std::shared_ptr<const GroupFunction> error;
  BlockDiagonal weight;
  Element<double> initial;
  Side side = Side::Right;
};

enum class JacobianBackend { ComplexStep, Central, Analytic };
enum class LinearSolver { Dense, SparseBlock };

std::string to_string(JacobianBackend b);
std::string to_string(LinearSolver s);

using DenseJacobianFn = std::function<MatX<double>(const Element<double>&)>;
using BlockJacobianFn = std::function<BlockJacobian(const Element<double>&)>;

struct SolveOptions {
  int max_iterations = 50;
  double step_tol = 1e-8;
  /// Relative to max(1, J).
  double cost_tol = 1e-10;
  double h = kDefaultComplexStep;
  /// Step of the central-difference backend.
  double fd_step = 1e-6;
  JacobianBackend backend = JacobianBackend::ComplexStep;
  /// Analytic Jacobian callbacks; one of them is required for the Analytic backend.
  DenseJacobianFn analytic_dense;
  BlockJacobianFn analytic_blocks;
  LinearSolver linear_solver = LinearSolver::Dense;
  /// Per-state diagonal blocks of the inverse normal matrix at the returned state.
  bool compute_marginals = false;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;
  double step_norm = 0.0;
  long evaluations = 0;
};

/// Error vector and Jacobian at one state.
struct Linearization {
  VecX<double> error;
  double cost = 0.0;
  std::optional<BlockJacobian> blocks;
  MatX<double> dense;
  long evaluations = 0;
};

struct NormalEquations {
  bool sparse = false;
  MatX<double> dense_matrix;
  Eigen::SparseMatrix<double> sparse_matrix;
  VecX<double> rhs;
};

struct StepResult {
  VecX<double> delta;
  double cost = 0.0;
  long evaluations = 0;
  /// Smallest pivot of the factorization.
  double min_pivot = 0.0;
};

enum class Termination { StepTolerance, CostTolerance, MaxIterations };
std::string to_string(Termination t);

struct SolveResult {
  Element<double> state;
  std::vector<IterationRecord> history;
  Termination termination = Termination::MaxIterations;
  /// Cost at the returned state.
  double final_cost = 0.0;
  long total_evaluations = 0;
  /// One block per composite state (a single block for a plain element).
  std::optional<std::vector<MatX<double>>> marginal_covariances;

  bool converged() const { return termination != Termination::MaxIterations; }
};

/// 0.5 e^T W e.
double cost(const LeastSquaresProblem& problem, const Element<double>& x);

Linearization linearize(const LeastSquaresProblem& problem, const Element<double>& x,
                        const SolveOptions& options);

NormalEquations assemble_dense_normal(const LeastSquaresProblem& problem, const Linearization& lin);
/// Requires a stacked error whose terms align one-to-one with the weight blocks.
NormalEquations assemble_sparse_normal(const LeastSquaresProblem& problem,
                                       const BlockJacobian& jac, const VecX<double>& error);

StepResult gauss_newton_step(const LeastSquaresProblem& problem, const Element<double>& x,
                             const SolveOptions& options);

Element<double> apply_update(const Element<double>& x, const VecX<double>& delta, Side side);

SolveResult solve(const LeastSquaresProblem& problem, const SolveOptions& options = {});

/// Largest |i - j| over nonzero state blocks (i, j) of a normal matrix.
int block_bandwidth(const Eigen::SparseMatrix<double>& h, const GroupKind& kind);

void write_convergence_csv(std::ostream& os, const std::vector<IterationRecord>& history);

}  // namespace cslie
