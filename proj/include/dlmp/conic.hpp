#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <iosfwd>
#include <string>
#include <vector>

namespace dlmp::conic {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::Index;
using Eigen::VectorXd;

/// Standard-form conic program
///
///     minimize    c'x
///     subject to  A x = b
///                 G x + s = h,   s in K
///
/// where K is the product of a nonnegative orthant of dimension
/// `num_linear` followed by second-order cones of sizes `soc_dims`
/// (each cone {s : s_0 >= ||s_{1:}||}). Rows of G are ordered accordingly.
struct ConicProgram {
  VectorXd c;
  SpMat A;
  VectorXd b;
  SpMat G;
  VectorXd h;
  Index num_linear = 0;
  std::vector<Index> soc_dims;

  Index num_vars() const { return c.size(); }
  Index num_eq() const { return A.rows(); }
  Index num_ineq() const { return G.rows(); }
  /// Throws std::invalid_argument on inconsistent dimensions.
  void check() const;
};

struct SolverSettings {
  double feastol = 1e-9;
  double abstol = 1e-10;
  double reltol = 1e-10;
  // A stalled run is still accepted when the last iterate meets these.
  double feastol_inaccurate = 1e-7;
  double abstol_inaccurate = 1e-8;
  double reltol_inaccurate = 1e-7;
  int max_iters = 150;
  int equil_iters = 3;
  int refine_iters = 3;
  double static_reg = 1e-8;
  double step_fraction = 0.99;
  bool verbose = false;
};

enum class SolverStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIterations, NumericalError };

std::string to_string(SolverStatus status);

/// Primal-dual point. `y` and `z` follow the Lagrangian
/// c'x + y'(Ax - b) + z'(Gx - h), so z >= 0 in K at optimum and the
/// sensitivity of the optimal value to b is -y (to h, -z).
struct ConicSolution {
  SolverStatus status = SolverStatus::NumericalError;
  VectorXd x, y, z, s;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  /// Optimal only to the reduced tolerances of SolverSettings.
  bool reduced_accuracy = false;
  /// Infeasibility certificate: (y, z) for primal infeasibility, x for dual
  /// infeasibility. Empty otherwise.
  VectorXd certificate;
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
/// Mehrotra predictor-corrector steps. Thread-safe across distinct programs.
ConicSolution solve(const ConicProgram& program, const SolverSettings& settings = {});

/// Writes the program in the Conic Benchmark Format (CBF, version 3).
void write_cbf(const ConicProgram& program, std::ostream& out);

}  // namespace dlmp::conic
