#pragma once

#include <iosfwd>

#include <string_view>

#include <Eigen/Core>

namespace mpp {

/// min x'Qx  s.t.  Ax = b,  Gx <= h.
struct QPProblem {
  Eigen::MatrixXd Qbar;
  Eigen::MatrixXd Abar;
  Eigen::VectorXd bbar;
  Eigen::MatrixXd Gbar;
  Eigen::VectorXd hbar;
  int n = 0;  // horizon steps, 0 when the problem is not a trajectory QP

  Eigen::Index num_variables() const { return Qbar.rows(); }
  void validate() const;
};

enum class QPStatus { Optimal, Infeasible, MaxIterations };
std::string_view to_string(QPStatus status);

struct QPSolution {
  Eigen::VectorXd xbar;
  double cost = 0.0;
  QPStatus status = QPStatus::MaxIterations;
  int iterations = 0;
  Eigen::VectorXd eq_multipliers;    // for the stationarity 2Qx + A'nu + G'mu = 0
  Eigen::VectorXd ineq_multipliers;  // mu >= 0
  double phase1_violation = -1.0;    // optimum of the elastic problem when it ran
};

struct QPSolverOptions {
  double tol = 1e-9;
  int max_iters = 50;
  double regularization = 1e-8;
  double infeasibility_tol = 1e-6;
};

/// Null-space parameterization x = x_p + Z y of {x : Ax = b} together with the
/// cost and inequality data mapped onto y. Depends on Q, A, b and G only, so
/// it can be shared by problems that differ only in h.
struct ReducedQP {
  Eigen::MatrixXd Z;       // N x (N - rank)
  Eigen::VectorXd x_p;     // particular solution
  Eigen::MatrixXd Q1;      // orthonormal basis of range(A')
  Eigen::MatrixXd R;       // triangular factor, A' Perm = Q1 R
  Eigen::VectorXi perm;    // column permutation indices
  Eigen::MatrixXd P;       // reduced Hessian of 1/2 y'Py + c'y
  Eigen::VectorXd c;
  Eigen::MatrixXd G;       // G Z
  Eigen::VectorXd Gx_p;    // G x_p
  Eigen::Index rank = 0;
};

/// Throws RankDeficient when A lacks full row rank.
ReducedQP reduce_qp(const QPProblem& problem, double regularization = 1e-8);

/// Primal-dual interior point with Mehrotra predictor-corrector. When the
/// iteration stalls or exhausts max_iters, an elastic phase-1 problem (minimum
/// total inequality violation subject to the equalities) decides between
/// Infeasible and MaxIterations. `reduced` may be supplied when it was built
/// from a problem with identical Q, A, b and G.
QPSolution solve_qp(const QPProblem& problem, const QPSolverOptions& options = {},
                    const ReducedQP* reduced = nullptr);

/// Minimum of sum(max(0, Gx - h)) over {Ax = b}, solved as an LP.
double phase1_violation(const QPProblem& problem, const QPSolverOptions& options = {},
                        const ReducedQP* reduced = nullptr);

/// Plain-text dump: dimensions followed by Q, A, b, G and h.
void write_qp(std::ostream& out, const QPProblem& qp);

}  // namespace mpp
