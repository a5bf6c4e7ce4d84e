#pragma once

// Minimum-norm quadratic programs:
//
//     minimize ||delta||^2  subject to  G delta >= h,
//                                       lower <= delta + shift <= upper (optional)
//
// Box-free instances go through the least-distance-programming reduction to
// nonnegative least squares (Lawson & Hanson), which yields either the exact
// minimizer or a Farkas certificate. Boxed instances use ADMM with an
// active-set polish step.

#include <optional>
#include <string>

#include <Eigen/Core>

namespace cbpoison {

/// Per-coordinate bounds on delta + shift.
struct BoxBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd shift;
};

struct MinNormQP {
  Eigen::MatrixXd g_matrix;  // C x n
  Eigen::VectorXd h_vector;  // C
  std::optional<BoxBounds> box;

  Eigen::Index num_variables() const { return g_matrix.cols(); }
  Eigen::Index num_constraints() const { return g_matrix.rows(); }
  void validate() const;
};

enum class QPStatus { Optimal, Infeasible, IterLimit };

std::string to_string(QPStatus s);

struct QPTolerances {
  double feas = 1e-8;
  double kkt = 1e-7;
  int active_set_max_iter = 0;  // 0 selects 100 (n + C)
  int splitting_max_iter = 50000;
  // Boxed infeasibility: the best primal residual must improve by at least
  // stall_improvement within every stall_window iterations.
  int stall_window = 1000;
  double stall_improvement = 1e-12;
};

struct QPSolution {
  QPStatus status = QPStatus::IterLimit;
  Eigen::VectorXd delta;
  Eigen::VectorXd multipliers;      // mu >= 0, one per row of G
  Eigen::VectorXd box_multipliers;  // signed: positive at the lower bound, negative at the upper
  Eigen::VectorXd farkas;           // mu >= 0, G^T mu = 0, h^T mu = 1 (box-free Infeasible only)
  double objective = 0.0;
  double kkt_residual = 0.0;
  double feasibility_residual = 0.0;
  int iterations = 0;
};

/// Max violation of each KKT condition of the problem, using
/// 2 delta = G^T mu + nu as stationarity.
struct KktReport {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;
  double complementarity = 0.0;

  double max() const;
};

QPSolution solve_min_norm(const MinNormQP& qp, const QPTolerances& tol = {});

KktReport verify_kkt(const MinNormQP& qp, const QPSolution& solution);

struct NnlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
};

/// min ||A x - b|| subject to x >= 0 (Lawson-Hanson active set). The entering
/// column is always the one with the largest positive gradient, lowest index
/// on ties.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter);

}  // namespace cbpoison
