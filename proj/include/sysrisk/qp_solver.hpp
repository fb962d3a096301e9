#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sysrisk {

/// min 0.5 x'Hx + c'x + constant
/// s.t. eqA x = eqB, ineqA x <= ineqB, x >= lower (entries may be -inf).
///
/// An empty `quadratic` (0x0) means H = 0; empty constraint blocks mean no rows.
struct QpProblem {
  Eigen::MatrixXd quadratic;
  Eigen::VectorXd linear;
  Eigen::MatrixXd eqA;
  Eigen::VectorXd eqB;
  Eigen::MatrixXd ineqA;
  Eigen::VectorXd ineqB;
  Eigen::VectorXd lower;
  double constant = 0.0;

  Eigen::Index variables() const { return linear.size(); }

  /// Dimension, symmetry (1e-10) and PSD (min eigenvalue >= -1e-8) checks.
  /// Throws InputError.
  void validate() const;

  /// Convenience: a problem with n variables, zero cost, no rows, x >= 0.
  static QpProblem nonnegative(Eigen::Index n);
};

enum class QpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string_view to_string(QpStatus status);

/// Multipliers follow the Lagrangian
///   L = f(x) + eqDuals'(eqA x - eqB) + ineqDuals'(ineqA x - ineqB) - boundDuals'(x - lower)
/// so that at an optimum Hx + c + eqA'eqDuals + ineqA'ineqDuals - boundDuals = 0 with
/// ineqDuals >= 0 and boundDuals >= 0. The derivative of the optimal value with respect
/// to ineqB_r is therefore -ineqDuals_r.
struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd eqDuals;
  Eigen::VectorXd ineqDuals;
  Eigen::VectorXd boundDuals;
  double objective = 0.0;
  QpStatus status = QpStatus::IterationLimit;
  int iterations = 0;

  bool optimal() const { return status == QpStatus::Optimal; }
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
  double dual_sign = 0.0;  // largest negative multiplier magnitude

  double max() const;
};

/// Primal-dual interior point method. The default iteration cap is 50 n
/// (at least 100).
QpSolution solve_qp(const QpProblem& problem, double tol = 1e-8, int max_iterations = 0);

/// As solve_qp, for problems whose quadratic term is zero. Throws ContractError otherwise.
QpSolution solve_lp(const QpProblem& problem, double tol = 1e-8, int max_iterations = 0);

/// min 0.5 x'Hx + g'x over lower <= x <= upper (either side may be infinite).
/// Primal active-set method started from `start` (projected onto the box);
/// suited to small problems solved repeatedly from nearby points.
struct BoxQpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd gradient;  // Hx + g at x
  bool optimal = false;
  int iterations = 0;
};

/// Factorization of the last free-variable block. Only valid for one H;
/// reset `valid` when H changes.
struct BoxQpCache {
  std::vector<Eigen::Index> free;
  Eigen::LDLT<Eigen::MatrixXd> factor;
  bool valid = false;
};

BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const Eigen::VectorXd& start, int max_iterations = 200,
                         BoxQpCache* cache = nullptr);

/// Residuals of the optimality conditions in the sign convention above.
KktResiduals kkt_residuals(const QpProblem& problem, const QpSolution& solution);

}  // namespace sysrisk
