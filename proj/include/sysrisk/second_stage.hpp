#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sysrisk/qp_solver.hpp"

namespace sysrisk {

/// Local data of one subsystem: cost, box, and which entry is its copy of the
/// shared variable (the quantity all nodes must agree on), if any.
struct NodeBlock {
  Eigen::VectorXd cost;
  Eigen::MatrixXd quadratic;  // 0x0 means linear cost
  double constant = 0.0;
  Eigen::VectorXd lower;  // -inf allowed
  Eigen::VectorXd upper;  // +inf allowed
  Eigen::Index consensus = -1;

  Eigen::Index size() const { return cost.size(); }
  double objective(const Eigen::VectorXd& v) const;
};

/// Row linking a node to the first stage:  w' v_node + t' z  (<= or =)  h.
struct LinkRow {
  std::size_t node = 0;
  std::vector<std::pair<Eigen::Index, double>> w;
  Eigen::VectorXd t;
  double h = 0.0;
  bool equality = false;
};

/// One scenario of a monotropic second-stage program:
///   min sum_i f_i(v_i)
///   s.t. sum_i A_i v_i = b, shared copies equal across listed pairs,
///        link rows, lower <= v_i <= upper.
struct SecondStageScenario {
  double probability = 1.0;
  std::vector<NodeBlock> nodes;
  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> coupling;  // per node, rows x n_i
  Eigen::VectorXd couplingRhs;
  std::vector<std::pair<std::size_t, std::size_t>> consistency;  // ordered pairs (i, j)
  std::vector<LinkRow> links;

  std::size_t numNodes() const { return nodes.size(); }
  Eigen::Index couplingRows() const { return couplingRhs.size(); }
  Eigen::Index firstStageDimension() const;

  /// Throws InputError on inconsistent dimensions or nonpositive probability.
  void validate() const;
};

struct ScenarioSolution {
  double value = 0.0;
  Eigen::VectorXd subgradient;       // with respect to z
  std::vector<Eigen::VectorXd> nodes;
  Eigen::VectorXd linkDuals;         // sign convention of QpSolution
  Eigen::VectorXd couplingDuals;
  int iterations = 0;
};

/// The whole scenario as one QP at fixed z, variables stacked node by node.
QpProblem assemble_centralized(const SecondStageScenario& scenario, const Eigen::VectorXd& z);

/// Solves the scenario exactly; subgradient = sum_r dual_r t_r over link rows.
/// Throws SolverError when the QP is not solved to optimality.
ScenarioSolution solve_second_stage_centralized(const SecondStageScenario& scenario,
                                                const Eigen::VectorXd& z);

}  // namespace sysrisk
