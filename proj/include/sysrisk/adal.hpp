#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sysrisk/second_stage.hpp"

namespace sysrisk {

/// Zero penalty or stepsize means the default for the scenario: 0.9/q and 1/q,
/// q being the largest number of nodes sharing one constraint row.
struct AdalConfig {
  double penalty = 0.0;
  double stepsize = 0.0;
  double residualTol = 1e-5;
  int maxIter = 1000000;

  /// Fills in defaults and checks penalty in (0, 1/q) and stepsize in (0, 1].
  AdalConfig resolved(const SecondStageScenario& scenario) const;
};

/// Largest number of nodes with a nonzero entry in one coupling row
/// (a consistency pair couples two).
int coupling_degree(const SecondStageScenario& scenario);

struct AdalState {
  std::vector<Eigen::VectorXd> nodes;
  Eigen::VectorXd lambda;  // coupling rows
  Eigen::VectorXd mu;      // one entry per ordered consistency pair
  int iteration = 0;
  std::vector<double> couplingResidual;
  std::vector<double> consistencyResidual;
  std::vector<double> stepResidual;
  std::vector<double> objective;

  /// Zero primal and dual variables shaped for the scenario.
  static AdalState zeros(const SecondStageScenario& scenario);
};

struct LocalSolution {
  Eigen::VectorXd v;
  Eigen::VectorXd linkDuals;  // duals of this node's link rows, in scenario order
  Eigen::VectorXd subgradient;
  double localObjective = 0.0;
};

/// Minimizes node i's augmented Lagrangian with the other nodes held at the
/// current state. `config` must be resolved.
LocalSolution local_subproblem(std::size_t node, const SecondStageScenario& scenario, const AdalState& state,
                               const AdalConfig& config, const Eigen::VectorXd& z);

/// One Jacobi sweep, relaxed primal update, then dual update if the residuals
/// exceed the tolerance.
AdalState adal_iterate(const SecondStageScenario& scenario, const AdalState& state, const AdalConfig& config,
                       const Eigen::VectorXd& z);

struct AdalResult {
  AdalState state;
  std::vector<LocalSolution> local;
  ScenarioSolution solution;
  std::vector<double> perNodeValues;
  bool converged = false;
};

/// Iterates until coupling, consistency and step residuals (Euclidean norms)
/// are all within residualTol. The value is the sum of local objectives less
/// lambda' b. A non-converged result carries the last state.
AdalResult run_adal(const SecondStageScenario& scenario, const AdalConfig& config, const Eigen::VectorXd& z,
                    const AdalState* warmStart = nullptr);

/// iteration,coupling_residual,consistency_residual,step_residual,objective
void write_residual_trace(const AdalState& state, const std::string& path);

}  // namespace sysrisk
