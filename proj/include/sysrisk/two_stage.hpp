#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sysrisk/adal.hpp"
#include "sysrisk/errors.hpp"
#include "sysrisk/risk_measure.hpp"
#include "sysrisk/second_stage.hpp"

namespace sysrisk {

/// Affine first-stage cost f(z) = linear' z + constant.
struct FirstStageCost {
  Eigen::VectorXd linear;  // empty means zero
  double constant = 0.0;

  double operator()(const Eigen::VectorXd& z) const;
};

struct TwoStageInstance {
  std::size_t numFirstStage = 0;
  std::size_t budget = 0;
  RiskSpec riskSpec;
  std::vector<SecondStageScenario> scenarios;
  FirstStageCost firstStageCost;
  double lowerBound = 0.0;  // L0, floor on every scenario value in the master

  std::size_t numScenarios() const { return scenarios.size(); }
  std::vector<double> probabilities() const;

  /// Throws InputError / ParameterError.
  void validate() const;
};

/// Binary vectors with at most `budget` ones, in lexicographic order.
std::vector<Eigen::VectorXd> feasible_configurations(std::size_t numFirstStage, std::size_t budget);

struct ObjectiveCut {
  double value = 0.0;
  Eigen::VectorXd subgradient;
  Eigen::VectorXd anchor;

  double at(const Eigen::VectorXd& z) const { return value + subgradient.dot(z - anchor); }
};

/// Risk cuts eta >= sum_s p_s mu_s q_s and per-scenario cuts q_s >= value + g'(z - anchor).
class CutPool {
 public:
  /// Starts with the all-ones risk cut.
  explicit CutPool(std::vector<double> probabilities);

  /// Throws ContractError unless mu >= 0 and sum_s p_s mu_s = 1 within 1e-10.
  void add_risk_cut(std::vector<double> mu);
  void add_objective_cut(std::size_t scenario, ObjectiveCut cut);

  const std::vector<double>& probabilities() const { return probs_; }
  const std::vector<std::vector<double>>& riskCuts() const { return risk_; }
  const std::vector<std::vector<ObjectiveCut>>& objectiveCuts() const { return objective_; }

 private:
  std::vector<double> probs_;
  std::vector<std::vector<double>> risk_;
  std::vector<std::vector<ObjectiveCut>> objective_;
};

struct MasterSolution {
  Eigen::VectorXd z;
  double eta = 0.0;
  Eigen::VectorXd q;
  double objective = 0.0;
};

/// Exact master by enumeration of the feasible z. For fixed z the cut LP has
/// the closed form q_s = max(L0, cuts of s), eta = max over risk cuts.
MasterSolution solve_master(const TwoStageInstance& instance, const CutPool& cuts);

enum class SolveMode { Centralized, Distributed };

std::string_view to_string(SolveMode mode);
SolveMode solve_mode_from_string(std::string_view text);

struct AdalRunRecord {
  std::size_t scenario = 0;
  Eigen::VectorXd z;
  int iterations = 0;
  double couplingResidual = 0.0;
  double consistencyResidual = 0.0;
  double value = 0.0;
};

/// Second-stage solves memoized by (scenario, z). Distributed mode runs ADAL,
/// warm-started from the last run on the same scenario, and throws
/// NotConvergedError when a run hits its iteration cap.
class SecondStageOracle {
 public:
  SecondStageOracle(const TwoStageInstance& instance, SolveMode mode, AdalConfig adal = {});

  const ScenarioSolution& solve(std::size_t scenario, const Eigen::VectorXd& z);

  /// Solves every scenario at z, scenarios in parallel.
  std::vector<const ScenarioSolution*> solve_all(const Eigen::VectorXd& z);

  SolveMode mode() const { return mode_; }
  std::size_t solves() const;
  std::vector<AdalRunRecord> adal_runs() const;

 private:
  using Key = std::pair<std::size_t, std::vector<int>>;
  const TwoStageInstance& instance_;
  SolveMode mode_;
  AdalConfig adal_;
  mutable std::mutex mutex_;
  std::map<Key, std::unique_ptr<ScenarioSolution>> cache_;
  std::vector<std::unique_ptr<AdalState>> warm_;
  std::vector<AdalRunRecord> runs_;
};

struct TwoStageIteration {
  int iteration = 0;
  double eta = 0.0;
  double rho = 0.0;
  Eigen::VectorXd z;
  std::vector<double> values;
};

struct TwoStageOptions {
  double epsMaster = 1e-6;
  int maxIterations = 200;
  SolveMode mode = SolveMode::Centralized;
  AdalConfig adal;
};

struct TwoStageResult {
  Eigen::VectorXd z;
  double riskValue = 0.0;  // f(z) + rho[Q(z)]
  std::vector<double> scenarioValues;
  std::vector<TwoStageIteration> trace;
  bool converged = false;
};

class TwoStageNotConverged : public NotConvergedError {
 public:
  TwoStageNotConverged(const std::string& what, std::vector<TwoStageIteration> trace)
      : NotConvergedError(what), trace_(std::move(trace)) {}
  const std::vector<TwoStageIteration>& trace() const { return trace_; }

 private:
  std::vector<TwoStageIteration> trace_;
};

/// Multicut decomposition. Stops once rho^t - eta^t <= epsMaster and returns
/// the incumbent with the smallest rho^t. `oracle` may be shared between calls
/// on the same instance; a private one is made when null.
TwoStageResult solve_two_stage(const TwoStageInstance& instance, const TwoStageOptions& options,
                               SecondStageOracle* oracle = nullptr);

struct EnumerationResult {
  Eigen::VectorXd z;
  double riskValue = 0.0;
  std::vector<Eigen::VectorXd> configurations;
  std::vector<double> values;  // f(z) + rho[Q(z)] per configuration
};

/// Evaluates every feasible z; ties go to the lexicographically first.
EnumerationResult enumerate_first_stage(const TwoStageInstance& instance, SecondStageOracle& oracle);

/// iteration,eta,rho,z,value_0,...,value_{S-1}
void write_trace_csv(const std::vector<TwoStageIteration>& trace, const std::string& path);

std::string format_z(const Eigen::VectorXd& z);

}  // namespace sysrisk
