#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sysrisk/systemic.hpp"
#include "sysrisk/two_stage.hpp"
#include "sysrisk/wireless.hpp"

namespace sysrisk {

// Instance and config files.
nlohmann::ordered_json config_to_json(const WirelessConfig& config);
/// Missing fields keep the desk-scale defaults; "preset": "paper" starts from
/// the paper-scale config instead.
WirelessConfig config_from_json(const nlohmann::json& j);
WirelessConfig load_config(const std::string& path);

nlohmann::ordered_json instance_to_json(const WirelessInstance& instance);
WirelessInstance instance_from_json(const nlohmann::json& j);
WirelessInstance load_instance(const std::string& path);

struct SolutionFile {
  Eigen::VectorXd z;
  double riskValue = 0.0;
  std::string risk;
  std::string mode;
  std::vector<double> scenarioValues;
};

nlohmann::ordered_json solution_to_json(const SolutionFile& solution);
SolutionFile load_solution(const std::string& path);

// Commands. Each writes its files under `out` and a short summary to `log`.

/// Writes the instance JSON to `out`; the seed (given, from the config, or
/// drawn) is printed.
void cmd_generate(const std::string& configPath, const std::string& out, std::optional<std::uint64_t> seed,
                  std::ostream& log);

/// solution.json, trace.csv, manifest.json, and in distributed mode adal_runs.csv.
TwoStageResult cmd_solve(const std::string& instancePath, const std::string& risk, SolveMode mode,
                         const std::string& outDir, std::ostream& log);

struct AggregationRow {
  double alpha = 0.0;
  std::string method;  // aggregate-first or evaluate-first
  std::string measure;
  Eigen::VectorXd z;
  double risk = 0.0;
  double meanProportion = 0.0;
  std::vector<double> proportions;
};

/// Aggregate-first: AVaR_a of sum_i w_i q_i, solved by decomposition.
/// Evaluate-first: rho_0 over the profile (AVaR_a[q_1], ..., AVaR_a[q_J]) with
/// masses w, for rho_0 = mean-avar:0.5:a and msd:1:0.5, by enumeration of z.
std::vector<AggregationRow> compare_aggregation(const WirelessModel& model, const std::vector<double>& alphas,
                                                SecondStageOracle& oracle);

/// aggregation.csv, proportions.csv, manifest.json.
std::vector<AggregationRow> cmd_compare_aggregation(const std::string& instancePath,
                                                    const std::vector<double>& alphas, SolveMode mode,
                                                    const std::string& outDir, std::ostream& log);

struct MultivariateRow {
  double alpha = 0.0;
  double avar = 0.0;
  double vmavar = 0.0;
  double mavar = 0.0;
  bool degenerate = false;
};

/// Losses at z as the 2-vector (sum_i w_i y_i, sum_i w_i (1 - x_i)) per
/// scenario, weighted by (c1, c2).
DiscreteVectorDistribution loss_components(const WirelessModel& model, SecondStageOracle& oracle,
                                           const Eigen::VectorXd& z);

std::vector<MultivariateRow> compare_multivariate(const DiscreteVectorDistribution& losses,
                                                  const AggregationWeights& c, const std::vector<double>& alphas);

/// multivariate.csv and manifest.json. Without a solution file the decision
/// comes from a centralized AVaR solve at the smallest alpha.
std::vector<MultivariateRow> cmd_compare_multivariate(const std::string& instancePath,
                                                      const std::optional<std::string>& solutionPath,
                                                      const std::vector<double>& alphas, const std::string& outDir,
                                                      std::ostream& log);

/// Comma-separated list of levels in (0,1).
std::vector<double> parse_alpha_list(const std::string& text);

}  // namespace sysrisk
