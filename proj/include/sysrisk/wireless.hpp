#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sysrisk/risk_measure.hpp"
#include "sysrisk/second_stage.hpp"
#include "sysrisk/two_stage.hpp"

namespace sysrisk {

struct WirelessConfig {
  std::size_t numRobots = 20;
  std::size_t numScenarios = 100;
  std::size_t budget = 2;
  double mapLow = 0.0;
  double mapHigh = 1.5;
  double innerRadius = 0.3;
  double outerRadius = 0.6;
  Eigen::Vector2d sourceMean{0.375, 1.3125};
  Eigen::Matrix2d sourceCov = 0.5 * Eigen::Matrix2d::Identity();
  double infoScale = 1.0;
  double capacity = 0.5;
  double c1 = 0.8;
  double c2 = 0.2;
  Eigen::VectorXd robotWeights;  // empty means 1/J each
  std::optional<double> bigM;    // defaults to capacity
  std::vector<Eigen::Vector2d> candidates;
  std::optional<std::uint64_t> seed;
  std::size_t maxResamples = 1000;

  std::size_t numCandidates() const { return candidates.size(); }
  double effectiveBigM() const { return bigM.value_or(capacity); }
  Eigen::VectorXd weights() const;

  /// Throws ParameterError.
  void validate() const;

  /// 50 robots, 200 scenarios on (0,0)-(2,2) with the published candidate sites.
  static WirelessConfig paper_scale();
  /// 20 robots, 100 scenarios on a 1.5 x 1.5 map.
  static WirelessConfig desk_scale();
};

struct WirelessScenario {
  std::vector<Eigen::Vector2d> positions;
  Eigen::MatrixXd rate;  // J x (J + K0); column j < J is robot j, then candidates
  Eigen::VectorXd info;

  std::size_t numRobots() const { return positions.size(); }
};

/// 1 up to l, 0 beyond u, and 2t^3 - 3t^2 + 1 with t = (d-l)/(u-l) in between.
double rate(double distance, double inner, double outer);

double info_rate(const Eigen::Vector2d& position, const WirelessConfig& config);

/// Rate matrix and information vector for given robot positions.
WirelessScenario make_scenario(const std::vector<Eigen::Vector2d>& positions, const WirelessConfig& config);

/// Robots connected through positive-rate links, and some robot reaches a candidate.
bool check_connectivity(const WirelessScenario& scenario);

struct WirelessInstance {
  WirelessConfig config;
  std::uint64_t seed = 0;
  std::vector<WirelessScenario> scenarios;
  std::size_t resampled = 0;
};

/// Uniform robot positions per scenario, resampled while disconnected.
/// A config without a seed draws one from std::random_device.
WirelessInstance generate_instance(const WirelessConfig& config);

/// Position of each variable inside a node block.
struct NodeLayout {
  std::vector<std::size_t> robotTargets;      // j with R_ij > 0, j != i
  std::vector<std::size_t> candidateTargets;  // k with R_ik > 0

  Eigen::Index y() const { return 0; }
  Eigen::Index robotLink(std::size_t n) const { return 1 + static_cast<Eigen::Index>(n); }
  Eigen::Index candidateLink(std::size_t n) const {
    return 1 + static_cast<Eigen::Index>(robotTargets.size() + n);
  }
  Eigen::Index x() const { return 1 + static_cast<Eigen::Index>(robotTargets.size() + candidateTargets.size()); }
  Eigen::Index u() const { return x() + 1; }
  Eigen::Index size() const { return x() + 2; }
};

struct AssembledScenario {
  SecondStageScenario program;
  std::vector<NodeLayout> layout;
};

/// Coupling rows: flow conservation (J), capacity with slack (J), delivered
/// proportion (1). Consistency over robot neighbor pairs; T_ik <= M z_k links.
/// Throws ConnectivityError when check_connectivity fails.
AssembledScenario assemble_second_stage(const WirelessScenario& scenario, const WirelessConfig& config,
                                        double probability);

/// Flow-conservation block of node i over the full layout
/// (y_i, T_i1 .. T_i(J+K0), x_i, u_i): a J x (J+K0+3) matrix.
Eigen::MatrixXd flow_block_dense(const WirelessScenario& scenario, std::size_t node);

/// Per-robot losses c1 y_i + c2 (1 - x_i) of a solved scenario.
Eigen::VectorXd robot_losses(const AssembledScenario& assembled, const ScenarioSolution& solution,
                             const WirelessConfig& config);

/// Delivered proportion: the weighted mean of the node copies x_i.
double delivered_proportion(const AssembledScenario& assembled, const ScenarioSolution& solution,
                            const WirelessConfig& config);

/// A generated instance assembled for decomposition: scenario programs with
/// probability 1/S, zero first-stage cost, L0 = 0.
struct WirelessModel {
  WirelessConfig config;
  TwoStageInstance instance;
  std::vector<AssembledScenario> assembled;
};

WirelessModel build_model(const WirelessInstance& instance, const RiskSpec& risk);

/// Per-robot losses at z, one row per scenario (S x J).
Eigen::MatrixXd loss_matrix(const WirelessModel& model, SecondStageOracle& oracle, const Eigen::VectorXd& z);

/// Delivered proportion per scenario at z.
std::vector<double> delivered_proportions(const WirelessModel& model, SecondStageOracle& oracle,
                                          const Eigen::VectorXd& z);

}  // namespace sysrisk
