#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "support/toys.hpp"
#include "sysrisk/adal.hpp"
#include "sysrisk/errors.hpp"
#include "sysrisk/wireless.hpp"

using namespace sysrisk;

namespace {

AdalConfig config(double penalty, double step) {
  AdalConfig c;
  c.penalty = penalty;
  c.stepsize = step;
  return c;
}

// y1 + y2 = 2 and y2 + y3 = 1 with costs 0.5 y^2: node 0 never sees row 1.
SecondStageScenario chain() {
  SecondStageScenario sc;
  sc.nodes = {toys::scalar_node(1, 0), toys::scalar_node(1, 0), toys::scalar_node(1, 0)};
  Eigen::MatrixXd a0(2, 1), a1(2, 1), a2(2, 1);
  a0 << 1, 0;
  a1 << 1, 1;
  a2 << 0, 1;
  sc.coupling = {toys::dense_to_sparse(a0), toys::dense_to_sparse(a1), toys::dense_to_sparse(a2)};
  sc.couplingRhs = Eigen::Vector2d(2, 1);
  return sc;
}

const Eigen::VectorXd kNoZ;

}  // namespace

TEST(LocalSubproblem, TwoNodeClosedForm) {
  const auto sc = toys::two_node_coupled();
  const double rho = 0.4;
  const auto out = local_subproblem(0, sc, AdalState::zeros(sc), config(rho, 0.5), kNoZ);
  // d/dy [0.5 y^2 + rho/2 (y + 0 - 2)^2] = 0.
  EXPECT_NEAR(out.v(0), 2.0 * rho / (1.0 + rho), 1e-9);
}

TEST(LocalSubproblem, UntouchedRowsAndNonNeighborsDoNotMatter) {
  const auto sc = chain();
  const auto cfg = config(0.3, 0.5);
  auto st = AdalState::zeros(sc);
  st.nodes[1](0) = 0.7;
  const double base = local_subproblem(0, sc, st, cfg, kNoZ).v(0);
  auto shifted = st;
  shifted.lambda(1) += 5.0;
  EXPECT_EQ(local_subproblem(0, sc, shifted, cfg, kNoZ).v(0), base);
  auto moved = st;
  moved.nodes[2](0) = -4.0;
  EXPECT_EQ(local_subproblem(0, sc, moved, cfg, kNoZ).v(0), base);
}

TEST(LocalSubproblem, FlatCostGoesToConsensus) {
  SecondStageScenario sc;
  for (int i = 0; i < 3; ++i) {
    auto nb = toys::scalar_node(0, 0, -10, 10);
    nb.consensus = 0;
    sc.nodes.push_back(nb);
    sc.coupling.push_back(toys::dense_to_sparse(Eigen::MatrixXd::Zero(0, 1)));
  }
  sc.couplingRhs = Eigen::VectorXd::Zero(0);
  sc.consistency = {{0, 1}, {1, 0}, {0, 2}, {2, 0}};
  auto st = AdalState::zeros(sc);
  st.nodes[1](0) = 2.5;
  st.nodes[2](0) = 2.5;
  EXPECT_NEAR(local_subproblem(0, sc, st, config(0.4, 0.5), kNoZ).v(0), 2.5, 1e-9);
}

TEST(AdalIterate, OptimalStateIsFixed) {
  const auto sc = toys::two_node_coupled();
  auto st = AdalState::zeros(sc);
  st.nodes = {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
  st.lambda(0) = -1.0;
  const auto next = adal_iterate(sc, st, config(0.4, 0.5), kNoZ);
  EXPECT_NEAR(next.nodes[0](0), 1.0, 1e-9);
  EXPECT_NEAR(next.nodes[1](0), 1.0, 1e-9);
  EXPECT_EQ(next.lambda(0), -1.0);
  EXPECT_EQ(next.iteration, 1);
  EXPECT_EQ(next.couplingResidual.size(), 1u);
}

TEST(AdalIterate, FirstIterateReducesResidual) {
  const auto sc = toys::two_node_coupled();
  const double rho = 0.4, tau = 0.5;
  const auto next = adal_iterate(sc, AdalState::zeros(sc), config(rho, tau), kNoZ);
  const double y = tau * 2.0 * rho / (1.0 + rho);
  EXPECT_NEAR(next.nodes[0](0), y, 1e-9);
  EXPECT_NEAR(next.couplingResidual.back(), std::abs(2.0 * y - 2.0), 1e-9);
  EXPECT_LT(next.couplingResidual.back(), 2.0);
  EXPECT_NEAR(next.lambda(0), rho * tau * (2.0 * y - 2.0), 1e-9);
}

TEST(AdalIterate, SingleNodeFullStep) {
  SecondStageScenario sc;
  sc.nodes = {toys::scalar_node(0, -1, 0, 3)};
  sc.coupling = {toys::dense_to_sparse(Eigen::MatrixXd::Zero(0, 1))};
  sc.couplingRhs = Eigen::VectorXd::Zero(0);
  const auto next = adal_iterate(sc, AdalState::zeros(sc), config(0.5, 1.0), kNoZ);
  EXPECT_NEAR(next.nodes[0](0), 3.0, 1e-9);
  const auto r = run_adal(sc, config(0.5, 1.0), kNoZ);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.solution.value, solve_second_stage_centralized(sc, kNoZ).value, 1e-9);
}

TEST(AdalConfig, PenaltyBound) {
  const auto sc = toys::two_node_coupled();
  EXPECT_EQ(coupling_degree(sc), 2);
  const auto d = AdalConfig{}.resolved(sc);
  EXPECT_NEAR(d.penalty, 0.45, 1e-15);
  EXPECT_NEAR(d.stepsize, 0.5, 1e-15);
  EXPECT_THROW(config(0.5, 0.5).resolved(sc), ParameterError);
  EXPECT_THROW(config(0.4, 1.5).resolved(sc), ParameterError);
  EXPECT_THROW(run_adal(sc, config(0.6, 0.5), kNoZ), ParameterError);
}

TEST(RunAdal, ConsensusMean) {
  const std::vector<double> a{1.0, 4.0, -2.5};
  const auto sc = toys::consensus(a);
  const auto r = run_adal(sc, {}, kNoZ);
  ASSERT_TRUE(r.converged);
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / 3.0;
  for (const auto& v : r.state.nodes) EXPECT_NEAR(v(0), mean, 1e-4);
  const double central = solve_second_stage_centralized(sc, kNoZ).value;
  EXPECT_NEAR(r.solution.value, central, 1e-4 * std::abs(central));
  EXPECT_LE(r.state.couplingResidual.back(), 1e-5);
  EXPECT_LE(r.state.consistencyResidual.back(), 1e-5);
  EXPECT_EQ(r.state.couplingResidual.size(), static_cast<std::size_t>(r.state.iteration));
}

TEST(RunAdal, TwoNodeMatchesCentralized) {
  const auto sc = toys::two_node_coupled();
  const auto r = run_adal(sc, {}, kNoZ);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.solution.value, 1.0, 1e-4);
  EXPECT_NEAR(r.state.lambda(0), -1.0, 1e-3);
}

TEST(RunAdal, IterationCapReportsNotConverged) {
  const auto sc = toys::two_node_coupled();
  AdalConfig c;
  c.maxIter = 3;
  const auto r = run_adal(sc, c, kNoZ);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.state.iteration, 3);
}

TEST(RunAdal, WirelessScenarioMatchesCentralized) {
  const auto inst = generate_instance(toys::tiny_config(6, 3));
  for (std::size_t s = 0; s < inst.scenarios.size(); ++s) {
    const auto a = assemble_second_stage(inst.scenarios[s], inst.config, 1.0);
    for (const Eigen::Vector4d z : {Eigen::Vector4d(1, 1, 0, 0), Eigen::Vector4d(0, 0, 1, 0)}) {
      const auto r = run_adal(a.program, {}, z);
      ASSERT_TRUE(r.converged) << "scenario " << s;
      const auto c = solve_second_stage_centralized(a.program, z);
      EXPECT_NEAR(r.solution.value, c.value, 1e-4 * std::abs(c.value)) << "scenario " << s;
    }
  }
}

TEST(ResidualTrace, Csv) {
  const auto r = run_adal(toys::two_node_coupled(), {}, kNoZ);
  const auto path = testing::TempDir() + "adal.csv";
  write_residual_trace(r.state, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,coupling_residual,consistency_residual,step_residual,objective");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, r.state.iteration);
}
