#include "sysrisk/wireless.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <string>

#include "sysrisk/errors.hpp"

namespace sysrisk {

Eigen::VectorXd WirelessConfig::weights() const {
  if (robotWeights.size() == 0)
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(numRobots), 1.0 / static_cast<double>(numRobots));
  return robotWeights;
}

void WirelessConfig::validate() const {
  if (numRobots == 0) throw ParameterError("numRobots must be positive");
  if (numScenarios == 0) throw ParameterError("numScenarios must be positive");
  if (candidates.empty()) throw ParameterError("at least one candidate reporting point required");
  if (budget < 1 || budget >= numCandidates()) throw ParameterError("budget must satisfy 1 <= K < K0");
  if (!(mapLow < mapHigh)) throw ParameterError("empty map");
  if (!(innerRadius > 0.0 && innerRadius < outerRadius)) throw ParameterError("radii must satisfy 0 < l < u");
  if (std::abs(sourceCov(0, 1) - sourceCov(1, 0)) > 1e-12) throw ParameterError("source covariance not symmetric");
  if (!(sourceCov(0, 0) > 0.0 && sourceCov.determinant() > 0.0))
    throw ParameterError("source covariance must be positive definite");
  if (!(infoScale > 0.0)) throw ParameterError("infoScale must be positive");
  if (!(capacity > 0.0)) throw ParameterError("capacity must be positive");
  if (!(c1 > 0.0 && c2 > 0.0) || std::abs(c1 + c2 - 1.0) > 1e-9)
    throw ParameterError("loss weights must be positive and sum to 1");
  const Eigen::VectorXd w = weights();
  if (static_cast<std::size_t>(w.size()) != numRobots) throw ParameterError("robotWeights has wrong length");
  if ((w.array() <= 0.0).any() || std::abs(w.sum() - 1.0) > 1e-9)
    throw ParameterError("robot weights must be positive and sum to 1");
  if (!(effectiveBigM() > 0.0)) throw ParameterError("bigM must be positive");
}

WirelessConfig WirelessConfig::paper_scale() {
  WirelessConfig c;
  c.numRobots = 50;
  c.numScenarios = 200;
  c.mapLow = 0.0;
  c.mapHigh = 2.0;
  c.sourceMean = {0.5, 1.75};
  c.candidates = {{0.5, 0.3}, {1.5, 0.25}, {1.75, 0.5}, {1.0, 0.2}};
  return c;
}

WirelessConfig WirelessConfig::desk_scale() {
  WirelessConfig c = paper_scale();
  c.numRobots = 20;
  c.numScenarios = 100;
  c.mapHigh = 1.5;
  c.sourceMean *= 0.75;
  for (auto& p : c.candidates) p *= 0.75;
  return c;
}

double rate(double distance, double inner, double outer) {
  if (!(inner > 0.0 && inner < outer)) throw ParameterError("radii must satisfy 0 < l < u");
  if (distance <= inner) return 1.0;
  if (distance > outer) return 0.0;
  const double t = (distance - inner) / (outer - inner);
  return 2.0 * t * t * t - 3.0 * t * t + 1.0;
}

double info_rate(const Eigen::Vector2d& position, const WirelessConfig& config) {
  const double det = config.sourceCov.determinant();
  if (!(det > 0.0)) throw ParameterError("source covariance is singular");
  const Eigen::Vector2d d = position - config.sourceMean;
  const double quad = d.dot(config.sourceCov.inverse() * d);
  return config.infoScale / (2.0 * std::numbers::pi * std::sqrt(det)) * std::exp(-0.5 * quad);
}

WirelessScenario make_scenario(const std::vector<Eigen::Vector2d>& positions, const WirelessConfig& config) {
  const std::size_t j_count = positions.size();
  const std::size_t k_count = config.numCandidates();
  WirelessScenario sc;
  sc.positions = positions;
  sc.rate = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(j_count), static_cast<Eigen::Index>(j_count + k_count));
  sc.info.resize(static_cast<Eigen::Index>(j_count));
  for (std::size_t i = 0; i < j_count; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < j_count; ++j)
      sc.rate(ii, static_cast<Eigen::Index>(j)) =
          rate((positions[i] - positions[j]).norm(), config.innerRadius, config.outerRadius);
    for (std::size_t k = 0; k < k_count; ++k)
      sc.rate(ii, static_cast<Eigen::Index>(j_count + k)) =
          rate((positions[i] - config.candidates[k]).norm(), config.innerRadius, config.outerRadius);
    sc.info(ii) = info_rate(positions[i], config);
  }
  return sc;
}

bool check_connectivity(const WirelessScenario& sc) {
  const auto j_count = static_cast<Eigen::Index>(sc.numRobots());
  if (j_count == 0) return false;
  std::vector<char> seen(static_cast<std::size_t>(j_count), 0);
  std::queue<Eigen::Index> todo;
  todo.push(0);
  seen[0] = 1;
  Eigen::Index reached = 1;
  while (!todo.empty()) {
    const Eigen::Index i = todo.front();
    todo.pop();
    for (Eigen::Index j = 0; j < j_count; ++j)
      if (!seen[static_cast<std::size_t>(j)] && sc.rate(i, j) > 0.0) {
        seen[static_cast<std::size_t>(j)] = 1;
        ++reached;
        todo.push(j);
      }
  }
  if (reached != j_count) return false;
  return (sc.rate.rightCols(sc.rate.cols() - j_count).array() > 0.0).any();
}

WirelessInstance generate_instance(const WirelessConfig& config) {
  config.validate();
  WirelessInstance inst;
  inst.config = config;
  inst.seed = config.seed ? *config.seed : std::random_device{}();
  inst.config.seed = inst.seed;
  std::mt19937_64 rng(inst.seed);
  std::uniform_real_distribution<double> coord(config.mapLow, config.mapHigh);
  for (std::size_t s = 0; s < config.numScenarios; ++s) {
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > config.maxResamples)
        throw ConnectivityError("no connected configuration after " + std::to_string(config.maxResamples) +
                                " resamples");
      std::vector<Eigen::Vector2d> pos(config.numRobots);
      for (auto& p : pos) {
        const double x = coord(rng);
        const double y = coord(rng);
        p = {x, y};
      }
      auto sc = make_scenario(pos, config);
      if (check_connectivity(sc)) {
        inst.scenarios.push_back(std::move(sc));
        break;
      }
      ++inst.resampled;
    }
  }
  return inst;
}

AssembledScenario assemble_second_stage(const WirelessScenario& sc, const WirelessConfig& config,
                                        double probability) {
  if (!check_connectivity(sc)) throw ConnectivityError("scenario network is not connected");
  const std::size_t jn = sc.numRobots();
  const std::size_t kn = static_cast<std::size_t>(sc.rate.cols()) - jn;
  const auto J = static_cast<Eigen::Index>(jn);
  const Eigen::VectorXd w = config.weights();
  if (static_cast<std::size_t>(w.size()) != jn) throw InputError("robot weights do not match the scenario");
  const double big_m = config.effectiveBigM();

  AssembledScenario out;
  auto& prog = out.program;
  prog.probability = probability;
  const Eigen::Index rows = 2 * J + 1;
  prog.couplingRhs = Eigen::VectorXd::Zero(rows);
  prog.couplingRhs.head(J) = sc.info;
  prog.couplingRhs.segment(J, J).setConstant(config.capacity);

  // The copies x_i agree, so the delivered-proportion row carries x on one
  // robot that already reaches a candidate.
  std::size_t anchor = 0;
  while (anchor < jn && (sc.rate.row(static_cast<Eigen::Index>(anchor)).tail(static_cast<Eigen::Index>(kn)).array() <= 0.0).all())
    ++anchor;

  for (std::size_t i = 0; i < jn; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    NodeLayout lay;
    for (std::size_t j = 0; j < jn; ++j)
      if (j != i && sc.rate(ii, static_cast<Eigen::Index>(j)) > 0.0) lay.robotTargets.push_back(j);
    for (std::size_t k = 0; k < kn; ++k)
      if (sc.rate(ii, static_cast<Eigen::Index>(jn + k)) > 0.0) lay.candidateTargets.push_back(k);

    NodeBlock nb;
    const Eigen::Index n = lay.size();
    nb.cost = Eigen::VectorXd::Zero(n);
    nb.cost(lay.y()) = w(ii) * config.c1;
    nb.cost(lay.x()) = -w(ii) * config.c2;
    nb.constant = w(ii) * config.c2;
    nb.lower = Eigen::VectorXd::Zero(n);
    nb.upper = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    nb.upper(lay.x()) = 1.0;
    nb.consensus = lay.x();

    std::vector<Eigen::Triplet<double>> trips;
    trips.emplace_back(ii, lay.y(), 1.0);
    trips.emplace_back(J + ii, lay.u(), 1.0);
    for (std::size_t t = 0; t < lay.robotTargets.size(); ++t) {
      const auto j = static_cast<Eigen::Index>(lay.robotTargets[t]);
      const Eigen::Index col = lay.robotLink(t);
      trips.emplace_back(ii, col, 1.0);
      trips.emplace_back(j, col, -sc.rate(ii, j));
      trips.emplace_back(J + ii, col, 1.0);
      trips.emplace_back(J + j, col, 1.0);
    }
    for (std::size_t t = 0; t < lay.candidateTargets.size(); ++t) {
      const std::size_t k = lay.candidateTargets[t];
      const Eigen::Index col = lay.candidateLink(t);
      trips.emplace_back(ii, col, 1.0);
      trips.emplace_back(J + ii, col, 1.0);
      trips.emplace_back(2 * J, col, -sc.rate(ii, static_cast<Eigen::Index>(jn + k)));

      LinkRow link;
      link.node = i;
      link.w = {{col, 1.0}};
      link.t = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kn));
      link.t(static_cast<Eigen::Index>(k)) = -big_m;
      prog.links.push_back(std::move(link));
    }
    if (i == anchor) trips.emplace_back(2 * J, lay.x(), sc.info.sum());
    Eigen::SparseMatrix<double, Eigen::RowMajor> a(rows, n);
    a.setFromTriplets(trips.begin(), trips.end());
    a.makeCompressed();

    for (std::size_t j : lay.robotTargets) prog.consistency.emplace_back(i, j);
    prog.nodes.push_back(std::move(nb));
    prog.coupling.push_back(std::move(a));
    out.layout.push_back(std::move(lay));
  }
  return out;
}

Eigen::MatrixXd flow_block_dense(const WirelessScenario& sc, std::size_t node) {
  const auto J = static_cast<Eigen::Index>(sc.numRobots());
  const Eigen::Index targets = sc.rate.cols();
  const auto i = static_cast<Eigen::Index>(node);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(J, targets + 3);
  a(i, 0) = 1.0;
  for (Eigen::Index j = 0; j < targets; ++j) a(i, 1 + j) = 1.0;
  for (Eigen::Index j = 0; j < J; ++j) a(j, 1 + j) -= sc.rate(i, j);
  return a;
}

Eigen::VectorXd robot_losses(const AssembledScenario& assembled, const ScenarioSolution& solution,
                             const WirelessConfig& config) {
  const auto J = static_cast<Eigen::Index>(assembled.layout.size());
  Eigen::VectorXd q(J);
  for (Eigen::Index i = 0; i < J; ++i) {
    const auto& lay = assembled.layout[static_cast<std::size_t>(i)];
    const auto& v = solution.nodes[static_cast<std::size_t>(i)];
    q(i) = config.c1 * v(lay.y()) + config.c2 * (1.0 - v(lay.x()));
  }
  return q;
}

double delivered_proportion(const AssembledScenario& assembled, const ScenarioSolution& solution,
                            const WirelessConfig& config) {
  const Eigen::VectorXd w = config.weights();
  double x = 0.0;
  for (std::size_t i = 0; i < assembled.layout.size(); ++i)
    x += w(static_cast<Eigen::Index>(i)) * solution.nodes[i](assembled.layout[i].x());
  return x;
}

WirelessModel build_model(const WirelessInstance& instance, const RiskSpec& risk) {
  const WirelessConfig& cfg = instance.config;
  WirelessModel m;
  m.config = cfg;
  m.instance.numFirstStage = cfg.numCandidates();
  m.instance.budget = cfg.budget;
  m.instance.riskSpec = risk;
  m.instance.lowerBound = 0.0;
  const double p = 1.0 / static_cast<double>(instance.scenarios.size());
  for (const auto& sc : instance.scenarios) {
    m.assembled.push_back(assemble_second_stage(sc, cfg, p));
    m.instance.scenarios.push_back(m.assembled.back().program);
  }
  m.instance.validate();
  return m;
}

Eigen::MatrixXd loss_matrix(const WirelessModel& model, SecondStageOracle& oracle, const Eigen::VectorXd& z) {
  const auto sols = oracle.solve_all(z);
  const auto J = static_cast<Eigen::Index>(model.assembled.front().layout.size());
  Eigen::MatrixXd q(static_cast<Eigen::Index>(sols.size()), J);
  for (std::size_t s = 0; s < sols.size(); ++s)
    q.row(static_cast<Eigen::Index>(s)) = robot_losses(model.assembled[s], *sols[s], model.config).transpose();
  return q;
}

std::vector<double> delivered_proportions(const WirelessModel& model, SecondStageOracle& oracle,
                                          const Eigen::VectorXd& z) {
  const auto sols = oracle.solve_all(z);
  std::vector<double> out;
  for (std::size_t s = 0; s < sols.size(); ++s)
    out.push_back(delivered_proportion(model.assembled[s], *sols[s], model.config));
  return out;
}

}  // namespace sysrisk
