#include "sysrisk/adal.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>

#include "sysrisk/errors.hpp"
#include "sysrisk/parallel.hpp"

namespace sysrisk {

namespace {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

Eigen::VectorXd coupling_product(const SecondStageScenario& sc, const std::vector<Eigen::VectorXd>& v) {
  Eigen::VectorXd ax = Eigen::VectorXd::Zero(sc.couplingRows());
  for (std::size_t i = 0; i < sc.numNodes(); ++i) ax += sc.coupling[i] * v[i];
  return ax;
}

double consistency_norm(const SecondStageScenario& sc, const std::vector<Eigen::VectorXd>& v) {
  double acc = 0.0;
  for (auto [i, j] : sc.consistency) {
    const double d = v[i](sc.nodes[i].consensus) - v[j](sc.nodes[j].consensus);
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Rows of the coupling block where node i has a nonzero entry.
std::vector<Eigen::Index> touched_rows(const RowSparse& a) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    if (a.outerIndexPtr()[r + 1] > a.outerIndexPtr()[r]) rows.push_back(r);
  return rows;
}

// The parts of node i's augmented Lagrangian that do not change between
// iterations, for a fixed penalty and first-stage decision.
struct NodeModel {
  std::vector<Eigen::Index> rows;
  Eigen::MatrixXd aRows;
  Eigen::MatrixXd hessian;
  std::vector<std::size_t> links;  // indices into scenario.links
  std::vector<std::size_t> pairs;  // consistency pairs touching the node
  // Bound form of the link rows, when every link row is a single-variable inequality.
  bool boxOnly = true;
  Eigen::VectorXd lower, upper;
  std::vector<int> lowerLink, upperLink;  // position in `links`, or -1
  QpProblem general;                      // used when !boxOnly; linear term filled per call
};

// Per-node solver memory carried between iterations of one run.
struct NodeCache {
  BoxQpCache box;
  Eigen::VectorXd last;
};

NodeModel build_model(std::size_t node, const SecondStageScenario& sc, double rho, const Eigen::VectorXd& z) {
  const NodeBlock& nb = sc.nodes[node];
  const Eigen::Index n = nb.size();
  NodeModel m;
  m.rows = touched_rows(sc.coupling[node]);
  m.aRows.resize(static_cast<Eigen::Index>(m.rows.size()), n);
  for (std::size_t k = 0; k < m.rows.size(); ++k)
    m.aRows.row(static_cast<Eigen::Index>(k)) = Eigen::RowVectorXd(sc.coupling[node].row(m.rows[k]));
  m.hessian = nb.quadratic.size() > 0 ? nb.quadratic : Eigen::MatrixXd::Zero(n, n);
  m.hessian += rho * m.aRows.transpose() * m.aRows;
  for (std::size_t e = 0; e < sc.consistency.size(); ++e) {
    const auto [i, j] = sc.consistency[e];
    if (i != node && j != node) continue;
    m.pairs.push_back(e);
    m.hessian(nb.consensus, nb.consensus) += rho;
  }
  m.hessian = (0.5 * (m.hessian + m.hessian.transpose())).eval();

  for (std::size_t r = 0; r < sc.links.size(); ++r)
    if (sc.links[r].node == node) m.links.push_back(r);

  m.lower = nb.lower;
  m.upper = nb.upper;
  m.lowerLink.assign(static_cast<std::size_t>(n), -1);
  m.upperLink.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < m.links.size(); ++k) {
    const auto& link = sc.links[m.links[k]];
    if (link.equality || link.w.size() != 1 || link.w.front().second == 0.0) {
      m.boxOnly = false;
      break;
    }
    const auto [v, coef] = link.w.front();
    const double bound = (link.h - (z.size() ? link.t.dot(z) : 0.0)) / coef;
    if (coef > 0.0 && bound < m.upper(v)) {
      m.upper(v) = bound;
      m.upperLink[static_cast<std::size_t>(v)] = static_cast<int>(k);
    } else if (coef < 0.0 && bound > m.lower(v)) {
      m.lower(v) = bound;
      m.lowerLink[static_cast<std::size_t>(v)] = static_cast<int>(k);
    }
  }
  if ((m.upper - m.lower).minCoeff() < -1e-12) m.boxOnly = false;

  if (!m.boxOnly) {
    QpProblem& p = m.general;
    p.quadratic = m.hessian;
    p.lower = nb.lower;
    Eigen::Index n_eq = 0, n_in = 0, n_up = 0;
    for (std::size_t r : m.links) (sc.links[r].equality ? n_eq : n_in)++;
    for (Eigen::Index v = 0; v < n; ++v) n_up += std::isfinite(nb.upper(v));
    p.eqA = Eigen::MatrixXd::Zero(n_eq, n);
    p.eqB = Eigen::VectorXd::Zero(n_eq);
    p.ineqA = Eigen::MatrixXd::Zero(n_in + n_up, n);
    p.ineqB = Eigen::VectorXd::Zero(n_in + n_up);
    Eigen::Index ie = 0, ii = 0;
    for (std::size_t r : m.links) {
      const auto& link = sc.links[r];
      const double rhs = link.h - (z.size() ? link.t.dot(z) : 0.0);
      if (link.equality) {
        for (auto [v, c] : link.w) p.eqA(ie, v) += c;
        p.eqB(ie++) = rhs;
      } else {
        for (auto [v, c] : link.w) p.ineqA(ii, v) += c;
        p.ineqB(ii++) = rhs;
      }
    }
    for (Eigen::Index v = 0; v < n; ++v)
      if (std::isfinite(nb.upper(v))) {
        p.ineqA(ii, v) = 1.0;
        p.ineqB(ii++) = nb.upper(v);
      }
  }
  return m;
}

LocalSolution solve_node(std::size_t node, const SecondStageScenario& sc, const AdalState& state,
                         const AdalConfig& cfg, const NodeModel& m, const Eigen::VectorXd& total_av,
                         NodeCache* cache) {
  const NodeBlock& nb = sc.nodes[node];
  const auto& a = sc.coupling[node];
  const double rho = cfg.penalty;

  // Residual of the touched rows with node i's own contribution removed.
  const Eigen::VectorXd others = total_av - a * state.nodes[node] - sc.couplingRhs;
  Eigen::VectorXd o_rows(static_cast<Eigen::Index>(m.rows.size()));
  for (std::size_t k = 0; k < m.rows.size(); ++k) o_rows(static_cast<Eigen::Index>(k)) = others(m.rows[k]);

  Eigen::VectorXd linear = nb.cost + a.transpose() * state.lambda + rho * m.aRows.transpose() * o_rows;
  double constant = nb.constant + 0.5 * rho * o_rows.squaredNorm();
  for (std::size_t e : m.pairs) {
    const auto [i, j] = sc.consistency[e];
    const std::size_t other = i == node ? j : i;
    const double mu = state.mu(static_cast<Eigen::Index>(e));
    const double xt = state.nodes[other](sc.nodes[other].consensus);
    linear(nb.consensus) += (i == node ? mu : -mu) - rho * xt;
    constant += 0.5 * rho * xt * xt;
  }

  LocalSolution out;
  out.linkDuals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.links.size()));
  out.subgradient = Eigen::VectorXd::Zero(sc.firstStageDimension());

  bool solved = false;
  if (m.boxOnly) {
    const Eigen::VectorXd& start = cache && cache->last.size() ? cache->last : state.nodes[node];
    const BoxQpResult box = solve_box_qp(m.hessian, linear, m.lower, m.upper, start, 200, cache ? &cache->box : nullptr);
    if (box.optimal) {
      solved = true;
      out.v = box.x;
      for (Eigen::Index v = 0; v < out.v.size(); ++v) {
        const double gv = box.gradient(v);
        const int up = m.upperLink[static_cast<std::size_t>(v)];
        const int lo = m.lowerLink[static_cast<std::size_t>(v)];
        if (up >= 0 && gv < 0.0 && out.v(v) >= m.upper(v))
          out.linkDuals(up) = -gv / sc.links[m.links[static_cast<std::size_t>(up)]].w.front().second;
        if (lo >= 0 && gv > 0.0 && out.v(v) <= m.lower(v))
          out.linkDuals(lo) = gv / -sc.links[m.links[static_cast<std::size_t>(lo)]].w.front().second;
      }
    }
  }
  if (!solved) {
    QpProblem p = m.boxOnly ? QpProblem{} : m.general;
    if (m.boxOnly) {
      // Active-set trouble: hand the same box problem to the interior point solver.
      const Eigen::Index n = nb.size();
      p.quadratic = m.hessian;
      p.lower = m.lower;
      Eigen::Index n_up = 0;
      for (Eigen::Index v = 0; v < n; ++v) n_up += std::isfinite(m.upper(v));
      p.eqA.resize(0, n);
      p.ineqA = Eigen::MatrixXd::Zero(n_up, n);
      p.ineqB.resize(n_up);
      Eigen::Index r = 0;
      for (Eigen::Index v = 0; v < n; ++v)
        if (std::isfinite(m.upper(v))) {
          p.ineqA(r, v) = 1.0;
          p.ineqB(r++) = m.upper(v);
        }
    }
    p.linear = linear;
    const QpSolution s = solve_qp(p);
    if (!s.optimal())
      throw SolverError("ADAL node " + std::to_string(node) + " subproblem failed: " +
                        std::string(to_string(s.status)));
    out.v = s.x;
    if (m.boxOnly) {
      Eigen::Index r = 0;
      for (Eigen::Index v = 0; v < out.v.size(); ++v) {
        if (!std::isfinite(m.upper(v))) continue;
        const int up = m.upperLink[static_cast<std::size_t>(v)];
        if (up >= 0) out.linkDuals(up) = s.ineqDuals(r) / sc.links[m.links[static_cast<std::size_t>(up)]].w.front().second;
        ++r;
      }
      for (Eigen::Index v = 0; v < out.v.size(); ++v) {
        const int lo = m.lowerLink[static_cast<std::size_t>(v)];
        if (lo >= 0) out.linkDuals(lo) = s.boundDuals(v) / -sc.links[m.links[static_cast<std::size_t>(lo)]].w.front().second;
      }
    } else {
      Eigen::Index ie = 0, ii = 0;
      for (std::size_t k = 0; k < m.links.size(); ++k)
        out.linkDuals(static_cast<Eigen::Index>(k)) =
            sc.links[m.links[k]].equality ? s.eqDuals(ie++) : s.ineqDuals(ii++);
    }
  }
  if (cache) cache->last = out.v;
  out.localObjective = 0.5 * out.v.dot(m.hessian * out.v) + linear.dot(out.v) + constant;
  for (std::size_t k = 0; k < m.links.size(); ++k)
    out.subgradient += out.linkDuals(static_cast<Eigen::Index>(k)) * sc.links[m.links[k]].t;
  return out;
}

void check_state(const SecondStageScenario& sc, const AdalState& state) {
  if (state.nodes.size() != sc.numNodes() || state.lambda.size() != sc.couplingRows() ||
      state.mu.size() != static_cast<Eigen::Index>(sc.consistency.size()))
    throw InputError("ADAL state does not match the scenario");
  for (std::size_t i = 0; i < sc.numNodes(); ++i)
    if (state.nodes[i].size() != sc.nodes[i].size()) throw InputError("ADAL state does not match the scenario");
}

std::vector<NodeModel> build_models(const SecondStageScenario& sc, double rho, const Eigen::VectorXd& z) {
  std::vector<NodeModel> models;
  for (std::size_t i = 0; i < sc.numNodes(); ++i) models.push_back(build_model(i, sc, rho, z));
  return models;
}

// Advances `state` in place.
void iterate(const SecondStageScenario& sc, AdalState& state, const AdalConfig& cfg,
                  const std::vector<NodeModel>& models, std::vector<NodeCache>& caches,
                  std::vector<LocalSolution>& local) {
  local.assign(sc.numNodes(), {});
  const Eigen::VectorXd total_av = coupling_product(sc, state.nodes);
  parallel_for(sc.numNodes(),
               [&](std::size_t i) { local[i] = solve_node(i, sc, state, cfg, models[i], total_av, &caches[i]); });

  AdalState& next = state;
  double step = 0.0;
  for (std::size_t i = 0; i < sc.numNodes(); ++i) {
    step += (local[i].v - state.nodes[i]).squaredNorm();
    next.nodes[i] += cfg.stepsize * (local[i].v - state.nodes[i]);
  }
  const Eigen::VectorXd residual = coupling_product(sc, next.nodes) - sc.couplingRhs;
  const double coupling = residual.norm();
  const double consistency = consistency_norm(sc, next.nodes);
  step = std::sqrt(step);

  if (coupling > cfg.residualTol || consistency > cfg.residualTol) {
    const double f = cfg.penalty * cfg.stepsize;
    next.lambda += f * residual;
    for (std::size_t e = 0; e < sc.consistency.size(); ++e) {
      const auto [i, j] = sc.consistency[e];
      next.mu(static_cast<Eigen::Index>(e)) +=
          f * (next.nodes[i](sc.nodes[i].consensus) - next.nodes[j](sc.nodes[j].consensus));
    }
  }
  double objective = 0.0;
  for (std::size_t i = 0; i < sc.numNodes(); ++i) objective += sc.nodes[i].objective(next.nodes[i]);
  ++next.iteration;
  next.couplingResidual.push_back(coupling);
  next.consistencyResidual.push_back(consistency);
  next.stepResidual.push_back(step);
  next.objective.push_back(objective);
}

}  // namespace

int coupling_degree(const SecondStageScenario& sc) {
  std::vector<int> count(static_cast<std::size_t>(sc.couplingRows()), 0);
  for (const auto& a : sc.coupling)
    for (Eigen::Index r : touched_rows(a)) ++count[static_cast<std::size_t>(r)];
  int q = sc.consistency.empty() ? 1 : 2;
  for (int c : count) q = std::max(q, c);
  return q;
}

AdalConfig AdalConfig::resolved(const SecondStageScenario& sc) const {
  const double q = coupling_degree(sc);
  AdalConfig c = *this;
  if (c.penalty == 0.0) c.penalty = 0.9 / q;
  if (c.stepsize == 0.0) c.stepsize = 1.0 / q;
  if (!(c.penalty > 0.0 && c.penalty < 1.0 / q))
    throw ParameterError("ADAL penalty must lie in (0, 1/q), q = " + std::to_string(static_cast<int>(q)));
  if (!(c.stepsize > 0.0 && c.stepsize <= 1.0)) throw ParameterError("ADAL stepsize must lie in (0, 1]");
  if (!(c.residualTol > 0.0)) throw ParameterError("residual tolerance must be positive");
  if (c.maxIter <= 0) throw ParameterError("maxIter must be positive");
  return c;
}

AdalState AdalState::zeros(const SecondStageScenario& sc) {
  AdalState s;
  for (const auto& nb : sc.nodes) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(nb.size());
    s.nodes.push_back(v.cwiseMax(nb.lower).cwiseMin(nb.upper));
  }
  s.lambda = Eigen::VectorXd::Zero(sc.couplingRows());
  s.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sc.consistency.size()));
  return s;
}

LocalSolution local_subproblem(std::size_t node, const SecondStageScenario& sc, const AdalState& state,
                               const AdalConfig& config, const Eigen::VectorXd& z) {
  if (node >= sc.numNodes()) throw InputError("node index out of range");
  check_state(sc, state);
  const NodeModel m = build_model(node, sc, config.penalty, z);
  return solve_node(node, sc, state, config, m, coupling_product(sc, state.nodes), nullptr);
}

AdalState adal_iterate(const SecondStageScenario& sc, const AdalState& state, const AdalConfig& config,
                       const Eigen::VectorXd& z) {
  check_state(sc, state);
  const AdalConfig cfg = config.resolved(sc);
  std::vector<LocalSolution> local;
  std::vector<NodeCache> caches(sc.numNodes());
  AdalState next = state;
  iterate(sc, next, cfg, build_models(sc, cfg.penalty, z), caches, local);
  return next;
}

AdalResult run_adal(const SecondStageScenario& sc, const AdalConfig& config, const Eigen::VectorXd& z,
                    const AdalState* warmStart) {
  sc.validate();
  const AdalConfig cfg = config.resolved(sc);
  AdalResult res;
  res.state = warmStart ? *warmStart : AdalState::zeros(sc);
  check_state(sc, res.state);
  res.state.iteration = 0;
  res.state.couplingResidual.clear();
  res.state.consistencyResidual.clear();
  res.state.stepResidual.clear();
  res.state.objective.clear();
  const auto models = build_models(sc, cfg.penalty, z);
  std::vector<NodeCache> caches(sc.numNodes());

  while (res.state.iteration < cfg.maxIter) {
    iterate(sc, res.state, cfg, models, caches, res.local);
    const double tol = cfg.residualTol;
    if (res.state.couplingResidual.back() <= tol && res.state.consistencyResidual.back() <= tol &&
        res.state.stepResidual.back() <= tol) {
      res.converged = true;
      break;
    }
  }

  auto& sol = res.solution;
  sol.iterations = res.state.iteration;
  sol.nodes = res.state.nodes;
  sol.couplingDuals = res.state.lambda;
  sol.subgradient = Eigen::VectorXd::Zero(sc.firstStageDimension());
  sol.linkDuals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sc.links.size()));
  std::vector<Eigen::Index> seen(sc.numNodes(), 0);
  double value = -res.state.lambda.dot(sc.couplingRhs);
  for (std::size_t i = 0; i < sc.numNodes(); ++i) {
    const auto& loc = res.local[i];
    value += loc.localObjective;
    res.perNodeValues.push_back(loc.localObjective);
    sol.subgradient += loc.subgradient;
  }
  for (std::size_t r = 0; r < sc.links.size(); ++r) {
    const std::size_t i = sc.links[r].node;
    sol.linkDuals(static_cast<Eigen::Index>(r)) = res.local[i].linkDuals(seen[i]++);
  }
  sol.value = value;
  return res;
}

void write_residual_trace(const AdalState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "iteration,coupling_residual,consistency_residual,step_residual,objective\n";
  out << std::setprecision(12);
  for (std::size_t l = 0; l < state.couplingResidual.size(); ++l)
    out << l + 1 << ',' << state.couplingResidual[l] << ',' << state.consistencyResidual[l] << ','
        << state.stepResidual[l] << ',' << state.objective[l] << '\n';
}

}  // namespace sysrisk
