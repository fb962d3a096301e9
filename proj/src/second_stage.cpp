#include "sysrisk/second_stage.hpp"

#include <cmath>
#include <set>
#include <string>

#include "sysrisk/errors.hpp"

namespace sysrisk {

double NodeBlock::objective(const Eigen::VectorXd& v) const {
  double f = cost.dot(v) + constant;
  if (quadratic.size() > 0) f += 0.5 * v.dot(quadratic * v);
  return f;
}

Eigen::Index SecondStageScenario::firstStageDimension() const {
  return links.empty() ? 0 : links.front().t.size();
}

void SecondStageScenario::validate() const {
  if (!(probability > 0.0)) throw InputError("scenario probability must be positive");
  if (nodes.empty()) throw InputError("scenario has no nodes");
  if (coupling.size() != nodes.size()) throw InputError("one coupling block per node expected");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& nb = nodes[i];
    const Eigen::Index n = nb.size();
    if (nb.lower.size() != n || nb.upper.size() != n) throw InputError("node bounds have wrong length");
    if (nb.quadratic.size() > 0 && (nb.quadratic.rows() != n || nb.quadratic.cols() != n))
      throw InputError("node quadratic has wrong shape");
    if (nb.consensus >= n) throw InputError("consensus index out of range");
    if (coupling[i].rows() != couplingRows() || coupling[i].cols() != n)
      throw InputError("coupling block " + std::to_string(i) + " has wrong shape");
  }
  for (auto [i, j] : consistency) {
    if (i >= nodes.size() || j >= nodes.size() || i == j) throw InputError("bad consistency pair");
    if (nodes[i].consensus < 0 || nodes[j].consensus < 0)
      throw InputError("consistency pair between nodes without a shared copy");
  }
  const Eigen::Index k = firstStageDimension();
  for (const auto& link : links) {
    if (link.node >= nodes.size()) throw InputError("link row refers to unknown node");
    if (link.t.size() != k) throw InputError("link rows disagree on first-stage dimension");
    for (auto [v, coef] : link.w)
      if (v < 0 || v >= nodes[link.node].size() || !std::isfinite(coef))
        throw InputError("link row coefficient out of range");
  }
}

QpProblem assemble_centralized(const SecondStageScenario& sc, const Eigen::VectorXd& z) {
  sc.validate();
  if (z.size() != sc.firstStageDimension() && !sc.links.empty())
    throw InputError("first-stage vector has wrong dimension");
  std::vector<Eigen::Index> offset(sc.numNodes() + 1, 0);
  for (std::size_t i = 0; i < sc.numNodes(); ++i) offset[i + 1] = offset[i] + sc.nodes[i].size();
  const Eigen::Index n = offset.back();

  QpProblem p;
  p.linear.resize(n);
  p.lower.resize(n);
  bool quadratic = false;
  for (const auto& nb : sc.nodes) quadratic = quadratic || nb.quadratic.size() > 0;
  if (quadratic) p.quadratic = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < sc.numNodes(); ++i) {
    const auto& nb = sc.nodes[i];
    p.linear.segment(offset[i], nb.size()) = nb.cost;
    p.lower.segment(offset[i], nb.size()) = nb.lower;
    p.constant += nb.constant;
    if (nb.quadratic.size() > 0) p.quadratic.block(offset[i], offset[i], nb.size(), nb.size()) = nb.quadratic;
  }

  // Consistency: one row per unordered pair; the ordered duplicates add nothing.
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (auto [i, j] : sc.consistency) edges.insert({std::min(i, j), std::max(i, j)});
  Eigen::Index eq_links = 0, in_links = 0;
  for (const auto& link : sc.links) (link.equality ? eq_links : in_links)++;

  const Eigen::Index m = sc.couplingRows();
  const auto n_edges = static_cast<Eigen::Index>(edges.size());
  p.eqA = Eigen::MatrixXd::Zero(m + n_edges + eq_links, n);
  p.eqB = Eigen::VectorXd::Zero(m + n_edges + eq_links);
  for (std::size_t i = 0; i < sc.numNodes(); ++i)
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(sc.coupling[i], r); it; ++it)
        p.eqA(r, offset[i] + it.col()) += it.value();
  p.eqB.head(m) = sc.couplingRhs;
  Eigen::Index row = m;
  for (auto [i, j] : edges) {
    p.eqA(row, offset[i] + sc.nodes[i].consensus) = 1.0;
    p.eqA(row, offset[j] + sc.nodes[j].consensus) = -1.0;
    ++row;
  }

  Eigen::Index n_upper = 0;
  for (const auto& nb : sc.nodes)
    for (Eigen::Index v = 0; v < nb.size(); ++v) n_upper += std::isfinite(nb.upper(v));
  p.ineqA = Eigen::MatrixXd::Zero(in_links + n_upper, n);
  p.ineqB = Eigen::VectorXd::Zero(in_links + n_upper);
  Eigen::Index irow = 0;
  for (const auto& link : sc.links) {
    const double rhs = link.h - (z.size() ? link.t.dot(z) : 0.0);
    if (link.equality) {
      for (auto [v, coef] : link.w) p.eqA(row, offset[link.node] + v) += coef;
      p.eqB(row++) = rhs;
    } else {
      for (auto [v, coef] : link.w) p.ineqA(irow, offset[link.node] + v) += coef;
      p.ineqB(irow++) = rhs;
    }
  }
  for (std::size_t i = 0; i < sc.numNodes(); ++i)
    for (Eigen::Index v = 0; v < sc.nodes[i].size(); ++v)
      if (std::isfinite(sc.nodes[i].upper(v))) {
        p.ineqA(irow, offset[i] + v) = 1.0;
        p.ineqB(irow++) = sc.nodes[i].upper(v);
      }
  return p;
}

ScenarioSolution solve_second_stage_centralized(const SecondStageScenario& sc, const Eigen::VectorXd& z) {
  const QpProblem p = assemble_centralized(sc, z);
  const QpSolution s = solve_qp(p);
  if (!s.optimal())
    throw SolverError("second-stage problem not solved: " + std::string(to_string(s.status)));

  ScenarioSolution out;
  out.value = s.objective;
  out.iterations = s.iterations;
  Eigen::Index off = 0;
  for (const auto& nb : sc.nodes) {
    out.nodes.push_back(s.x.segment(off, nb.size()));
    off += nb.size();
  }
  out.couplingDuals = s.eqDuals.head(sc.couplingRows());
  out.linkDuals.resize(static_cast<Eigen::Index>(sc.links.size()));
  out.subgradient = Eigen::VectorXd::Zero(sc.firstStageDimension());

  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (auto [i, j] : sc.consistency) edges.insert({std::min(i, j), std::max(i, j)});
  Eigen::Index eq_row = sc.couplingRows() + static_cast<Eigen::Index>(edges.size());
  Eigen::Index in_row = 0;
  for (std::size_t r = 0; r < sc.links.size(); ++r) {
    const auto& link = sc.links[r];
    const double dual = link.equality ? s.eqDuals(eq_row++) : s.ineqDuals(in_row++);
    out.linkDuals(static_cast<Eigen::Index>(r)) = dual;
    out.subgradient += dual * link.t;
  }
  return out;
}

}  // namespace sysrisk
