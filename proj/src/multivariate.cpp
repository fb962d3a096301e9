#include "sysrisk/multivariate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sysrisk/errors.hpp"

namespace sysrisk {

namespace {

// Beyond this many grid points the exhaustive search is refused.
constexpr double kMaxGridPoints = 5e6;

struct CandidateGrid {
  std::vector<std::vector<double>> axes;  // distinct sorted marginal values
  std::vector<std::size_t> strides;       // coordinate 0 most significant
  std::size_t size = 1;

  explicit CandidateGrid(const DiscreteVectorDistribution& x) {
    const auto& r = x.realizations();
    const std::size_t m = x.dimension();
    axes.resize(m);
    double total = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      auto& axis = axes[i];
      for (Eigen::Index s = 0; s < r.rows(); ++s) axis.push_back(r(s, static_cast<Eigen::Index>(i)));
      std::sort(axis.begin(), axis.end());
      axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
      total *= static_cast<double>(axis.size());
    }
    if (total > kMaxGridPoints)
      throw InputError("candidate grid too large for exhaustive search");
    strides.assign(m, 1);
    for (std::size_t i = m; i-- > 0;) {
      strides[i] = size;
      size *= axes[i].size();
    }
  }

  std::vector<std::size_t> digits(std::size_t index) const {
    std::vector<std::size_t> d(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) {
      d[i] = index / strides[i];
      index %= strides[i];
    }
    return d;
  }

  Eigen::VectorXd point(const std::vector<std::size_t>& d) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t i = 0; i < axes.size(); ++i) v(static_cast<Eigen::Index>(i)) = axes[i][d[i]];
    return v;
  }
};

// P(X <= v) for every grid point, indexed like CandidateGrid.
std::vector<double> grid_cdf(const DiscreteVectorDistribution& x, const CandidateGrid& grid) {
  const auto& r = x.realizations();
  const std::size_t m = x.dimension();
  // Position of each realization on each axis.
  std::vector<std::vector<std::size_t>> rank(x.scenarios(), std::vector<std::size_t>(m));
  for (std::size_t s = 0; s < x.scenarios(); ++s)
    for (std::size_t i = 0; i < m; ++i) {
      const auto& axis = grid.axes[i];
      const double value = r(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i));
      rank[s][i] = static_cast<std::size_t>(std::lower_bound(axis.begin(), axis.end(), value) -
                                            axis.begin());
    }
  std::vector<double> cdf(grid.size, 0.0);
  for (std::size_t g = 0; g < grid.size; ++g) {
    const auto d = grid.digits(g);
    double acc = 0.0;
    for (std::size_t s = 0; s < x.scenarios(); ++s) {
      bool below = true;
      for (std::size_t i = 0; i < m && below; ++i) below = rank[s][i] <= d[i];
      if (below) acc += x.probs()[s];
    }
    cdf[g] = acc;
  }
  return cdf;
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("probability level must lie in (0,1)");
}

bool reaches(double cdf, double level) { return cdf >= level - kProbabilityTolerance; }

PEfficientFrontier frontier_from_grid(const CandidateGrid& grid, const std::vector<double>& cdf,
                                      double level) {
  PEfficientFrontier frontier;
  frontier.level = level;
  for (std::size_t g = 0; g < grid.size; ++g) {
    if (!reaches(cdf[g], level)) continue;
    // Minimal iff lowering any single coordinate one grid step loses the level.
    const auto d = grid.digits(g);
    bool minimal = true;
    for (std::size_t i = 0; i < d.size() && minimal; ++i)
      if (d[i] > 0 && reaches(cdf[g - grid.strides[i]], level)) minimal = false;
    if (minimal) frontier.points.push_back(grid.point(d));
  }
  return frontier;
}

}  // namespace

double joint_cdf(const DiscreteVectorDistribution& x, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != x.dimension())
    throw InputError("point dimension does not match the random vector");
  const auto& r = x.realizations();
  double acc = 0.0;
  for (Eigen::Index s = 0; s < r.rows(); ++s)
    if ((r.row(s).transpose().array() <= v.array()).all()) acc += x.probs()[static_cast<std::size_t>(s)];
  return acc;
}

double candidate_grid_size(const DiscreteVectorDistribution& x) {
  double total = 1.0;
  for (std::size_t i = 0; i < x.dimension(); ++i) {
    auto v = x.component(i).values();
    std::sort(v.begin(), v.end());
    total *= static_cast<double>(std::unique(v.begin(), v.end()) - v.begin());
  }
  return total;
}

PEfficientFrontier p_efficient_points(const DiscreteVectorDistribution& x, double level) {
  check_level(level);
  const CandidateGrid grid(x);
  return frontier_from_grid(grid, grid_cdf(x, grid), level);
}

bool in_level_set(const PEfficientFrontier& frontier, const Eigen::VectorXd& point) {
  return std::any_of(frontier.points.begin(), frontier.points.end(),
                     [&](const Eigen::VectorXd& v) { return (point.array() >= v.array()).all(); });
}

double mavar(const DiscreteVectorDistribution& x, double level, const AggregationWeights& w) {
  if (w.dimension() != x.dimension()) throw InputError("weights dimension mismatch");
  const auto frontier = p_efficient_points(x, level);
  const auto& r = x.realizations();
  double mass = 0.0;
  double weighted = 0.0;
  for (Eigen::Index s = 0; s < r.rows(); ++s) {
    if (!in_level_set(frontier, r.row(s).transpose())) continue;
    const double p = x.probs()[static_cast<std::size_t>(s)];
    mass += p;
    weighted += p * r.row(s).dot(w.values());
  }
  if (mass <= 0.0)
    throw DegenerateEventError("conditioning event X in Z_p has zero probability");
  return weighted / mass;
}

VmavarResult vmavar_scalarized(const DiscreteVectorDistribution& x, double alpha,
                               const AggregationWeights& c) {
  check_level(alpha);
  if (c.dimension() != x.dimension()) throw InputError("weights dimension mismatch");
  const double level = 1.0 - alpha;
  const CandidateGrid grid(x);
  const auto cdf = grid_cdf(x, grid);
  const std::size_t m = x.dimension();

  // Separable objective: per-axis terms v_i + E[(X_i - v_i)_+] / alpha.
  std::vector<std::vector<double>> axis_terms(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto comp = x.component(i);
    for (double v : grid.axes[i]) {
      double excess = 0.0;
      for (std::size_t s = 0; s < comp.size(); ++s)
        excess += comp.probs()[s] * std::max(comp.values()[s] - v, 0.0);
      axis_terms[i].push_back(v + excess / alpha);
    }
  }
  auto objective = [&](const std::vector<std::size_t>& d) {
    double f = 0.0;
    for (std::size_t i = 0; i < m; ++i) f += c.values()(static_cast<Eigen::Index>(i)) * axis_terms[i][d[i]];
    return f;
  };
  auto better = [](double candidate, double incumbent) {
    if (!std::isfinite(incumbent)) return candidate < incumbent;
    return candidate < incumbent - 1e-13 * (1.0 + std::abs(incumbent));
  };

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  for (std::size_t g = 0; g < grid.size; ++g) {
    if (!reaches(cdf[g], level)) continue;
    const double f = objective(grid.digits(g));
    if (better(f, best)) {
      best = f;
      best_index = g;
    }
  }
  if (!std::isfinite(best)) throw InputError("no candidate satisfies the chance constraint");

  // The optimum is attained on the frontier; scanning it must agree.
  const auto frontier = frontier_from_grid(grid, cdf, level);
  double frontier_best = std::numeric_limits<double>::infinity();
  for (const auto& v : frontier.points) {
    std::vector<std::size_t> d(m);
    for (std::size_t i = 0; i < m; ++i)
      d[i] = static_cast<std::size_t>(
          std::lower_bound(grid.axes[i].begin(), grid.axes[i].end(), v(static_cast<Eigen::Index>(i))) -
          grid.axes[i].begin());
    frontier_best = std::min(frontier_best, objective(d));
  }
  if (std::abs(frontier_best - best) > 1e-9 * (1.0 + std::abs(best)))
    throw SolverError("frontier scan disagrees with the full grid scan");

  return {best, grid.point(grid.digits(best_index))};
}

}  // namespace sysrisk
