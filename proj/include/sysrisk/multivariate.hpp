#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sysrisk/distribution.hpp"
#include "sysrisk/systemic.hpp"

namespace sysrisk {

/// Minimal points v with P(X <= v) >= level (multivariate Value-at-Risk).
struct PEfficientFrontier {
  double level = 0.0;
  std::vector<Eigen::VectorXd> points;  // lexicographically sorted
};

/// Joint distribution function P(X <= v) (componentwise).
double joint_cdf(const DiscreteVectorDistribution& x, const Eigen::VectorXd& v);

/// Number of points in the candidate grid formed by the distinct marginal values.
double candidate_grid_size(const DiscreteVectorDistribution& x);

/// Exhaustive search over the candidate grid; level must lie in (0,1).
PEfficientFrontier p_efficient_points(const DiscreteVectorDistribution& x, double level);

/// True when `point` dominates some frontier point, i.e. lies in the level set.
bool in_level_set(const PEfficientFrontier& frontier, const Eigen::VectorXd& point);

/// E[w^T X | X in Z_level]. Throws DegenerateEventError if the event is null.
double mavar(const DiscreteVectorDistribution& x, double level, const AggregationWeights& w);

struct VmavarResult {
  double value = 0.0;
  Eigen::VectorXd minimizer;
};

/// min c^T v + E[c^T (X - v)_+] / alpha subject to P(X <= v) >= 1 - alpha,
/// alpha in (0,1). Ties go to the lexicographically smallest v.
VmavarResult vmavar_scalarized(const DiscreteVectorDistribution& x, double alpha,
                               const AggregationWeights& c);

}  // namespace sysrisk
