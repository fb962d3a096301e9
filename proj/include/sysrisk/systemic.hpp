#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sysrisk/distribution.hpp"
#include "sysrisk/risk_measure.hpp"

namespace sysrisk {

/// Finite set of scalarization vectors, each in the unit simplex.
class ScalarizationSet {
 public:
  explicit ScalarizationSet(std::vector<Eigen::VectorXd> vectors);

  /// Standard basis {e_1, ..., e_m}: the worst component per scenario.
  static ScalarizationSet basis(std::size_t m);

  std::size_t dimension() const { return static_cast<std::size_t>(vectors_.front().size()); }
  const std::vector<Eigen::VectorXd>& vectors() const { return vectors_; }

 private:
  std::vector<Eigen::VectorXd> vectors_;
};

/// Probability mass on the agents {1, ..., m}; zero entries allowed.
class AggregationWeights {
 public:
  explicit AggregationWeights(Eigen::VectorXd c);
  static AggregationWeights uniform(std::size_t m);

  std::size_t dimension() const { return static_cast<std::size_t>(c_.size()); }
  const Eigen::VectorXd& values() const { return c_; }

 private:
  Eigen::VectorXd c_;
};

/// X_S(omega) = max over c in S of c^T X(omega).
DiscreteScalarDistribution scalarize_max(const DiscreteVectorDistribution& x,
                                         const ScalarizationSet& set);

/// rho_S[X] = rho[X_S].
double systemic_risk_linear(const RiskSpec& spec, const DiscreteVectorDistribution& x,
                            const ScalarizationSet& set);

/// X_R on the agent space: atom rho_i[X_i] with mass c_i.
DiscreteScalarDistribution individual_risk_profile(const std::vector<RiskSpec>& specs,
                                                   const DiscreteVectorDistribution& x,
                                                   const AggregationWeights& c);

/// rho_s[X] = rho_0[X_R]: evaluate each agent, then aggregate the values.
double systemic_risk_aggregated(const RiskSpec& rho0, const std::vector<RiskSpec>& specs,
                                const AggregationWeights& c, const DiscreteVectorDistribution& x);

/// A systemic risk functional on random vectors, for property checks.
using SystemicMeasure = std::function<double(const DiscreteVectorDistribution&)>;

/// Randomized check of A1-A4 (translation as rho[X + a1] = rho[X] + a rho[1])
/// on random instances with `dim` components and at most `max_scenarios` scenarios.
AxiomReport check_systemic_axioms(const SystemicMeasure& measure, std::size_t dim, int trials,
                                  std::uint64_t seed, std::size_t max_scenarios = 8);

}  // namespace sysrisk
