#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace sysrisk {

/// Probabilities must sum to one within this tolerance; within it they are
/// renormalized, beyond it construction fails.
inline constexpr double kProbabilityTolerance = 1e-12;

/// Finite-scenario scalar random loss.
class DiscreteScalarDistribution {
 public:
  DiscreteScalarDistribution(std::vector<double> values, std::vector<double> probs);

  /// Equally likely scenarios.
  static DiscreteScalarDistribution uniform(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }

  double mean() const;
  double min() const;
  double max() const;

  /// Same probabilities, new values.
  DiscreteScalarDistribution with_values(std::vector<double> values) const;

 private:
  std::vector<double> values_;
  std::vector<double> probs_;
};

/// Finite-scenario random vector: row s of `realizations` is X(omega_s).
class DiscreteVectorDistribution {
 public:
  DiscreteVectorDistribution(Eigen::MatrixXd realizations, std::vector<double> probs);

  std::size_t scenarios() const { return static_cast<std::size_t>(realizations_.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(realizations_.cols()); }
  const Eigen::MatrixXd& realizations() const { return realizations_; }
  const std::vector<double>& probs() const { return probs_; }

  /// Marginal distribution of component i.
  DiscreteScalarDistribution component(std::size_t i) const;

  /// Scalar distribution of w^T X.
  DiscreteScalarDistribution scalarize(const Eigen::VectorXd& w) const;

  DiscreteVectorDistribution with_realizations(Eigen::MatrixXd realizations) const;

 private:
  Eigen::MatrixXd realizations_;
  std::vector<double> probs_;
};

/// Validates a probability vector and renormalizes it. Throws InputError.
std::vector<double> validated_probabilities(std::vector<double> probs);

/// Checks membership in the unit simplex (nonnegative, sums to one).
bool in_simplex(const Eigen::VectorXd& c, double tol = kProbabilityTolerance);

}  // namespace sysrisk
