#include "sysrisk/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sysrisk/errors.hpp"

namespace sysrisk {

std::vector<double> validated_probabilities(std::vector<double> probs) {
  if (probs.empty()) throw InputError("probability vector is empty");
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0)
      throw InputError("probabilities must be finite and nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance)
    throw InputError("probabilities sum to " + std::to_string(total) + ", expected 1");
  for (double& p : probs) p /= total;
  return probs;
}

bool in_simplex(const Eigen::VectorXd& c, double tol) {
  if (c.size() == 0) return false;
  if ((c.array() < 0.0).any()) return false;
  return std::abs(c.sum() - 1.0) <= tol;
}

DiscreteScalarDistribution::DiscreteScalarDistribution(std::vector<double> values,
                                                       std::vector<double> probs)
    : values_(std::move(values)) {
  if (values_.empty()) throw InputError("distribution has no scenarios");
  if (values_.size() != probs.size())
    throw InputError("values and probabilities differ in length");
  for (double v : values_)
    if (!std::isfinite(v)) throw InputError("distribution value is not finite");
  probs_ = validated_probabilities(std::move(probs));
}

DiscreteScalarDistribution DiscreteScalarDistribution::uniform(std::vector<double> values) {
  if (values.empty()) throw InputError("distribution has no scenarios");
  std::vector<double> probs(values.size(), 1.0 / static_cast<double>(values.size()));
  return {std::move(values), std::move(probs)};
}

double DiscreteScalarDistribution::mean() const {
  double m = 0.0;
  for (std::size_t s = 0; s < values_.size(); ++s) m += probs_[s] * values_[s];
  return m;
}

double DiscreteScalarDistribution::min() const {
  return *std::min_element(values_.begin(), values_.end());
}

double DiscreteScalarDistribution::max() const {
  return *std::max_element(values_.begin(), values_.end());
}

DiscreteScalarDistribution DiscreteScalarDistribution::with_values(
    std::vector<double> values) const {
  return {std::move(values), probs_};
}

DiscreteVectorDistribution::DiscreteVectorDistribution(Eigen::MatrixXd realizations,
                                                       std::vector<double> probs)
    : realizations_(std::move(realizations)) {
  if (realizations_.rows() == 0 || realizations_.cols() == 0)
    throw InputError("vector distribution needs at least one scenario and one component");
  if (static_cast<std::size_t>(realizations_.rows()) != probs.size())
    throw InputError("realization rows and probabilities differ in length");
  if (!realizations_.allFinite()) throw InputError("realization is not finite");
  probs_ = validated_probabilities(std::move(probs));
}

DiscreteScalarDistribution DiscreteVectorDistribution::component(std::size_t i) const {
  if (i >= dimension()) throw InputError("component index out of range");
  std::vector<double> v(scenarios());
  for (std::size_t s = 0; s < scenarios(); ++s)
    v[s] = realizations_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i));
  return {std::move(v), probs_};
}

DiscreteScalarDistribution DiscreteVectorDistribution::scalarize(const Eigen::VectorXd& w) const {
  if (static_cast<std::size_t>(w.size()) != dimension())
    throw InputError("scalarization vector has wrong dimension");
  Eigen::VectorXd v = realizations_ * w;
  return {std::vector<double>(v.data(), v.data() + v.size()), probs_};
}

DiscreteVectorDistribution DiscreteVectorDistribution::with_realizations(
    Eigen::MatrixXd realizations) const {
  return {std::move(realizations), probs_};
}

}  // namespace sysrisk
