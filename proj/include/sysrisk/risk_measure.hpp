#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sysrisk/distribution.hpp"

namespace sysrisk {

enum class RiskKind { Expectation, AVaR, HigherOrder, MeanSemideviation, MeanAvarMix };

/// Tagged description of a scalar coherent risk measure.
///
/// `alpha` is the tail level used by AVaR, HigherOrder and MeanAvarMix (the
/// probability mass of the worst outcomes). `kappa` weights the deviation term
/// of MeanSemideviation and the AVaR part of MeanAvarMix. `order` is the norm
/// order of HigherOrder and MeanSemideviation. Fields a kind does not use are
/// ignored.
struct RiskSpec {
  RiskKind kind = RiskKind::Expectation;
  double alpha = 1.0;
  double kappa = 0.0;
  double order = 1.0;

  static RiskSpec expectation();
  static RiskSpec avar(double alpha);
  static RiskSpec higher_order(double alpha, double order);
  static RiskSpec mean_semideviation(double order, double kappa);
  static RiskSpec mean_avar(double kappa, double alpha);

  /// Throws ParameterError when a parameter used by `kind` is out of range.
  void validate() const;

  bool operator==(const RiskSpec&) const = default;
};

std::string_view to_string(RiskKind kind);
RiskKind risk_kind_from_string(std::string_view name);

/// Short command-line form: `expectation`, `avar:A`, `hor:A:P`, `msd:P:K`,
/// `mean-avar:K:A`. Throws ParameterError on unknown kinds or bad numbers.
RiskSpec parse_risk_spec(std::string_view text);
std::string format_risk_spec(const RiskSpec& spec);

/// rho[Z] for a discrete loss distribution.
double evaluate_risk(const RiskSpec& spec, const DiscreteScalarDistribution& dist);

/// An element xi of the dual set attaining rho[Z] = sum_s p_s xi_s z_s.
/// Every returned vector is nonnegative with sum_s p_s xi_s = 1.
std::vector<double> risk_subgradient(const RiskSpec& spec, const DiscreteScalarDistribution& dist);

/// Left (1 - alpha)-quantile: the smallest value v with P(Z <= v) >= 1 - alpha.
double value_at_risk(double alpha, const DiscreteScalarDistribution& dist);

struct AxiomCheck {
  std::string name;
  bool passed = true;
  double worst_violation = 0.0;
};

struct AxiomReport {
  bool passed = true;
  int trials = 0;
  std::vector<AxiomCheck> checks;  // convexity, monotonicity, homogeneity, translation
  std::string counterexample;      // first failure, empty when passed
};

/// Randomized check of convexity, monotonicity, positive homogeneity and
/// translation equivariance, each to 1e-9. Failures are reported, not thrown.
AxiomReport check_axioms(const RiskSpec& spec, int trials, std::uint64_t seed);

}  // namespace sysrisk
