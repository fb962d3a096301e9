#include "sysrisk/systemic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "sysrisk/errors.hpp"

namespace sysrisk {

ScalarizationSet::ScalarizationSet(std::vector<Eigen::VectorXd> vectors)
    : vectors_(std::move(vectors)) {
  if (vectors_.empty()) throw InputError("scalarization set is empty");
  const auto m = vectors_.front().size();
  for (const auto& c : vectors_) {
    if (c.size() != m) throw InputError("scalarization vectors differ in dimension");
    if (!in_simplex(c)) throw InputError("scalarization vector is not in the unit simplex");
  }
}

ScalarizationSet ScalarizationSet::basis(std::size_t m) {
  std::vector<Eigen::VectorXd> v;
  for (std::size_t i = 0; i < m; ++i)
    v.push_back(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i)));
  return ScalarizationSet(std::move(v));
}

AggregationWeights::AggregationWeights(Eigen::VectorXd c) : c_(std::move(c)) {
  if (!in_simplex(c_)) throw InputError("aggregation weights must lie in the unit simplex");
}

AggregationWeights AggregationWeights::uniform(std::size_t m) {
  if (m == 0) throw InputError("aggregation weights need at least one agent");
  return AggregationWeights(
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m)));
}

DiscreteScalarDistribution scalarize_max(const DiscreteVectorDistribution& x,
                                         const ScalarizationSet& set) {
  if (set.dimension() != x.dimension())
    throw InputError("scalarization dimension does not match the random vector");
  const auto& r = x.realizations();
  std::vector<double> values(x.scenarios(), -std::numeric_limits<double>::infinity());
  for (const auto& c : set.vectors()) {
    const Eigen::VectorXd v = r * c;
    for (std::size_t s = 0; s < values.size(); ++s)
      values[s] = std::max(values[s], v(static_cast<Eigen::Index>(s)));
  }
  return {std::move(values), x.probs()};
}

double systemic_risk_linear(const RiskSpec& spec, const DiscreteVectorDistribution& x,
                            const ScalarizationSet& set) {
  return evaluate_risk(spec, scalarize_max(x, set));
}

DiscreteScalarDistribution individual_risk_profile(const std::vector<RiskSpec>& specs,
                                                   const DiscreteVectorDistribution& x,
                                                   const AggregationWeights& c) {
  if (specs.size() != x.dimension() || c.dimension() != x.dimension())
    throw InputError("need one risk spec and one weight per component");
  std::vector<double> atoms(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) atoms[i] = evaluate_risk(specs[i], x.component(i));
  const auto& w = c.values();
  return {std::move(atoms), std::vector<double>(w.data(), w.data() + w.size())};
}

double systemic_risk_aggregated(const RiskSpec& rho0, const std::vector<RiskSpec>& specs,
                                const AggregationWeights& c, const DiscreteVectorDistribution& x) {
  return evaluate_risk(rho0, individual_risk_profile(specs, x, c));
}

AxiomReport check_systemic_axioms(const SystemicMeasure& measure, std::size_t dim, int trials,
                                  std::uint64_t seed, std::size_t max_scenarios) {
  constexpr double tol = 1e-9;
  AxiomReport report;
  report.trials = trials;
  report.checks = {{"convexity"}, {"monotonicity"}, {"positive homogeneity"}, {"translation"}};

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size_dist(1, max_scenarios);
  std::uniform_real_distribution<double> value_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto m = static_cast<Eigen::Index>(dim);

  auto record = [&](std::size_t which, double violation, const Eigen::MatrixXd& sample) {
    auto& c = report.checks[which];
    c.worst_violation = std::max(c.worst_violation, violation);
    if (violation > tol) {
      c.passed = false;
      if (report.passed) {
        std::ostringstream os;
        os.precision(17);
        os << c.name << ": violation " << violation << " at X=\n" << sample;
        report.counterexample = os.str();
      }
      report.passed = false;
    }
  };

  for (int trial = 0; trial < trials; ++trial) {
    const auto n = static_cast<Eigen::Index>(size_dist(rng));
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (double& p : probs) p = 0.05 + unit(rng);
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (double& p : probs) p /= total;

    Eigen::MatrixXd a(n, m), b(n, m), noise(n, m);
    for (Eigen::Index s = 0; s < n; ++s)
      for (Eigen::Index i = 0; i < m; ++i) {
        a(s, i) = value_dist(rng);
        b(s, i) = value_dist(rng);
        noise(s, i) = 3.0 * unit(rng);
      }
    const DiscreteVectorDistribution xa(a, probs);
    const double ra = measure(xa);
    const double rb = measure(xa.with_realizations(b));
    const double lambda = unit(rng);
    const double rmix = measure(xa.with_realizations(lambda * a + (1.0 - lambda) * b));
    record(0, rmix - (lambda * ra + (1.0 - lambda) * rb), a);

    record(1, ra - measure(xa.with_realizations(a + noise)), a);

    const double t = 0.1 + 9.9 * unit(rng);
    record(2, std::abs(measure(xa.with_realizations(t * a)) - t * ra), a);

    const double shift = value_dist(rng);
    const double r_one = measure(xa.with_realizations(Eigen::MatrixXd::Ones(n, m)));
    record(3, std::abs(measure(xa.with_realizations(a.array() + shift)) - (ra + shift * r_one)), a);
  }
  return report;
}

}  // namespace sysrisk
