#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles/oracles.hpp"
#include "sysrisk/errors.hpp"
#include "sysrisk/systemic.hpp"

using namespace sysrisk;

namespace {

DiscreteVectorDistribution two_by_two() {
  Eigen::MatrixXd x(2, 2);
  x << 1, 3, 3, 1;
  return {x, {0.5, 0.5}};
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST(ScalarizeMax, BasisTakesWorstComponent) {
  const auto d = scalarize_max(two_by_two(), ScalarizationSet::basis(2));
  EXPECT_EQ(d.values(), (std::vector<double>{3, 3}));
  EXPECT_EQ(d.probs(), (std::vector<double>{0.5, 0.5}));
}

TEST(ScalarizeMax, Singleton) {
  const auto d = scalarize_max(two_by_two(), ScalarizationSet({vec({0.5, 0.5})}));
  EXPECT_EQ(d.values(), (std::vector<double>{2, 2}));
}

TEST(ScalarizeMax, DimensionMismatch) {
  EXPECT_THROW(scalarize_max(two_by_two(), ScalarizationSet::basis(3)), InputError);
  EXPECT_THROW(ScalarizationSet({vec({0.5, 0.6})}), InputError);
  EXPECT_THROW(AggregationWeights(vec({-0.1, 1.1})), InputError);
}

TEST(SystemicLinear, Examples) {
  const auto x = two_by_two();
  EXPECT_NEAR(systemic_risk_linear(RiskSpec::expectation(), x, ScalarizationSet::basis(2)), 3.0, 1e-15);
  EXPECT_NEAR(systemic_risk_linear(RiskSpec::avar(0.5), x, ScalarizationSet::basis(2)), 3.0, 1e-15);
  const Eigen::MatrixXd shifted = x.realizations().array() + 1.25;
  const auto spec = RiskSpec::mean_semideviation(1, 0.4);
  EXPECT_NEAR(systemic_risk_linear(spec, x.with_realizations(shifted), ScalarizationSet::basis(2)) -
                  systemic_risk_linear(spec, x, ScalarizationSet::basis(2)),
              1.25, 1e-12);
}

TEST(IndividualProfile, Examples) {
  const auto c = AggregationWeights(vec({0.5, 0.5}));
  const std::vector<RiskSpec> e(2, RiskSpec::expectation());
  const auto prof = individual_risk_profile(e, two_by_two(), c);
  EXPECT_EQ(prof.values(), (std::vector<double>{2, 2}));
  EXPECT_EQ(prof.probs(), (std::vector<double>{0.5, 0.5}));

  Eigen::MatrixXd one(2, 1);
  one << 4, 6;
  const auto single = individual_risk_profile({RiskSpec::avar(0.5)}, {one, {0.5, 0.5}}, AggregationWeights::uniform(1));
  EXPECT_EQ(single.values(), (std::vector<double>{6}));

  Eigen::MatrixXd constant(3, 2);
  constant << 1, 3, 1, 3, 1, 3;
  const auto prof2 = individual_risk_profile(e, {constant, {0.2, 0.3, 0.5}}, c);
  EXPECT_NEAR(prof2.values()[0], 1.0, 1e-15);
  EXPECT_NEAR(prof2.values()[1], 3.0, 1e-15);
  EXPECT_THROW(individual_risk_profile({RiskSpec::expectation()}, two_by_two(), c), InputError);
}

TEST(SystemicAggregated, Examples) {
  Eigen::MatrixXd constant(1, 2);
  constant << 1, 3;
  const DiscreteVectorDistribution x(constant, {1.0});
  const auto c = AggregationWeights(vec({0.5, 0.5}));
  const std::vector<RiskSpec> e(2, RiskSpec::expectation());
  EXPECT_NEAR(systemic_risk_aggregated(RiskSpec::mean_avar(1.0, 0.5), e, c, x), 3.0, 1e-12);
  EXPECT_NEAR(systemic_risk_aggregated(RiskSpec::mean_avar(0.0, 0.5), e, c, x), 2.0, 1e-12);
  EXPECT_NEAR(systemic_risk_aggregated(RiskSpec::mean_semideviation(1, 1), e, c, x), 2.5, 1e-12);
}

TEST(SystemicLinear, OrderingAndInvariances) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2.0, 4.0), w(0.05, 1.0);
  const std::vector<RiskSpec> specs{RiskSpec::avar(0.25), RiskSpec::mean_semideviation(1, 0.5),
                                    RiskSpec::mean_avar(0.5, 0.1), RiskSpec::expectation()};
  for (int t = 0; t < 500; ++t) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 4);
    const Eigen::Index s = 1 + static_cast<Eigen::Index>(rng() % 8);
    Eigen::MatrixXd x(s, m);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    // Equal probabilities so scenarios can be permuted.
    const DiscreteVectorDistribution d(x, std::vector<double>(static_cast<std::size_t>(s), 1.0 / static_cast<double>(s)));
    Eigen::VectorXd c(m);
    for (Eigen::Index i = 0; i < m; ++i) c(i) = w(rng);
    c /= c.sum();
    for (const auto& spec : specs) {
      const double lhs = systemic_risk_linear(spec, d, ScalarizationSet({c}));
      double mid = 0.0, worst = -1e300;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double r = evaluate_risk(spec, d.component(static_cast<std::size_t>(i)));
        mid += c(i) * r;
        worst = std::max(worst, r);
      }
      EXPECT_LE(lhs, mid + 1e-9);
      EXPECT_LE(mid, worst + 1e-9);

      Eigen::MatrixXd perm = x.colwise().reverse();
      const double base = systemic_risk_linear(spec, d, ScalarizationSet::basis(static_cast<std::size_t>(m)));
      EXPECT_NEAR(systemic_risk_linear(spec, d.with_realizations(perm), ScalarizationSet::basis(static_cast<std::size_t>(m))),
                  base, 1e-12 * (1.0 + std::abs(base)));

      std::vector<Eigen::VectorXd> bigger{c};
      const auto small = systemic_risk_linear(spec, d, ScalarizationSet(bigger));
      for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) bigger.push_back(Eigen::VectorXd::Unit(m, static_cast<Eigen::Index>(i)));
      EXPECT_LE(small, systemic_risk_linear(spec, d, ScalarizationSet(bigger)) + 1e-12);
    }
  }
}

TEST(SystemicAxioms, BothConstructions) {
  const auto c = AggregationWeights(Eigen::VectorXd::Constant(3, 1.0 / 3));
  const std::vector<RiskSpec> comp(3, RiskSpec::avar(0.3));
  SystemicMeasure agg = [&](const DiscreteVectorDistribution& x) {
    return systemic_risk_aggregated(RiskSpec::mean_avar(0.5, 0.2), comp, c, x);
  };
  SystemicMeasure lin = [](const DiscreteVectorDistribution& x) {
    return systemic_risk_linear(RiskSpec::mean_semideviation(1, 0.5), x, ScalarizationSet::basis(3));
  };
  EXPECT_TRUE(check_systemic_axioms(agg, 3, 200, 1).passed);
  EXPECT_TRUE(check_systemic_axioms(lin, 3, 200, 2).passed);
}
