// Acceptance run: one PASS/FAIL line per criterion.
//
//   sysrisk_acceptance [--only 1,5,...] [--allow-fail 4,...]
//
// Exit status is 0 when every selected criterion passes or is listed in
// --allow-fail. Allowed failures still print FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/oracles.hpp"
#include "sysrisk/cli_commands.hpp"
#include "sysrisk/errors.hpp"
#include "sysrisk/multivariate.hpp"
#include "sysrisk/qp_solver.hpp"
#include "sysrisk/risk_measure.hpp"
#include "sysrisk/systemic.hpp"
#include "sysrisk/two_stage.hpp"
#include "sysrisk/wireless.hpp"

using namespace sysrisk;

namespace {

// Pinned tolerances.
constexpr double kAxiomTol = 1e-9;
constexpr double kNormTol = 1e-10;
constexpr double kAttainTol = 1e-9;
constexpr double kOrderSlack = 1e-9;
constexpr double kDegenerateShare = 0.05;
constexpr double kEnumTol = 1e-6;
constexpr double kResidualTol = 1e-5;
constexpr double kAdalRelTol = 1e-4;
constexpr double kTailTol = 1e-12;
constexpr double kQpTol = 1e-6;
constexpr double kGridLimit = 1e4;
constexpr double kAxiomSeconds = 10.0;
constexpr double kEnumSeconds = 300.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> w(0.05, 1.0);
  std::vector<double> p(n);
  double tot = 0.0;
  for (auto& v : p) tot += (v = w(rng));
  for (auto& v : p) v /= tot;
  return p;
}

Eigen::VectorXd random_simplex(std::mt19937_64& rng, Eigen::Index m) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd c(m);
  for (Eigen::Index i = 0; i < m; ++i) c(i) = e(rng);
  return c / c.sum();
}

RiskSpec random_spec(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  switch (rng() % 5) {
    case 0: return RiskSpec::expectation();
    case 1: return RiskSpec::avar(u(rng));
    case 2: return RiskSpec::mean_semideviation(1.0 + static_cast<double>(rng() % 3), u(rng));
    case 3: return RiskSpec::mean_avar(u(rng), u(rng));
    default: return RiskSpec::higher_order(u(rng), 1.0 + static_cast<double>(rng() % 3));
  }
}

struct VectorInstance {
  Eigen::MatrixXd x;
  std::vector<double> p;
};

VectorInstance random_vector_instance(std::mt19937_64& rng, Eigen::Index max_m, Eigen::Index max_s) {
  std::uniform_real_distribution<double> u(-2.0, 4.0);
  const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(max_m));
  const Eigen::Index s = 1 + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(max_s));
  VectorInstance out{Eigen::MatrixXd(s, m), random_probs(rng, static_cast<std::size_t>(s))};
  for (Eigen::Index i = 0; i < out.x.size(); ++i) out.x.data()[i] = u(rng);
  return out;
}

// ---------------------------------------------------------------- 1 and 2

Outcome criterion_axioms() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-2.0, 4.0), t01(0.0, 1.0), scale(0.1, 5.0);
  double worst = 0.0;
  std::string where;
  auto note = [&](double v, const std::string& what) {
    if (v > worst) {
      worst = v;
      where = what;
    }
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const auto inst = random_vector_instance(rng, 4, 8);
    const Eigen::Index m = inst.x.cols();
    std::vector<Eigen::VectorXd> dirs;
    const std::size_t n_dirs = 1 + rng() % 5;
    for (std::size_t k = 0; k < n_dirs; ++k) dirs.push_back(random_simplex(rng, m));
    const ScalarizationSet set(dirs);
    const RiskSpec base = random_spec(rng);
    std::vector<RiskSpec> agents;
    for (Eigen::Index i = 0; i < m; ++i) agents.push_back(random_spec(rng));
    const AggregationWeights c(random_simplex(rng, m));
    const RiskSpec exA = RiskSpec::mean_avar(t01(rng), 0.05 + 0.9 * t01(rng));
    const RiskSpec exB = RiskSpec::mean_semideviation(1.0, t01(rng));

    const std::vector<std::pair<std::string, std::function<double(const Eigen::MatrixXd&)>>> measures{
        {"linear " + format_risk_spec(base),
         [&](const Eigen::MatrixXd& x) { return systemic_risk_linear(base, {x, inst.p}, set); }},
        {"example A", [&](const Eigen::MatrixXd& x) { return systemic_risk_aggregated(exA, agents, c, {x, inst.p}); }},
        {"example B", [&](const Eigen::MatrixXd& x) { return systemic_risk_aggregated(exB, agents, c, {x, inst.p}); }}};

    Eigen::MatrixXd y(inst.x.rows(), m), bump(inst.x.rows(), m);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      y.data()[i] = u(rng);
      bump.data()[i] = rng() % 3 == 0 ? 0.0 : 2.0 * t01(rng);
    }
    const double lam = t01(rng), tt = scale(rng), a = u(rng);
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(inst.x.rows(), m);
    for (const auto& [name, rho] : measures) {
      const double rx = rho(inst.x), ry = rho(y);
      note(rho(lam * inst.x + (1.0 - lam) * y) - (lam * rx + (1.0 - lam) * ry), name + " convexity");
      note(rx - rho(inst.x + bump), name + " monotonicity");
      note(std::abs(rho(tt * inst.x) - tt * rx) / std::max(1.0, tt), name + " homogeneity");
      note(std::abs(rho(inst.x + a * ones) - rx - a * rho(ones)), name + " translation");
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= kAxiomTol && secs < kAxiomSeconds;
  o.detail = "1000 instances, worst violation " + fmt(worst) + (where.empty() ? "" : " (" + where + ")") + ", " +
             fmt(secs) + " s";
  return o;
}

Outcome criterion_duality() {
  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> u(-2.0, 4.0);
  double neg = 0.0, norm = 0.0, attain = 0.0, support = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto inst = random_vector_instance(rng, 4, 8);
    std::vector<Eigen::VectorXd> dirs;
    const std::size_t n_dirs = 1 + rng() % 5;
    for (std::size_t k = 0; k < n_dirs; ++k) dirs.push_back(random_simplex(rng, inst.x.cols()));
    const auto z = scalarize_max({inst.x, inst.p}, ScalarizationSet(dirs));
    const RiskSpec spec = random_spec(rng);
    const auto xi = risk_subgradient(spec, z);
    double sum = 0.0, pair = 0.0;
    for (std::size_t s = 0; s < xi.size(); ++s) {
      neg = std::max(neg, -xi[s]);
      sum += z.probs()[s] * xi[s];
      pair += z.probs()[s] * xi[s] * z.values()[s];
    }
    norm = std::max(norm, std::abs(sum - 1.0));
    attain = std::max(attain, std::abs(pair - evaluate_risk(spec, z)));
    for (int k = 0; k < 10; ++k) {
      std::vector<double> other(z.size());
      for (auto& v : other) v = u(rng);
      double q = 0.0;
      for (std::size_t s = 0; s < other.size(); ++s) q += z.probs()[s] * xi[s] * other[s];
      support = std::max(support, q - evaluate_risk(spec, z.with_values(other)));
    }
  }
  Outcome o;
  o.pass = neg <= 0.0 && norm <= kNormTol && attain <= kAttainTol && support <= kAttainTol;
  o.detail = "1000 instances x 10 alternatives: min xi " + fmt(-neg) + ", normalization " + fmt(norm) +
             ", attainment " + fmt(attain) + ", support excess " + fmt(support);
  return o;
}

// ---------------------------------------------------------------- 3

Outcome criterion_aggregation_ordering() {
  std::mt19937_64 rng(2026);
  double slack = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial) {
    const auto inst = random_vector_instance(rng, 4, 8);
    const DiscreteVectorDistribution x(inst.x, inst.p);
    const Eigen::VectorXd c = random_simplex(rng, inst.x.cols());
    const RiskSpec spec = random_spec(rng);
    const double lhs = systemic_risk_linear(spec, x, ScalarizationSet({c}));
    double mid = 0.0, top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.dimension(); ++i) {
      const double r = evaluate_risk(spec, x.component(i));
      mid += c(static_cast<Eigen::Index>(i)) * r;
      top = std::max(top, r);
    }
    slack = std::min({slack, mid - lhs, top - mid});
  }
  return {slack >= -kOrderSlack, "1000 instances, smallest slack " + fmt(slack)};
}

// ---------------------------------------------------------------- 4

// Integer-valued components driven by a common shock.
VectorInstance multivariate_instance(std::mt19937_64& rng) {
  const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 3);
  const Eigen::Index s = 1 + static_cast<Eigen::Index>(rng() % 6);
  VectorInstance out{Eigen::MatrixXd(s, m), random_probs(rng, static_cast<std::size_t>(s))};
  for (Eigen::Index r = 0; r < s; ++r) {
    const double shock = static_cast<double>(rng() % 4);
    for (Eigen::Index i = 0; i < m; ++i) out.x(r, i) = shock + static_cast<double>(rng() % 2);
  }
  return out;
}

WirelessInstance load_generated(const std::string& name) {
  return generate_instance(load_config(std::string(SYSRISK_SOURCE_DIR) + "/configs/" + name));
}

Outcome criterion_multivariate() {
  std::mt19937_64 rng(2027);
  const std::vector<double> alphas{0.1, 0.2, 0.3};
  int rows = 0, degenerate = 0, bad_v = 0, bad_m = 0;
  double worst_v = std::numeric_limits<double>::infinity(), worst_m = worst_v;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = multivariate_instance(rng);
    const AggregationWeights w(random_simplex(rng, inst.x.cols()));
    for (const auto& r : compare_multivariate({inst.x, inst.p}, w, alphas)) {
      ++rows;
      worst_v = std::min(worst_v, r.vmavar - r.avar);
      if (r.vmavar - r.avar < -kOrderSlack) ++bad_v;
      if (r.degenerate) {
        ++degenerate;
        continue;
      }
      worst_m = std::min(worst_m, r.mavar - r.avar);
      if (r.mavar - r.avar < -kOrderSlack) ++bad_m;
    }
  }
  const double share = static_cast<double>(degenerate) / rows;
  bool pass = bad_v == 0 && bad_m == 0 && share < kDegenerateShare;
  std::ostringstream d;
  d << rows << " random rows: AVaR>VMAVaR " << bad_v << " (min gap " << fmt(worst_v) << "), AVaR>MAVaR " << bad_m
    << " (min gap " << fmt(worst_m) << "), degenerate " << degenerate << " (" << fmt(100 * share) << "%)";

  // Regenerated paper-scale experiment at the AVaR decision for the smallest level.
  const auto paper = load_generated("paper.json");
  const WirelessModel model = build_model(paper, RiskSpec::avar(alphas.front()));
  SecondStageOracle oracle(model.instance, SolveMode::Centralized);
  const Eigen::VectorXd z = solve_two_stage(model.instance, {}, &oracle).z;
  const AggregationWeights c(Eigen::Vector2d(model.config.c1, model.config.c2));
  d << "; paper scale z " << format_z(z) << ":";
  for (const auto& r : compare_multivariate(loss_components(model, oracle, z), c, alphas)) {
    const bool strict = !r.degenerate && r.avar < r.vmavar && r.vmavar < r.mavar;
    pass = pass && strict;
    d << " a=" << r.alpha << " " << fmt(r.avar) << "/" << fmt(r.vmavar) << "/" << fmt(r.mavar)
      << (strict ? "" : " (not AVaR<VMAVaR<MAVaR)");
  }
  return {pass, d.str()};
}

// ---------------------------------------------------------------- 5

double reference_risk(const RiskSpec& spec, const std::vector<double>& v, const std::vector<double>& p) {
  if (spec.kind == RiskKind::AVaR) return oracle::avar_sorted_tail(v, p, spec.alpha);
  return oracle::mean_semideviation(v, p, spec.order, spec.kappa);
}

Outcome criterion_decomposition() {
  const auto t0 = Clock::now();
  const WirelessModel model = build_model(load_generated("desk.json"), RiskSpec::avar(0.1));
  SecondStageOracle oracle(model.instance, SolveMode::Centralized);
  const auto configs = feasible_configurations(model.instance.numFirstStage, model.instance.budget);
  const auto probs = model.instance.probabilities();
  std::vector<std::vector<double>> values;
  for (const auto& z : configs) {
    std::vector<double> v;
    for (const auto* s : oracle.solve_all(z)) v.push_back(s->value);
    values.push_back(std::move(v));
  }
  bool pass = true;
  double worst = 0.0;
  std::ostringstream d;
  d << configs.size() << " configurations;";
  for (const auto& spec : {RiskSpec::avar(0.1), RiskSpec::avar(0.2), RiskSpec::avar(0.3),
                           RiskSpec::mean_semideviation(1.0, 0.5)}) {
    TwoStageInstance inst = model.instance;
    inst.riskSpec = spec;
    const auto r = solve_two_stage(inst, {}, &oracle);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : values) best = std::min(best, reference_risk(spec, v, probs));
    const double gap = std::abs(r.riskValue - best);
    worst = std::max(worst, gap);
    pass = pass && r.converged && gap <= kEnumTol;
    d << " " << format_risk_spec(spec) << " z " << format_z(r.z) << " " << fmt(r.riskValue) << " in "
      << r.trace.size() << " it;";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < kEnumSeconds;
  d << " worst gap " << fmt(worst) << ", " << fmt(secs) << " s";
  return {pass, d.str()};
}

// ---------------------------------------------------------------- 6

Outcome criterion_distributed() {
  const auto t0 = Clock::now();
  const WirelessModel model = build_model(load_generated("desk.json"), RiskSpec::avar(0.1));
  SecondStageOracle central(model.instance, SolveMode::Centralized);
  const auto cres = solve_two_stage(model.instance, {}, &central);

  TwoStageOptions opt;
  opt.mode = SolveMode::Distributed;
  SecondStageOracle dist(model.instance, SolveMode::Distributed, opt.adal);
  std::ostringstream d;
  TwoStageResult dres;
  try {
    dres = solve_two_stage(model.instance, opt, &dist);
  } catch (const NotConvergedError& e) {
    return {false, std::string("distributed solve failed: ") + e.what()};
  }
  std::set<std::size_t> covered;
  double worst_res = 0.0, worst_gap = 0.0;
  for (const auto& run : dist.adal_runs()) {
    covered.insert(run.scenario);
    worst_res = std::max({worst_res, run.couplingResidual, run.consistencyResidual});
    const double c = central.solve(run.scenario, run.z).value;
    worst_gap = std::max(worst_gap, std::abs(run.value - c) / std::max(std::abs(c), 1e-12));
  }
  const bool same_z = format_z(dres.z) == format_z(cres.z);
  const bool pass = covered.size() == model.instance.numScenarios() && worst_res <= kResidualTol &&
                    worst_gap <= kAdalRelTol && same_z;
  d << dist.adal_runs().size() << " ADAL runs over " << covered.size() << "/" << model.instance.numScenarios()
    << " scenarios, worst residual " << fmt(worst_res) << ", worst relative gap " << fmt(worst_gap)
    << "; z distributed " << format_z(dres.z) << " vs centralized " << format_z(cres.z) << ", risk "
    << fmt(dres.riskValue) << " vs " << fmt(cres.riskValue) << ", " << fmt(seconds_since(t0)) << " s";
  return {pass, d.str()};
}

// ---------------------------------------------------------------- 7

Outcome criterion_aggregate_first() {
  const WirelessModel model = build_model(load_generated("desk.json"), RiskSpec::avar(0.1));
  SecondStageOracle oracle(model.instance, SolveMode::Centralized);
  const auto rows = compare_aggregation(model, {0.1, 0.2, 0.3}, oracle);
  bool pass = true;
  std::ostringstream d;
  std::map<double, const AggregationRow*> agg;
  for (const auto& r : rows)
    if (r.method == "aggregate-first") agg[r.alpha] = &r;
  for (const auto& r : rows) {
    if (r.method != "evaluate-first") continue;
    const auto* a = agg.at(r.alpha);
    const bool ok = a->risk <= r.risk + kOrderSlack && a->meanProportion >= r.meanProportion - kOrderSlack;
    pass = pass && ok;
    d << " a=" << r.alpha << " " << fmt(a->risk) << " vs " << fmt(r.risk) << " [" << r.measure.substr(0, r.measure.find(' '))
      << "], proportion " << fmt(a->meanProportion) << " vs " << fmt(r.meanProportion) << (ok ? ";" : " (violated);");
  }
  return {pass, "aggregate-first vs evaluate-first:" + d.str()};
}

// ---------------------------------------------------------------- 8

Outcome criterion_oracles() {
  std::mt19937_64 rng(2028);
  std::uniform_real_distribution<double> level(0.01, 1.0), u(-1.0, 1.0);
  double tail = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto inst = random_vector_instance(rng, 1, 12);
    const auto d = DiscreteScalarDistribution(std::vector<double>(inst.x.data(), inst.x.data() + inst.x.size()), inst.p);
    const double a = level(rng);
    tail = std::max(tail, std::abs(evaluate_risk(RiskSpec::avar(a), d) - oracle::avar_sorted_tail(d.values(), d.probs(), a)));
  }

  int grids = 0, frontier_bad = 0;
  double vm = 0.0;
  for (int t = 0; t < 500; ++t) {
    auto inst = t % 2 ? multivariate_instance(rng) : random_vector_instance(rng, 3, 8);
    const DiscreteVectorDistribution x(inst.x, inst.p);
    if (candidate_grid_size(x) > kGridLimit) continue;
    ++grids;
    const double lvl = 0.05 + 0.9 * (u(rng) + 1.0) / 2.0;
    auto mine = p_efficient_points(x, lvl).points;
    auto ref = oracle::p_efficient_brute(inst.x, inst.p, lvl);
    auto lex = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
      return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    };
    std::sort(mine.begin(), mine.end(), lex);
    std::sort(ref.begin(), ref.end(), lex);
    if (mine != ref) ++frontier_bad;
    const Eigen::VectorXd c = random_simplex(rng, inst.x.cols());
    const double a = 0.05 + 0.9 * (u(rng) + 1.0) / 2.0;
    vm = std::max(vm, std::abs(vmavar_scalarized(x, a, AggregationWeights(c)).value -
                               oracle::vmavar_brute(inst.x, inst.p, a, c)));
  }

  int qp_bad = 0;
  double qp = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 20);
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
    Eigen::MatrixXd b(n, r);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
    QpProblem p;
    p.quadratic = b * b.transpose();
    p.linear = 2.0 * Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
    oracle::PgResult ref;
    if (t % 2 == 0) {
      p.lower = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng) - 1.0; });
      const Eigen::VectorXd hi = p.lower.array() + 0.1 + Eigen::VectorXd::NullaryExpr(n, [&] { return 1.0 + u(rng); }).array();
      p.ineqA = Eigen::MatrixXd::Identity(n, n);
      p.ineqB = hi;
      ref = oracle::projected_gradient_box(p.quadratic, p.linear, p.lower, hi);
    } else {
      p.lower = Eigen::VectorXd::Zero(n);
      p.eqA = Eigen::MatrixXd::Ones(1, n);
      p.eqB = Eigen::VectorXd::Constant(1, 1.0);
      ref = oracle::projected_gradient_simplex(p.quadratic, p.linear, 1.0);
    }
    const auto s = solve_qp(p);
    if (!s.optimal()) {
      ++qp_bad;
      continue;
    }
    const double gap = std::abs(s.objective - ref.objective) / (1.0 + std::abs(ref.objective));
    qp = std::max(qp, gap);
    if (gap > kQpTol) ++qp_bad;
  }
  const bool pass = tail <= kTailTol && frontier_bad == 0 && vm <= kTailTol && qp_bad == 0;
  return {pass, "AVaR vs sorted tail " + fmt(tail) + "; " + std::to_string(grids) + " grids: frontier mismatches " +
                    std::to_string(frontier_bad) + ", VMAVaR gap " + fmt(vm) + "; QP vs projected gradient worst " +
                    fmt(qp) + ", failures " + std::to_string(qp_bad) + "/200"};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, allowed;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc)
      only = parse_list(argv[++i]);
    else if (a == "--allow-fail" && i + 1 < argc)
      allowed = parse_list(argv[++i]);
    else {
      std::cerr << "usage: " << argv[0] << " [--only 1,2,...] [--allow-fail 4,...]\n";
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"axioms", criterion_axioms},
      {"dual consistency", criterion_duality},
      {"aggregation ordering", criterion_aggregation_ordering},
      {"multivariate orderings", criterion_multivariate},
      {"decomposition exactness", criterion_decomposition},
      {"distributed = centralized", criterion_distributed},
      {"aggregate-first vs evaluate-first", criterion_aggregate_first},
      {"component oracles", criterion_oracles}};

  int blocking = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool tolerated = !o.pass && allowed.count(id);
    if (!o.pass && !tolerated) ++blocking;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[k].first << "): " << o.detail
              << (tolerated ? "  [known failure, see decisions ledger]" : "") << std::endl;
  }
  return blocking == 0 ? 0 : 1;
}
