#include "sysrisk/two_stage.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "sysrisk/distribution.hpp"
#include "sysrisk/parallel.hpp"

namespace sysrisk {

double FirstStageCost::operator()(const Eigen::VectorXd& z) const {
  return constant + (linear.size() ? linear.dot(z) : 0.0);
}

std::vector<double> TwoStageInstance::probabilities() const {
  std::vector<double> p;
  for (const auto& sc : scenarios) p.push_back(sc.probability);
  return p;
}

void TwoStageInstance::validate() const {
  if (scenarios.empty()) throw InputError("two-stage instance has no scenarios");
  if (!(budget >= 1 && budget < numFirstStage))
    throw ParameterError("budget must satisfy 1 <= K < K0");
  if (numFirstStage > 20) throw ParameterError("master enumeration supports at most 20 first-stage variables");
  if (firstStageCost.linear.size() != 0 &&
      firstStageCost.linear.size() != static_cast<Eigen::Index>(numFirstStage))
    throw InputError("first-stage cost has wrong length");
  riskSpec.validate();
  double total = 0.0;
  for (const auto& sc : scenarios) {
    sc.validate();
    if (!sc.links.empty() && sc.firstStageDimension() != static_cast<Eigen::Index>(numFirstStage))
      throw InputError("scenario link rows disagree with the first-stage dimension");
    total += sc.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("scenario probabilities do not sum to one");
}

std::vector<Eigen::VectorXd> feasible_configurations(std::size_t k0, std::size_t budget) {
  std::vector<Eigen::VectorXd> out;
  const auto n = static_cast<Eigen::Index>(k0);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k0); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > budget) continue;
    Eigen::VectorXd z(n);
    // Most significant bit first, so counting order is lexicographic order.
    for (Eigen::Index k = 0; k < n; ++k) z(k) = static_cast<double>((mask >> (n - 1 - k)) & 1u);
    out.push_back(z);
  }
  return out;
}

CutPool::CutPool(std::vector<double> probabilities)
    : probs_(std::move(probabilities)), objective_(probs_.size()) {
  if (probs_.empty()) throw InputError("cut pool needs at least one scenario");
  risk_.emplace_back(probs_.size(), 1.0);
}

void CutPool::add_risk_cut(std::vector<double> mu) {
  if (mu.size() != probs_.size()) throw ContractError("risk cut has wrong length");
  double total = 0.0;
  for (std::size_t s = 0; s < mu.size(); ++s) {
    if (!(mu[s] >= -1e-12)) throw ContractError("risk cut has a negative weight");
    total += probs_[s] * mu[s];
  }
  if (std::abs(total - 1.0) > 1e-10) throw ContractError("risk cut weights are not normalized");
  risk_.push_back(std::move(mu));
}

void CutPool::add_objective_cut(std::size_t scenario, ObjectiveCut cut) {
  if (scenario >= objective_.size()) throw ContractError("objective cut for an unknown scenario");
  objective_[scenario].push_back(std::move(cut));
}

MasterSolution solve_master(const TwoStageInstance& instance, const CutPool& cuts) {
  if (cuts.riskCuts().empty()) throw ContractError("master needs at least one risk cut");
  const std::size_t s_count = cuts.probabilities().size();
  const auto& p = cuts.probabilities();
  MasterSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd q(static_cast<Eigen::Index>(s_count));
  for (const auto& z : feasible_configurations(instance.numFirstStage, instance.budget)) {
    for (std::size_t s = 0; s < s_count; ++s) {
      double v = instance.lowerBound;
      for (const auto& cut : cuts.objectiveCuts()[s]) v = std::max(v, cut.at(z));
      q(static_cast<Eigen::Index>(s)) = v;
    }
    double eta = -std::numeric_limits<double>::infinity();
    for (const auto& mu : cuts.riskCuts()) {
      double e = 0.0;
      for (std::size_t s = 0; s < s_count; ++s) e += p[s] * mu[s] * q(static_cast<Eigen::Index>(s));
      eta = std::max(eta, e);
    }
    const double obj = instance.firstStageCost(z) + eta;
    if (obj < best.objective - 1e-12 * (1.0 + std::abs(obj))) {
      best.z = z;
      best.eta = eta;
      best.q = q;
      best.objective = obj;
    }
  }
  return best;
}

std::string_view to_string(SolveMode mode) {
  return mode == SolveMode::Centralized ? "centralized" : "distributed";
}

SolveMode solve_mode_from_string(std::string_view text) {
  if (text == "centralized") return SolveMode::Centralized;
  if (text == "distributed") return SolveMode::Distributed;
  throw ParameterError("unknown mode '" + std::string(text) + "' (centralized or distributed)");
}

SecondStageOracle::SecondStageOracle(const TwoStageInstance& instance, SolveMode mode, AdalConfig adal)
    : instance_(instance), mode_(mode), adal_(adal), warm_(instance.numScenarios()) {}

const ScenarioSolution& SecondStageOracle::solve(std::size_t scenario, const Eigen::VectorXd& z) {
  if (scenario >= instance_.numScenarios()) throw InputError("scenario index out of range");
  Key key{scenario, {}};
  for (Eigen::Index k = 0; k < z.size(); ++k) key.second.push_back(static_cast<int>(std::lround(z(k))));
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return *it->second;
  }
  const auto& sc = instance_.scenarios[scenario];
  auto sol = std::make_unique<ScenarioSolution>();
  if (mode_ == SolveMode::Centralized) {
    *sol = solve_second_stage_centralized(sc, z);
  } else {
    std::unique_ptr<AdalState> warm;
    {
      std::lock_guard lock(mutex_);
      if (warm_[scenario]) warm = std::make_unique<AdalState>(*warm_[scenario]);
    }
    AdalResult r = run_adal(sc, adal_, z, warm.get());
    if (!r.converged)
      throw NotConvergedError("ADAL did not converge on scenario " + std::to_string(scenario) + " at z = " +
                              format_z(z) + " after " + std::to_string(r.state.iteration) + " iterations");
    AdalRunRecord rec{scenario, z, r.state.iteration, r.state.couplingResidual.back(),
                      r.state.consistencyResidual.back(), r.solution.value};
    *sol = std::move(r.solution);
    std::lock_guard lock(mutex_);
    runs_.push_back(std::move(rec));
    auto kept = std::make_unique<AdalState>(std::move(r.state));
    kept->couplingResidual = {};
    kept->consistencyResidual = {};
    kept->stepResidual = {};
    kept->objective = {};
    warm_[scenario] = std::move(kept);
  }
  std::lock_guard lock(mutex_);
  auto [it, inserted] = cache_.emplace(std::move(key), std::move(sol));
  return *it->second;
}

std::vector<const ScenarioSolution*> SecondStageOracle::solve_all(const Eigen::VectorXd& z) {
  std::vector<const ScenarioSolution*> out(instance_.numScenarios());
  parallel_for(out.size(), [&](std::size_t s) { out[s] = &solve(s, z); });
  return out;
}

std::size_t SecondStageOracle::solves() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

std::vector<AdalRunRecord> SecondStageOracle::adal_runs() const {
  std::lock_guard lock(mutex_);
  return runs_;
}

namespace {

double risk_at(const TwoStageInstance& instance, const std::vector<double>& values, const Eigen::VectorXd& z) {
  return instance.firstStageCost(z) +
         evaluate_risk(instance.riskSpec, DiscreteScalarDistribution(values, instance.probabilities()));
}

}  // namespace

TwoStageResult solve_two_stage(const TwoStageInstance& instance, const TwoStageOptions& options,
                               SecondStageOracle* oracle) {
  instance.validate();
  if (!(options.epsMaster > 0.0)) throw ParameterError("epsMaster must be positive");
  if (options.maxIterations <= 0) throw ParameterError("maxIterations must be positive");
  std::unique_ptr<SecondStageOracle> own;
  if (!oracle) {
    own = std::make_unique<SecondStageOracle>(instance, options.mode, options.adal);
    oracle = own.get();
  }

  const auto probs = instance.probabilities();
  CutPool cuts(probs);
  TwoStageResult res;
  double best = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= options.maxIterations; ++t) {
    const MasterSolution master = solve_master(instance, cuts);
    const auto sols = oracle->solve_all(master.z);

    TwoStageIteration it;
    it.iteration = t;
    it.z = master.z;
    it.eta = master.objective;
    for (const auto* s : sols) it.values.push_back(s->value);
    const DiscreteScalarDistribution dist(it.values, probs);
    it.rho = instance.firstStageCost(master.z) + evaluate_risk(instance.riskSpec, dist);
    res.trace.push_back(it);

    if (it.rho < best) {
      best = it.rho;
      res.z = master.z;
      res.riskValue = it.rho;
      res.scenarioValues = it.values;
    }
    if (it.rho - it.eta <= options.epsMaster) {
      res.converged = true;
      return res;
    }
    cuts.add_risk_cut(risk_subgradient(instance.riskSpec, dist));
    for (std::size_t s = 0; s < sols.size(); ++s)
      cuts.add_objective_cut(s, {sols[s]->value, sols[s]->subgradient, master.z});
  }
  throw TwoStageNotConverged("two-stage decomposition hit the iteration cap of " +
                                 std::to_string(options.maxIterations),
                             res.trace);
}

EnumerationResult enumerate_first_stage(const TwoStageInstance& instance, SecondStageOracle& oracle) {
  instance.validate();
  EnumerationResult res;
  res.riskValue = std::numeric_limits<double>::infinity();
  res.configurations = feasible_configurations(instance.numFirstStage, instance.budget);
  for (const auto& z : res.configurations) {
    std::vector<double> values;
    for (const auto* s : oracle.solve_all(z)) values.push_back(s->value);
    const double v = risk_at(instance, values, z);
    res.values.push_back(v);
    if (v < res.riskValue - 1e-12 * (1.0 + std::abs(v))) {
      res.riskValue = v;
      res.z = z;
    }
  }
  return res;
}

std::string format_z(const Eigen::VectorXd& z) {
  std::string s;
  for (Eigen::Index k = 0; k < z.size(); ++k) s += z(k) > 0.5 ? '1' : '0';
  return s;
}

void write_trace_csv(const std::vector<TwoStageIteration>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "iteration,eta,rho,z";
  const std::size_t s_count = trace.empty() ? 0 : trace.front().values.size();
  for (std::size_t s = 0; s < s_count; ++s) out << ",value_" << s;
  out << '\n' << std::setprecision(12);
  for (const auto& it : trace) {
    out << it.iteration << ',' << it.eta << ',' << it.rho << ',' << format_z(it.z);
    for (double v : it.values) out << ',' << v;
    out << '\n';
  }
}

}  // namespace sysrisk
