#include "sysrisk/cli_commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <iomanip>
#include <random>
#include <sstream>

#include "sysrisk/multivariate.hpp"
#include "sysrisk/systemic.hpp"

namespace sysrisk {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_json(const ordered_json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::Vector2d point(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw InputError("expected a 2-vector");
  return {v[0], v[1]};
}

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

ordered_json manifest(const std::string& command, const WirelessInstance& inst, ordered_json args) {
  ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["created"] = timestamp();
  m["seed"] = inst.seed;
  m["config"] = config_to_json(inst.config);
  m["arguments"] = std::move(args);
  return m;
}

std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

ordered_json config_to_json(const WirelessConfig& c) {
  ordered_json j;
  j["numRobots"] = c.numRobots;
  j["numScenarios"] = c.numScenarios;
  j["budget"] = c.budget;
  j["mapBounds"] = {c.mapLow, c.mapHigh};
  j["innerRadius"] = c.innerRadius;
  j["outerRadius"] = c.outerRadius;
  j["sourceMean"] = {c.sourceMean.x(), c.sourceMean.y()};
  j["sourceCov"] = {{c.sourceCov(0, 0), c.sourceCov(0, 1)}, {c.sourceCov(1, 0), c.sourceCov(1, 1)}};
  j["infoScale"] = c.infoScale;
  j["capacity"] = c.capacity;
  j["lossWeights"] = {c.c1, c.c2};
  if (c.robotWeights.size()) j["robotWeights"] = vec(c.robotWeights);
  if (c.bigM) j["bigM"] = *c.bigM;
  j["candidates"] = json::array();
  for (const auto& p : c.candidates) j["candidates"].push_back({p.x(), p.y()});
  if (c.seed) j["seed"] = *c.seed;
  j["maxResamples"] = c.maxResamples;
  return j;
}

WirelessConfig config_from_json(const json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  WirelessConfig c = j.value("preset", std::string("desk")) == "paper" ? WirelessConfig::paper_scale()
                                                                        : WirelessConfig::desk_scale();
  try {
    if (j.contains("preset") && j["preset"] != "paper" && j["preset"] != "desk")
      throw InputError("preset must be \"desk\" or \"paper\"");
    // Negative counts are rejected before the unsigned conversion.
    for (const char* key : {"numRobots", "numScenarios", "budget", "maxResamples"})
      if (j.contains(key) && j[key].get<long long>() < 0) throw ParameterError(std::string(key) + " is negative");
    c.numRobots = j.value("numRobots", c.numRobots);
    c.numScenarios = j.value("numScenarios", c.numScenarios);
    c.budget = j.value("budget", c.budget);
    if (j.contains("mapBounds")) {
      const auto b = j["mapBounds"].get<std::vector<double>>();
      if (b.size() != 2) throw InputError("mapBounds must be [low, high]");
      c.mapLow = b[0];
      c.mapHigh = b[1];
    }
    c.innerRadius = j.value("innerRadius", c.innerRadius);
    c.outerRadius = j.value("outerRadius", c.outerRadius);
    if (j.contains("sourceMean")) c.sourceMean = point(j["sourceMean"]);
    if (j.contains("sourceCov")) {
      const auto m = j["sourceCov"].get<std::vector<std::vector<double>>>();
      if (m.size() != 2 || m[0].size() != 2 || m[1].size() != 2) throw InputError("sourceCov must be 2x2");
      c.sourceCov << m[0][0], m[0][1], m[1][0], m[1][1];
    }
    c.infoScale = j.value("infoScale", c.infoScale);
    c.capacity = j.value("capacity", c.capacity);
    if (j.contains("lossWeights")) {
      const auto w = j["lossWeights"].get<std::vector<double>>();
      if (w.size() != 2) throw InputError("lossWeights must be [c1, c2]");
      c.c1 = w[0];
      c.c2 = w[1];
    }
    if (j.contains("robotWeights")) c.robotWeights = to_eigen(j["robotWeights"].get<std::vector<double>>());
    if (j.contains("bigM")) c.bigM = j["bigM"].get<double>();
    if (j.contains("candidates")) {
      c.candidates.clear();
      for (const auto& p : j["candidates"]) c.candidates.push_back(point(p));
    }
    if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    c.maxResamples = j.value("maxResamples", c.maxResamples);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

WirelessConfig load_config(const std::string& path) { return config_from_json(read_json(path)); }

ordered_json instance_to_json(const WirelessInstance& inst) {
  ordered_json j;
  j["config"] = config_to_json(inst.config);
  j["seed"] = inst.seed;
  j["resampled"] = inst.resampled;
  j["scenarios"] = json::array();
  for (const auto& sc : inst.scenarios) {
    ordered_json s;
    s["positions"] = json::array();
    for (const auto& p : sc.positions) s["positions"].push_back({p.x(), p.y()});
    s["rate"] = json::array();
    for (Eigen::Index r = 0; r < sc.rate.rows(); ++r) s["rate"].push_back(vec(sc.rate.row(r).transpose()));
    s["info"] = vec(sc.info);
    j["scenarios"].push_back(std::move(s));
  }
  return j;
}

WirelessInstance instance_from_json(const json& j) {
  WirelessInstance inst;
  try {
    inst.config = config_from_json(j.at("config"));
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.resampled = j.value("resampled", std::size_t{0});
    const std::size_t k0 = inst.config.numCandidates();
    for (const auto& s : j.at("scenarios")) {
      WirelessScenario sc;
      for (const auto& p : s.at("positions")) sc.positions.push_back(point(p));
      const auto jn = sc.positions.size();
      const auto rows = s.at("rate").get<std::vector<std::vector<double>>>();
      if (rows.size() != jn) throw InputError("rate matrix has wrong number of rows");
      sc.rate.resize(static_cast<Eigen::Index>(jn), static_cast<Eigen::Index>(jn + k0));
      for (std::size_t r = 0; r < jn; ++r) {
        if (rows[r].size() != jn + k0) throw InputError("rate matrix has wrong number of columns");
        sc.rate.row(static_cast<Eigen::Index>(r)) = to_eigen(rows[r]).transpose();
      }
      sc.info = to_eigen(s.at("info").get<std::vector<double>>());
      if (static_cast<std::size_t>(sc.info.size()) != jn) throw InputError("info vector has wrong length");
      if (jn != inst.config.numRobots) throw InputError("scenario robot count differs from the config");
      inst.scenarios.push_back(std::move(sc));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("instance: ") + e.what());
  }
  if (inst.scenarios.empty()) throw InputError("instance has no scenarios");
  return inst;
}

WirelessInstance load_instance(const std::string& path) { return instance_from_json(read_json(path)); }

ordered_json solution_to_json(const SolutionFile& s) {
  ordered_json j;
  j["z"] = vec(s.z);
  j["riskValue"] = s.riskValue;
  j["risk"] = s.risk;
  j["mode"] = s.mode;
  j["scenarioValues"] = s.scenarioValues;
  return j;
}

SolutionFile load_solution(const std::string& path) {
  const json j = read_json(path);
  SolutionFile s;
  try {
    s.z = to_eigen(j.at("z").get<std::vector<double>>());
    s.riskValue = j.value("riskValue", 0.0);
    s.risk = j.value("risk", std::string());
    s.mode = j.value("mode", std::string());
    s.scenarioValues = j.value("scenarioValues", std::vector<double>{});
  } catch (const json::exception& e) {
    throw InputError(std::string("solution: ") + e.what());
  }
  for (Eigen::Index k = 0; k < s.z.size(); ++k)
    if (s.z(k) != 0.0 && s.z(k) != 1.0) throw InputError("solution z must be binary");
  return s;
}

void cmd_generate(const std::string& configPath, const std::string& out, std::optional<std::uint64_t> seed,
                  std::ostream& log) {
  WirelessConfig cfg = load_config(configPath);
  if (seed) cfg.seed = seed;
  if (!cfg.seed) {
    std::random_device rd;
    cfg.seed = (std::uint64_t{rd()} << 32) | rd();
  }
  const WirelessInstance inst = generate_instance(cfg);
  std::ofstream f(out);
  if (!f) throw InputError("cannot write " + out);
  f << instance_to_json(inst).dump() << '\n';
  log << "seed " << inst.seed << '\n'
      << "wrote " << out << " (" << inst.scenarios.size() << " scenarios, " << inst.resampled
      << " disconnected draws resampled)\n";
}

TwoStageResult cmd_solve(const std::string& instancePath, const std::string& risk, SolveMode mode,
                         const std::string& outDir, std::ostream& log) {
  const RiskSpec spec = parse_risk_spec(risk);
  const WirelessInstance inst = load_instance(instancePath);
  const WirelessModel model = build_model(inst, spec);
  const auto dir = prepare_dir(outDir);

  TwoStageOptions opt;
  opt.mode = mode;
  SecondStageOracle oracle(model.instance, mode, opt.adal);
  auto write_runs = [&] {
    if (mode != SolveMode::Distributed) return;
    std::ofstream f(dir / "adal_runs.csv");
    f << "scenario,z,iterations,coupling_residual,consistency_residual,value\n" << std::setprecision(12);
    for (const auto& r : oracle.adal_runs())
      f << r.scenario << ',' << format_z(r.z) << ',' << r.iterations << ',' << r.couplingResidual << ','
        << r.consistencyResidual << ',' << r.value << '\n';
  };
  ordered_json args{{"instance", instancePath}, {"risk", format_risk_spec(spec)}, {"mode", to_string(mode)}};
  write_json(manifest("solve", inst, args), (dir / "manifest.json").string());

  TwoStageResult res;
  try {
    res = solve_two_stage(model.instance, opt, &oracle);
  } catch (const TwoStageNotConverged& e) {
    write_trace_csv(e.trace(), (dir / "trace.csv").string());
    write_runs();
    throw;
  } catch (const NotConvergedError&) {
    write_runs();
    throw;
  }
  write_trace_csv(res.trace, (dir / "trace.csv").string());
  write_runs();
  SolutionFile sol{res.z, res.riskValue, format_risk_spec(spec), std::string(to_string(mode)), res.scenarioValues};
  write_json(solution_to_json(sol), (dir / "solution.json").string());
  log << "z " << format_z(res.z) << "  risk " << std::setprecision(10) << res.riskValue << "  iterations "
      << res.trace.size() << '\n';
  return res;
}

namespace {

double mean_of(const std::vector<double>& v, const std::vector<double>& p) {
  double m = 0.0;
  for (std::size_t s = 0; s < v.size(); ++s) m += p[s] * v[s];
  return m;
}

}  // namespace

std::vector<AggregationRow> compare_aggregation(const WirelessModel& model, const std::vector<double>& alphas,
                                                SecondStageOracle& oracle) {
  const auto probs = model.instance.probabilities();
  const AggregationWeights w(model.config.weights());
  const auto configs = feasible_configurations(model.instance.numFirstStage, model.instance.budget);
  std::vector<Eigen::MatrixXd> losses;
  for (const auto& z : configs) losses.push_back(loss_matrix(model, oracle, z));

  std::vector<AggregationRow> rows;
  for (double a : alphas) {
    TwoStageInstance inst = model.instance;
    inst.riskSpec = RiskSpec::avar(a);
    TwoStageOptions opt;
    opt.mode = oracle.mode();
    const TwoStageResult agg = solve_two_stage(inst, opt, &oracle);
    AggregationRow row{a, "aggregate-first", format_risk_spec(inst.riskSpec), agg.z, agg.riskValue, 0.0, {}};
    row.proportions = delivered_proportions(model, oracle, agg.z);
    row.meanProportion = mean_of(row.proportions, probs);
    rows.push_back(std::move(row));

    const std::vector<RiskSpec> agents(static_cast<std::size_t>(w.dimension()), RiskSpec::avar(a));
    for (const RiskSpec& rho0 : {RiskSpec::mean_avar(0.5, a), RiskSpec::mean_semideviation(1.0, 0.5)}) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < configs.size(); ++c) {
        const DiscreteVectorDistribution x(losses[c], probs);
        const double v = systemic_risk_aggregated(rho0, agents, w, x);
        if (v < best - 1e-12 * (1.0 + std::abs(v))) {
          best = v;
          arg = c;
        }
      }
      AggregationRow ev{a, "evaluate-first", format_risk_spec(rho0) + " of " + format_risk_spec(RiskSpec::avar(a)), configs[arg],
                        best, 0.0, {}};
      ev.proportions = delivered_proportions(model, oracle, configs[arg]);
      ev.meanProportion = mean_of(ev.proportions, probs);
      rows.push_back(std::move(ev));
    }
  }
  return rows;
}

std::vector<AggregationRow> cmd_compare_aggregation(const std::string& instancePath,
                                                    const std::vector<double>& alphas, SolveMode mode,
                                                    const std::string& outDir, std::ostream& log) {
  const WirelessInstance inst = load_instance(instancePath);
  const WirelessModel model = build_model(inst, RiskSpec::avar(alphas.front()));
  const auto dir = prepare_dir(outDir);
  ordered_json args{{"instance", instancePath}, {"alpha", alphas}, {"mode", to_string(mode)}};
  write_json(manifest("compare-aggregation", inst, args), (dir / "manifest.json").string());

  SecondStageOracle oracle(model.instance, mode);
  const auto rows = compare_aggregation(model, alphas, oracle);
  std::ofstream f(dir / "aggregation.csv");
  std::ofstream g(dir / "proportions.csv");
  f << "alpha,method,measure,z,risk,mean_proportion\n" << std::setprecision(12);
  g << "alpha,method,measure,scenario,proportion\n" << std::setprecision(12);
  for (const auto& r : rows) {
    f << r.alpha << ',' << r.method << ',' << r.measure << ',' << format_z(r.z) << ',' << r.risk << ','
      << r.meanProportion << '\n';
    for (std::size_t s = 0; s < r.proportions.size(); ++s)
      g << r.alpha << ',' << r.method << ',' << r.measure << ',' << s << ',' << r.proportions[s] << '\n';
    log << "alpha " << r.alpha << "  " << r.method << "  " << r.measure << "  z " << format_z(r.z) << "  risk "
        << r.risk << "  mean proportion " << r.meanProportion << '\n';
  }
  return rows;
}

DiscreteVectorDistribution loss_components(const WirelessModel& model, SecondStageOracle& oracle,
                                           const Eigen::VectorXd& z) {
  const auto sols = oracle.solve_all(z);
  const Eigen::VectorXd w = model.config.weights();
  Eigen::MatrixXd v(static_cast<Eigen::Index>(sols.size()), 2);
  for (std::size_t s = 0; s < sols.size(); ++s) {
    const auto& layout = model.assembled[s].layout;
    double y = 0.0, miss = 0.0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const auto& node = sols[s]->nodes[i];
      y += w(static_cast<Eigen::Index>(i)) * node(layout[i].y());
      miss += w(static_cast<Eigen::Index>(i)) * (1.0 - node(layout[i].x()));
    }
    v(static_cast<Eigen::Index>(s), 0) = y;
    v(static_cast<Eigen::Index>(s), 1) = miss;
  }
  return {v, model.instance.probabilities()};
}

std::vector<MultivariateRow> compare_multivariate(const DiscreteVectorDistribution& losses,
                                                  const AggregationWeights& c, const std::vector<double>& alphas) {
  std::vector<MultivariateRow> rows;
  const DiscreteScalarDistribution total = losses.scalarize(c.values());
  for (double a : alphas) {
    MultivariateRow r;
    r.alpha = a;
    r.avar = evaluate_risk(RiskSpec::avar(a), total);
    r.vmavar = vmavar_scalarized(losses, a, c).value;
    try {
      r.mavar = mavar(losses, 1.0 - a, c);
    } catch (const DegenerateEventError&) {
      r.degenerate = true;
      r.mavar = std::nan("");
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<MultivariateRow> cmd_compare_multivariate(const std::string& instancePath,
                                                      const std::optional<std::string>& solutionPath,
                                                      const std::vector<double>& alphas, const std::string& outDir,
                                                      std::ostream& log) {
  const WirelessInstance inst = load_instance(instancePath);
  const double a_min = *std::min_element(alphas.begin(), alphas.end());
  const WirelessModel model = build_model(inst, RiskSpec::avar(a_min));
  const auto dir = prepare_dir(outDir);
  SecondStageOracle oracle(model.instance, SolveMode::Centralized);

  Eigen::VectorXd z;
  if (solutionPath) {
    z = load_solution(*solutionPath).z;
    if (z.size() != static_cast<Eigen::Index>(model.instance.numFirstStage))
      throw InputError("solution z does not match the instance");
  } else {
    z = solve_two_stage(model.instance, {}, &oracle).z;
  }
  ordered_json args{{"instance", instancePath}, {"solution", solutionPath ? *solutionPath : ""}, {"alpha", alphas},
                    {"z", format_z(z)}};
  write_json(manifest("compare-multivariate", inst, args), (dir / "manifest.json").string());

  const AggregationWeights c(Eigen::Vector2d(model.config.c1, model.config.c2));
  const auto rows = compare_multivariate(loss_components(model, oracle, z), c, alphas);
  std::ofstream f(dir / "multivariate.csv");
  f << "alpha,avar,vmavar,mavar,avar_smallest,degenerate\n" << std::setprecision(12);
  for (const auto& r : rows) {
    const bool smallest = !r.degenerate && r.avar <= r.vmavar + 1e-12 && r.avar <= r.mavar + 1e-12;
    f << r.alpha << ',' << r.avar << ',' << r.vmavar << ',' << r.mavar << ',' << (smallest ? 1 : 0) << ','
      << (r.degenerate ? 1 : 0) << '\n';
    log << "alpha " << r.alpha << "  AVaR " << r.avar << "  VMAVaR " << r.vmavar << "  MAVaR " << r.mavar
        << (r.degenerate ? "  (degenerate)" : smallest ? "" : "  AVaR not smallest") << '\n';
  }
  return rows;
}

std::vector<double> parse_alpha_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double a = 0.0;
    try {
      a = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ParameterError("bad alpha '" + item + "'");
    }
    if (used != item.size() || !(a > 0.0 && a < 1.0)) throw ParameterError("alpha must lie in (0,1): '" + item + "'");
    out.push_back(a);
  }
  if (out.empty()) throw ParameterError("empty alpha list");
  return out;
}

}  // namespace sysrisk
