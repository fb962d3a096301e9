#include "sysrisk/risk_measure.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sysrisk/errors.hpp"

namespace sysrisk {

namespace {

constexpr double kAxiomTolerance = 1e-9;

std::vector<std::size_t> sorted_order(const std::vector<double>& values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return idx;
}

double avar(double alpha, const DiscreteScalarDistribution& dist) {
  if (alpha >= 1.0) return dist.mean();
  const double eta = value_at_risk(alpha, dist);
  double excess = 0.0;
  for (std::size_t s = 0; s < dist.size(); ++s)
    excess += dist.probs()[s] * std::max(dist.values()[s] - eta, 0.0);
  return eta + excess / alpha;
}

std::vector<double> avar_subgradient(double alpha, const DiscreteScalarDistribution& dist) {
  const auto& z = dist.values();
  const auto& p = dist.probs();
  std::vector<double> xi(z.size(), 1.0);
  if (alpha >= 1.0) return xi;
  const double eta = value_at_risk(alpha, dist);
  double above = 0.0;
  double at = 0.0;
  for (std::size_t s = 0; s < z.size(); ++s) {
    if (z[s] > eta) above += p[s];
    else if (z[s] == eta) at += p[s];
  }
  // The atom at the quantile absorbs the remaining dual mass.
  double atom_weight = at > 0.0 ? (1.0 - above / alpha) / at : 0.0;
  atom_weight = std::clamp(atom_weight, 0.0, 1.0 / alpha);
  for (std::size_t s = 0; s < z.size(); ++s) {
    if (z[s] > eta) xi[s] = 1.0 / alpha;
    else if (z[s] == eta) xi[s] = atom_weight;
    else xi[s] = 0.0;
  }
  return xi;
}

// ||(Z - t)_+||_order
double upper_norm(const DiscreteScalarDistribution& dist, double t, double order) {
  double acc = 0.0;
  for (std::size_t s = 0; s < dist.size(); ++s) {
    const double d = dist.values()[s] - t;
    if (d > 0.0) acc += dist.probs()[s] * std::pow(d, order);
  }
  return acc > 0.0 ? std::pow(acc, 1.0 / order) : 0.0;
}

// Weights ((Z - t)_+)^(order-1) / ||(Z - t)_+||^(order-1); zero when the norm vanishes.
std::vector<double> upper_weights(const DiscreteScalarDistribution& dist, double t, double order) {
  std::vector<double> h(dist.size(), 0.0);
  const double norm = upper_norm(dist, t, order);
  if (norm <= 0.0) return h;
  for (std::size_t s = 0; s < dist.size(); ++s) {
    const double d = dist.values()[s] - t;
    if (d > 0.0) h[s] = order == 1.0 ? 1.0 : std::pow(d / norm, order - 1.0);
  }
  return h;
}

struct HigherOrderSolution {
  double t;
  double value;
};

// min_t t + ||(Z - t)_+||_order / alpha. The objective is convex in t, so the
// sign of its right derivative is bisected until the bracket collapses.
HigherOrderSolution higher_order_minimize(double alpha, double order,
                                          const DiscreteScalarDistribution& dist) {
  const double hi0 = dist.max();
  // For t below the minimizer, t + (E[Z] - t) / alpha <= f(t*) <= max(Z).
  double lo = std::min(dist.min(), (dist.mean() - alpha * hi0) / (1.0 - alpha));
  double hi = hi0;
  auto derivative = [&](double t) {
    const double norm = upper_norm(dist, t, order);
    if (norm <= 0.0) return 1.0;
    double acc = 0.0;
    for (std::size_t s = 0; s < dist.size(); ++s) {
      const double d = dist.values()[s] - t;
      if (d > 0.0) acc += dist.probs()[s] * std::pow(d / norm, order - 1.0);
    }
    return 1.0 - acc / alpha;
  };
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (derivative(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  auto objective = [&](double t) { return t + upper_norm(dist, t, order) / alpha; };
  const double f_lo = objective(lo);
  const double f_hi = objective(hi);
  return f_lo < f_hi ? HigherOrderSolution{lo, f_lo} : HigherOrderSolution{hi, f_hi};
}

std::vector<double> higher_order_subgradient(double alpha, double order,
                                             const DiscreteScalarDistribution& dist) {
  const auto sol = higher_order_minimize(alpha, order, dist);
  std::vector<double> h = upper_weights(dist, sol.t, order);
  double mass = 0.0;
  for (std::size_t s = 0; s < h.size(); ++s) mass += dist.probs()[s] * h[s];
  if (mass <= 0.0) {
    // Minimizer at the maximum: all dual mass sits on the top atom.
    const double top = dist.max();
    double top_mass = 0.0;
    for (std::size_t s = 0; s < dist.size(); ++s)
      if (dist.values()[s] == top) top_mass += dist.probs()[s];
    for (std::size_t s = 0; s < dist.size(); ++s)
      h[s] = dist.values()[s] == top ? 1.0 / top_mass : 0.0;
    return h;
  }
  for (double& v : h) v /= mass;
  return h;
}

double parse_number(std::string_view text, std::string_view what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParameterError("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  return value;
}

}  // namespace

RiskSpec RiskSpec::expectation() { return {}; }

RiskSpec RiskSpec::avar(double alpha) {
  RiskSpec s{RiskKind::AVaR, alpha, 0.0, 1.0};
  s.validate();
  return s;
}

RiskSpec RiskSpec::higher_order(double alpha, double order) {
  RiskSpec s{RiskKind::HigherOrder, alpha, 0.0, order};
  s.validate();
  return s;
}

RiskSpec RiskSpec::mean_semideviation(double order, double kappa) {
  RiskSpec s{RiskKind::MeanSemideviation, 1.0, kappa, order};
  s.validate();
  return s;
}

RiskSpec RiskSpec::mean_avar(double kappa, double alpha) {
  RiskSpec s{RiskKind::MeanAvarMix, alpha, kappa, 1.0};
  s.validate();
  return s;
}

void RiskSpec::validate() const {
  auto check_alpha = [&] {
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw ParameterError("tail level alpha must lie in (0,1], got " + std::to_string(alpha));
  };
  auto check_kappa = [&] {
    if (!(kappa >= 0.0 && kappa <= 1.0))
      throw ParameterError("weight kappa must lie in [0,1], got " + std::to_string(kappa));
  };
  auto check_order = [&] {
    if (!(order >= 1.0) || !std::isfinite(order))
      throw ParameterError("norm order must be >= 1, got " + std::to_string(order));
  };
  switch (kind) {
    case RiskKind::Expectation:
      return;
    case RiskKind::AVaR:
      check_alpha();
      return;
    case RiskKind::HigherOrder:
      check_alpha();
      check_order();
      // The infimum over t is not attained at alpha = 1 for order > 1.
      if (alpha >= 1.0 && order > 1.0)
        throw ParameterError("higher-order measure needs alpha < 1 when order > 1");
      return;
    case RiskKind::MeanSemideviation:
      check_kappa();
      check_order();
      return;
    case RiskKind::MeanAvarMix:
      check_alpha();
      check_kappa();
      return;
  }
}

std::string_view to_string(RiskKind kind) {
  switch (kind) {
    case RiskKind::Expectation: return "Expectation";
    case RiskKind::AVaR: return "AVaR";
    case RiskKind::HigherOrder: return "HigherOrder";
    case RiskKind::MeanSemideviation: return "MeanSemideviation";
    case RiskKind::MeanAvarMix: return "MeanAvarMix";
  }
  return "?";
}

RiskKind risk_kind_from_string(std::string_view name) {
  for (RiskKind k : {RiskKind::Expectation, RiskKind::AVaR, RiskKind::HigherOrder,
                     RiskKind::MeanSemideviation, RiskKind::MeanAvarMix})
    if (to_string(k) == name) return k;
  throw ParameterError("unknown risk kind '" + std::string(name) + "'");
}

RiskSpec parse_risk_spec(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(':', start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  const std::string_view kind = parts.front();
  auto expect_params = [&](std::size_t n) {
    if (parts.size() != n + 1)
      throw ParameterError("risk kind '" + std::string(kind) + "' expects " + std::to_string(n) +
                           " parameter(s)");
  };
  if (kind == "expectation" || kind == "mean") {
    expect_params(0);
    return RiskSpec::expectation();
  }
  if (kind == "avar" || kind == "cvar") {
    expect_params(1);
    return RiskSpec::avar(parse_number(parts[1], "alpha"));
  }
  if (kind == "hor") {
    expect_params(2);
    return RiskSpec::higher_order(parse_number(parts[1], "alpha"), parse_number(parts[2], "order"));
  }
  if (kind == "msd") {
    expect_params(2);
    return RiskSpec::mean_semideviation(parse_number(parts[1], "order"),
                                        parse_number(parts[2], "kappa"));
  }
  if (kind == "mean-avar") {
    expect_params(2);
    return RiskSpec::mean_avar(parse_number(parts[1], "kappa"), parse_number(parts[2], "alpha"));
  }
  throw ParameterError("unknown risk kind '" + std::string(kind) + "'");
}

namespace {

// Shortest text that reads back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

}  // namespace

std::string format_risk_spec(const RiskSpec& spec) {
  switch (spec.kind) {
    case RiskKind::Expectation: return "expectation";
    case RiskKind::AVaR: return "avar:" + shortest(spec.alpha);
    case RiskKind::HigherOrder: return "hor:" + shortest(spec.alpha) + ':' + shortest(spec.order);
    case RiskKind::MeanSemideviation: return "msd:" + shortest(spec.order) + ':' + shortest(spec.kappa);
    case RiskKind::MeanAvarMix: return "mean-avar:" + shortest(spec.kappa) + ':' + shortest(spec.alpha);
  }
  return {};
}

double value_at_risk(double alpha, const DiscreteScalarDistribution& dist) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0,1]");
  const auto& z = dist.values();
  const auto& p = dist.probs();
  const auto idx = sorted_order(z);
  const double level = 1.0 - alpha;
  double cum = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    cum += p[idx[k]];
    // Accumulate the whole atom before testing the level.
    if (k + 1 < idx.size() && z[idx[k + 1]] == z[idx[k]]) continue;
    if (cum >= level - kProbabilityTolerance) return z[idx[k]];
  }
  return z[idx.back()];
}

double evaluate_risk(const RiskSpec& spec, const DiscreteScalarDistribution& dist) {
  spec.validate();
  switch (spec.kind) {
    case RiskKind::Expectation:
      return dist.mean();
    case RiskKind::AVaR:
      return avar(spec.alpha, dist);
    case RiskKind::HigherOrder:
      if (spec.order == 1.0) return avar(spec.alpha, dist);
      return higher_order_minimize(spec.alpha, spec.order, dist).value;
    case RiskKind::MeanSemideviation: {
      const double m = dist.mean();
      return m + spec.kappa * upper_norm(dist, m, spec.order);
    }
    case RiskKind::MeanAvarMix:
      return (1.0 - spec.kappa) * dist.mean() + spec.kappa * avar(spec.alpha, dist);
  }
  throw UnsupportedError("unsupported risk kind");
}

std::vector<double> risk_subgradient(const RiskSpec& spec, const DiscreteScalarDistribution& dist) {
  spec.validate();
  switch (spec.kind) {
    case RiskKind::Expectation:
      return std::vector<double>(dist.size(), 1.0);
    case RiskKind::AVaR:
      return avar_subgradient(spec.alpha, dist);
    case RiskKind::HigherOrder:
      if (spec.order == 1.0) return avar_subgradient(spec.alpha, dist);
      return higher_order_subgradient(spec.alpha, spec.order, dist);
    case RiskKind::MeanSemideviation: {
      // xi = 1 + kappa (h - E[h]) with h the normalized upper-deviation weights.
      const double m = dist.mean();
      std::vector<double> h = upper_weights(dist, m, spec.order);
      double eh = 0.0;
      for (std::size_t s = 0; s < h.size(); ++s) eh += dist.probs()[s] * h[s];
      std::vector<double> xi(h.size());
      for (std::size_t s = 0; s < h.size(); ++s)
        xi[s] = std::max(0.0, 1.0 + spec.kappa * (h[s] - eh));
      return xi;
    }
    case RiskKind::MeanAvarMix: {
      std::vector<double> xi = avar_subgradient(spec.alpha, dist);
      for (double& v : xi) v = (1.0 - spec.kappa) + spec.kappa * v;
      return xi;
    }
  }
  throw UnsupportedError("unsupported risk kind");
}

AxiomReport check_axioms(const RiskSpec& spec, int trials, std::uint64_t seed) {
  spec.validate();
  AxiomReport report;
  report.trials = trials;
  report.checks = {{"convexity"}, {"monotonicity"}, {"positive homogeneity"}, {"translation"}};

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size_dist(1, 8);
  std::uniform_real_distribution<double> value_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto record = [&](std::size_t which, double violation, const std::string& detail) {
    auto& c = report.checks[which];
    c.worst_violation = std::max(c.worst_violation, violation);
    if (violation > kAxiomTolerance) {
      c.passed = false;
      if (report.passed) report.counterexample = c.name + ": " + detail;
      report.passed = false;
    }
  };
  auto describe = [](const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ')';
    return os.str();
  };

  for (int trial = 0; trial < trials; ++trial) {
    const int n = size_dist(rng);
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (double& p : probs) p = 0.05 + unit(rng);
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (double& p : probs) p /= total;
    std::vector<double> a(probs.size());
    std::vector<double> b(probs.size());
    for (std::size_t s = 0; s < probs.size(); ++s) {
      a[s] = value_dist(rng);
      b[s] = value_dist(rng);
    }
    const DiscreteScalarDistribution za(a, probs);
    const double ra = evaluate_risk(spec, za);

    const double lambda = unit(rng);
    std::vector<double> mix(a.size());
    for (std::size_t s = 0; s < a.size(); ++s) mix[s] = lambda * a[s] + (1.0 - lambda) * b[s];
    const double rb = evaluate_risk(spec, za.with_values(b));
    const double rmix = evaluate_risk(spec, za.with_values(mix));
    record(0, rmix - (lambda * ra + (1.0 - lambda) * rb), "Z1=" + describe(a) + " Z2=" + describe(b));

    std::vector<double> bigger(a.size());
    for (std::size_t s = 0; s < a.size(); ++s) bigger[s] = a[s] + std::abs(b[s]) * unit(rng);
    record(1, ra - evaluate_risk(spec, za.with_values(bigger)),
           "Z=" + describe(a) + " Z'=" + describe(bigger));

    const double t = 0.1 + 9.9 * unit(rng);
    std::vector<double> scaled(a.size());
    for (std::size_t s = 0; s < a.size(); ++s) scaled[s] = t * a[s];
    record(2, std::abs(evaluate_risk(spec, za.with_values(scaled)) - t * ra),
           "Z=" + describe(a) + " t=" + std::to_string(t));

    const double shift = value_dist(rng);
    std::vector<double> shifted(a.size());
    for (std::size_t s = 0; s < a.size(); ++s) shifted[s] = a[s] + shift;
    record(3, std::abs(evaluate_risk(spec, za.with_values(shifted)) - (ra + shift)),
           "Z=" + describe(a) + " a=" + std::to_string(shift));
  }
  return report;
}

}  // namespace sysrisk
