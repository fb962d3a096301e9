#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sysrisk/cli_commands.hpp"

int main(int argc, char** argv) {
  using namespace sysrisk;
  CLI::App app{"Systemic risk measures and risk-averse two-stage decomposition"};
  app.require_subcommand(1);

  std::string config, instance, risk = "avar:0.1", mode = "centralized", out, alpha = "0.1,0.2,0.3";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> solution;

  auto* gen = app.add_subcommand("generate", "Sample a wireless instance from a config file");
  gen->add_option("--config", config, "config JSON")->required();
  gen->add_option("--out", out, "instance JSON to write")->required();
  gen->add_option("--seed", seed, "overrides the config seed");

  auto* solve = app.add_subcommand("solve", "Risk-averse two-stage solve of an instance");
  solve->add_option("--instance", instance, "instance JSON")->required();
  solve->add_option("--risk", risk, "expectation | avar:A | hor:A:P | msd:P:K | mean-avar:K:A")
      ->capture_default_str();
  solve->add_option("--mode", mode, "centralized | distributed")->capture_default_str();
  solve->add_option("--out", out, "output directory")->required();

  auto* agg = app.add_subcommand("compare-aggregation", "Aggregate-first vs evaluate-first");
  agg->add_option("--instance", instance, "instance JSON")->required();
  agg->add_option("--alpha", alpha, "comma-separated tail levels")->capture_default_str();
  agg->add_option("--mode", mode, "centralized | distributed")->capture_default_str();
  agg->add_option("--out", out, "output directory")->required();

  auto* mv = app.add_subcommand("compare-multivariate", "AVaR, VMAVaR and MAVaR at a fixed decision");
  mv->add_option("--instance", instance, "instance JSON")->required();
  mv->add_option("--solution", solution, "solution.json from solve; solved here when omitted");
  mv->add_option("--alpha", alpha, "comma-separated tail levels")->capture_default_str();
  mv->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      cmd_generate(config, out, seed, std::cout);
    } else if (solve->parsed()) {
      cmd_solve(instance, risk, solve_mode_from_string(mode), out, std::cout);
    } else if (agg->parsed()) {
      cmd_compare_aggregation(instance, parse_alpha_list(alpha), solve_mode_from_string(mode), out, std::cout);
    } else if (mv->parsed()) {
      cmd_compare_multivariate(instance, solution, parse_alpha_list(alpha), out, std::cout);
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
