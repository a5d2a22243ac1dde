// Experiment runner: cavlab run|growth <config.json>, cavlab a2 <spec.json>, cavlab list-scenarios.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cavlab/experiment.hpp"

namespace {

using namespace cavlab;

int run_config(const std::string& path, const std::string& out_flag, const std::optional<std::uint64_t>& seed,
               const std::optional<int>& threads, bool growth_only) {
  ExperimentConfig c = load_config(path);
  if (seed) c.seed = *seed;
  if (threads) {
    c.solver.threads = *threads;
    c.solver.validate();
  }
  if (growth_only) c.analyses = {"growth", "nondeg"};
  const std::string dir = !out_flag.empty() ? out_flag : !c.output_dir.empty() ? c.output_dir : "cavlab_output";
  const ExperimentOutcome o = run_experiment(c, dir);
  for (const auto& k : o.summary.at("checks"))
    std::cout << (k.at("pass").get<bool>() ? "PASS " : "FAIL ") << k.at("name").get<std::string>() << " value "
              << k.at("value").get<double>() << " threshold " << k.at("threshold").get<double>() << '\n';
  std::cout << "status " << o.summary.at("status").get<std::string>() << ", reports in " << dir << '\n';
  return o.exit_code;
}

int run_a2(const std::string& path, const std::string& out_flag) {
  std::ifstream in(path);
  if (!in) throw InvalidSpec("cannot open weight spec '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("weight spec is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  c.name = "a2";
  c.weight_json = j;
  c.weight = weight_from_json(j);
  c.analyses = {"a2"};
  const ExperimentOutcome o = run_experiment(c, out_flag);
  std::cout << o.summary.at("results").at("a2").dump(2) << '\n';
  return o.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cavlab: discrete minimizers of the weighted cavitation problem"};
  app.require_subcommand(0, 1);
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("--output-dir", out_dir, "directory for dumps, CSVs and summary.json");
  app.add_option("--seed", seed, "seed for randomized restarts");
  app.add_option("--threads", threads, "solver threads (red-black ordering)");

  std::string path;
  auto* run = app.add_subcommand("run", "run every analysis requested by a config");
  run->add_option("config", path, "experiment config (JSON)")->required();
  auto* growth = app.add_subcommand("growth", "run the growth and nondegeneracy analyses of a config");
  growth->add_option("config", path, "experiment config (JSON)")->required();
  auto* a2 = app.add_subcommand("a2", "estimate the A2 constant of a weight spec");
  a2->add_option("spec", path, "weight spec (JSON)")->required();
  auto* list = app.add_subcommand("list-scenarios", "list boundary scenarios and presets");
  for (auto* sub : {run, growth, a2, list}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return run_config(path, out_dir, seed, threads, false);
    if (*growth) return run_config(path, out_dir, seed, threads, true);
    if (*a2) return run_a2(path, out_dir);
    std::cout << list_scenarios_text();
    return kExitOk;
  } catch (const InvalidSpec& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
