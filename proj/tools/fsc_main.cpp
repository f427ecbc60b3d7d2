#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "fsc/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Policy-graph learning for partially observable environments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string env_path;
  std::string graph_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::int64_t trials = 200;
  std::int64_t gradcheck_trials = 100'000;
  double h = 1e-6;

  auto* train = app.add_subcommand("train", "run a training experiment");
  train->add_option("--config", config_path, "experiment JSON file")->required();
  train->add_option("--seed", seed, "override the experiment's base seed")
      ->each([&](const std::string&) { seed_given = true; });
  train->add_option("--out", out_dir, "directory for curve CSVs");

  auto* sarsa = app.add_subcommand("sarsa", "run the SARSA baseline");
  sarsa->add_option("--config", config_path, "experiment JSON file")->required();
  sarsa->add_option("--seed", seed, "override the experiment's base seed")
      ->each([&](const std::string&) { seed_given = true; });
  sarsa->add_option("--out", out_dir, "directory for curve CSVs");

  auto* eval = app.add_subcommand("eval", "evaluate a frozen policy graph");
  eval->add_option("--env", env_path, "environment or model JSON file")->required();
  eval->add_option("--graph", graph_path, "policy graph JSON file")->required();
  eval->add_option("--trials", trials, "rollouts for cart-pole evaluation");
  eval->add_option("--seed", seed, "rollout seed");

  auto* gradcheck =
      app.add_subcommand("gradcheck", "sampled vs finite-difference gradients");
  gradcheck->add_option("--env", env_path, "tabular model JSON file")->required();
  gradcheck->add_option("--graph", graph_path, "policy graph JSON file")->required();
  gradcheck->add_option("--fd-step", h, "finite-difference step");
  gradcheck->add_option("--trials", gradcheck_trials, "sampled trials");
  gradcheck->add_option("--seed", seed, "sampling seed");

  auto* compare =
      app.add_subcommand("compare", "exact vs stochastic gradient over a gamma grid");
  compare->add_option("--config", config_path, "compare JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  auto run_training = [&](bool force_sarsa) {
    try {
      fsc::ExperimentSpec spec = fsc::load_experiment_file(config_path);
      if (force_sarsa) spec.algorithm = fsc::Algorithm::SARSA;
      if (seed_given) spec.base_seed = seed;
      if (!out_dir.empty()) spec.out_prefix = out_dir + "/" + spec.name;
      const auto runs = fsc::run_experiment(spec);
      double mean = 0.0;
      for (std::size_t r = 0; r < runs.size(); ++r) {
        std::printf("run %zu seed %llu final performance %g\n", r,
                    static_cast<unsigned long long>(runs[r].seed),
                    runs[r].final_performance);
        mean += runs[r].final_performance;
      }
      std::printf("mean final performance %g\n",
                  mean / static_cast<double>(runs.size()));
      return 0;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
  };

  if (train->parsed()) {
    if (out_dir.empty() && !seed_given) return fsc::cmd_train(config_path);
    return run_training(false);
  }
  if (sarsa->parsed()) return run_training(true);
  if (eval->parsed()) return fsc::cmd_eval(env_path, graph_path, trials, seed);
  if (gradcheck->parsed())
    return fsc::cmd_gradcheck(env_path, graph_path, h, gradcheck_trials, seed);
  if (compare->parsed()) return fsc::cmd_compare(config_path);
  return 1;
}
