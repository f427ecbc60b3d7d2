#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsc/harness.hpp"

using namespace fsc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CsvRow {
  std::int64_t trial, ticks;
  double performance, gamma, alpha;
  std::uint64_t seed;
};

std::vector<CsvRow> parse_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  REQUIRE(std::getline(in, line));
  REQUIRE(line == "trial,ticks,performance,gamma,alpha,seed");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 6);
    rows.push_back({std::stoll(cells[0]), std::stoll(cells[1]),
                    std::stod(cells[2]), std::stod(cells[3]),
                    std::stod(cells[4]), std::stoull(cells[5])});
  }
  return rows;
}

// Scratch directory; wiped up front so stale files never interfere.
fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTinyShuttleExperiment = R"({
  "name": "tiny",
  "environment": {"id": "load_unload", "n_locations": 3, "gamma": 0.9},
  "algorithm": "vaps_fsc",
  "n_nodes": 2,
  "learner": {"alpha": 0.01, "gamma": 0.9, "error_kind": "e_policy",
              "termination": "geometric", "n_trials": 40, "eval_every": 20,
              "step_cap": 500},
  "n_seeds": 2,
  "seed": 42
})";

} // namespace

TEST_CASE("per-run seed derivation is frozen") {
  CHECK(derive_seed(0, 0) == 12035550249420947055ULL);
  CHECK(derive_seed(42, 0) == 5592132763777985307ULL);
  CHECK(derive_seed(42, 1) == 9129838320742759465ULL);
  CHECK(derive_seed(42, 0) != derive_seed(43, 0));
}

TEST_CASE("algorithm names round-trip") {
  for (const Algorithm a : {Algorithm::VAPS_FSC, Algorithm::VAPS_RP,
                            Algorithm::SARSA, Algorithm::EXACT_GRAD})
    CHECK(algorithm_from_string(algorithm_to_string(a)) == a);
  CHECK_THROWS_WITH_AS(algorithm_from_string("qlearning"),
                       doctest::Contains("want vaps_fsc"),
                       std::invalid_argument);
}

TEST_CASE("environment documents: inline, nested, bare model, and errors") {
  const Environment lu =
      env_from_json(R"({"id": "load_unload", "n_locations": 4})");
  CHECK(lu.is_tabular());
  CHECK(lu.n_obs() == 3);
  CHECK(lu.n_actions() == 2);
  CHECK(lu.tabular().n_states == 6);
  CHECK(lu.tabular().gamma == 0.9); // default discount

  const Environment partial =
      env_from_json(R"({"id": "cart_pole", "mode": "partial"})");
  CHECK(!partial.is_tabular());
  CHECK(partial.n_obs() == 48);
  CHECK(partial.n_actions() == 2);
  const Environment full =
      env_from_json(R"({"id": "cart_pole", "mode": "full", "start_jitter": 0.05})");
  CHECK(full.n_obs() == 162);
  CHECK(full.cart_pole().start_jitter == 0.05);

  // A whole experiment document and a bare model document both work.
  const Environment nested = env_from_json(kTinyShuttleExperiment);
  CHECK(nested.tabular().n_states == 4);
  const Environment bare = env_from_json(pomdp_to_json(make_load_unload(5)));
  CHECK(bare.tabular().n_states == 8);

  CHECK_THROWS_WITH_AS(env_from_json(R"({"id": "gridworld"})"),
                       doctest::Contains("unknown environment id"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(env_from_json(R"({"id": "cart_pole", "mode": "f"})"),
                       doctest::Contains("unknown cart_pole mode"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(env_from_json(R"({"gammas": [0.9]})"),
                       doctest::Contains("neither"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(env_from_json("{nope"), doctest::Contains("not valid JSON"),
                       std::invalid_argument);
  // Missing required fields surface as exceptions too.
  CHECK_THROWS_AS(env_from_json(R"({"id": "load_unload"})"), std::exception);
}

TEST_CASE("experiment documents: fields, defaults, and guards") {
  const ExperimentSpec spec = experiment_from_json(kTinyShuttleExperiment);
  CHECK(spec.name == "tiny");
  CHECK(spec.algorithm == Algorithm::VAPS_FSC);
  CHECK(spec.n_nodes == 2);
  CHECK(spec.theta == 1.0);
  CHECK(spec.learner.alpha == 0.01);
  CHECK(spec.learner.error_kind == ErrorKind::E_POLICY);
  CHECK(spec.learner.termination == Termination::GEOMETRIC);
  CHECK(spec.learner.n_trials == 40);
  CHECK(spec.learner.step_cap == 500);
  CHECK(spec.n_seeds == 2);
  CHECK(spec.base_seed == 42);
  CHECK(spec.eval_trials == 200); // default
  CHECK(!spec.wall_clock_ticks);
  CHECK(spec.out_prefix.empty());

  const ExperimentSpec sched = experiment_from_json(R"({
    "environment": {"id": "cart_pole"},
    "algorithm": "sarsa",
    "sarsa": {"alpha": 0.7, "theta": 3.0,
              "gamma_schedule": {"start": 0.9, "increment": 1e-4, "cap": 0.99}}
  })");
  CHECK(sched.algorithm == Algorithm::SARSA);
  CHECK(sched.sarsa.alpha == 0.7);
  REQUIRE(sched.sarsa.gamma_schedule.has_value());
  CHECK(sched.sarsa.gamma_schedule->increment == 1e-4);

  const char* base = R"({"environment": {"id": "load_unload", "n_locations": 3}%s})";
  (void)base;
  CHECK_THROWS_WITH_AS(experiment_from_json(R"({
        "environment": {"id": "load_unload", "n_locations": 3},
        "n_seeds": 0})"),
                       doctest::Contains("n_seeds"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(experiment_from_json(R"({
        "environment": {"id": "load_unload", "n_locations": 3},
        "learner": {"error_kind": "huh"}})"),
                       doctest::Contains("unknown error_kind"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(experiment_from_json(R"({
        "environment": {"id": "load_unload", "n_locations": 3},
        "learner": {"termination": "huh"}})"),
                       doctest::Contains("unknown termination"),
                       std::invalid_argument);
}

TEST_CASE("curve CSV holds exact round-trip numbers in both tick modes") {
  const LearnCurve curve = {
      {0, 500, 111, 23.774999999999999, 0.9, 0.01, 42},
      {1000, 600, 222, 150.5, 0.95, 0.01, 42},
  };
  std::ostringstream env_ticks;
  write_curve_csv(env_ticks, curve, false);
  const auto rows = parse_curve_csv(env_ticks.str());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].trial == 0);
  CHECK(rows[0].ticks == 111); // step ticks, not wall clock
  CHECK(rows[0].performance == 23.774999999999999);
  CHECK(rows[0].gamma == 0.9);
  CHECK(rows[0].alpha == 0.01);
  CHECK(rows[0].seed == 42);
  CHECK(rows[1].ticks == 222);

  std::ostringstream wall;
  write_curve_csv(wall, curve, true);
  const auto wall_rows = parse_curve_csv(wall.str());
  CHECK(wall_rows[0].ticks == curve[0].wall_ns);
  CHECK(wall_rows[1].ticks == curve[1].wall_ns);

  // write_curve_file creates missing parent directories.
  const fs::path dir = scratch_dir("fsc_csv_parents");
  const fs::path nested = dir / "a" / "b" / "curve.csv";
  write_curve_file(nested.string(), curve, false);
  CHECK(parse_curve_csv(slurp(nested)).size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("random controller rollout length on the masked pole is frozen") {
  const Environment env =
      env_from_json(R"({"id": "cart_pole", "mode": "partial"})");
  const PolicyGraph uniform(2, env.n_obs(), env.n_actions(), 1.0);
  RandomStream rng(555);
  const double mean = rollout_mean_length(env, uniform, 1000, 200, rng);
  CHECK(mean == doctest::Approx(23.774999999999999).epsilon(1e-12));
  RandomStream bad(555);
  CHECK_THROWS_AS(rollout_mean_length(env, uniform, 1000, 0, bad),
                  std::invalid_argument);
}

TEST_CASE("one SARSA step from a zero table writes exactly alpha * reward") {
  const Environment env =
      env_from_json(R"({"id": "cart_pole", "mode": "partial"})");
  SarsaAgent agent(env.n_obs(), env.n_actions(), 1.0);
  SarsaConfig cfg;
  cfg.alpha = 0.2;
  cfg.step_cap = 1;
  RandomStream rng(3);
  const SarsaEpisode ep = sarsa_episode(env, agent, cfg, 0.9, rng);
  CHECK(ep.steps == 1);
  CHECK(ep.total_return == 1.0); // the pole survives one step from rest
  int nonzero = 0;
  for (int o = 0; o < agent.n_obs(); ++o)
    for (int a = 0; a < agent.n_actions(); ++a)
      if (agent.q(o, a) != 0.0) {
        ++nonzero;
        CHECK(o == 27); // the centered start cell of the masked partition
        CHECK(agent.q(o, a) == 0.2);
      }
  CHECK(nonzero == 1);
}

TEST_CASE("one SARSA step from a seeded table follows the TD(0) update") {
  const Environment env =
      env_from_json(R"({"id": "cart_pole", "mode": "partial"})");
  // Temperature 0.01 with a 100-point lead makes action 0 certain, and the
  // un-moved pole re-observes cell 27, so the whole step is deterministic:
  // q <- q + alpha * (r + gamma * q - q) = 100 + 0.2 * (1 + 90 - 100).
  SarsaAgent agent(env.n_obs(), env.n_actions(), 0.01);
  agent.bump_q(27, 0, 100.0);
  SarsaConfig cfg;
  cfg.alpha = 0.2;
  cfg.step_cap = 1;
  RandomStream rng(9);
  sarsa_episode(env, agent, cfg, 0.9, rng);
  CHECK(agent.q(27, 0) == 98.2);
  for (int o = 0; o < agent.n_obs(); ++o)
    for (int a = 0; a < agent.n_actions(); ++a)
      if (!(o == 27 && a == 0)) CHECK(agent.q(o, a) == 0.0);
}

TEST_CASE("an untrained SARSA table behaves like the random controller") {
  const Environment env =
      env_from_json(R"({"id": "cart_pole", "mode": "partial"})");
  const SarsaAgent agent(env.n_obs(), env.n_actions(), 1.0);
  // Zero values under Boltzmann selection are a uniform policy; the mean
  // trial length lands near the random-controller baseline.
  for (const double p : agent.action_dist(0)) CHECK(p == 0.5);
  RandomStream rng(555);
  const double mean = sarsa_rollout_length(env, agent, 1000, 200, rng);
  CHECK(std::abs(mean - 23.774999999999999) / 23.774999999999999 < 0.2);
}

TEST_CASE("greedy action breaks ties toward the lower index") {
  SarsaAgent agent(2, 3, 1.0);
  CHECK(agent.greedy_action(0) == 0); // all zero: tie
  agent.bump_q(0, 2, 5.0);
  CHECK(agent.greedy_action(0) == 2);
  agent.bump_q(0, 1, 5.0);
  CHECK(agent.greedy_action(0) == 1); // equal peak: lower index wins
  CHECK(agent.greedy_action(1) == 0);
}

TEST_CASE("SARSA training records the standard cadence") {
  const Environment env =
      env_from_json(R"({"id": "cart_pole", "mode": "partial"})");
  SarsaAgent agent(env.n_obs(), env.n_actions(), 1.0);
  SarsaConfig cfg;
  cfg.alpha = 0.1;
  cfg.n_trials = 4;
  cfg.eval_every = 2;
  cfg.seed = 11;
  int evals = 0;
  const LearnCurve curve = sarsa_train(env, agent, cfg, [&](const SarsaAgent&) {
    ++evals;
    return 7.0;
  });
  REQUIRE(curve.size() == 3);
  CHECK(evals == 3);
  CHECK(curve[0].trial == 0);
  CHECK(curve[1].trial == 2);
  CHECK(curve[2].trial == 4);
  CHECK(curve[1].step_ticks > 0);
  for (const CurvePoint& p : curve) {
    CHECK(p.performance == 7.0);
    CHECK(p.alpha == 0.1);
    CHECK(p.seed == 11);
  }

  SarsaAgent wrong(3, 2, 1.0);
  CHECK_THROWS_WITH_AS(sarsa_train(env, wrong, cfg, SarsaEvalHook{}),
                       doctest::Contains("does not match"),
                       std::invalid_argument);
}

TEST_CASE("run_experiment: deterministic files, frozen seeds, exact mean curve") {
  const fs::path dir_a = scratch_dir("fsc_exp_a");
  const fs::path dir_b = scratch_dir("fsc_exp_b");

  ExperimentSpec spec = experiment_from_json(kTinyShuttleExperiment);
  spec.out_prefix = (dir_a / "run").string();
  const auto runs = run_experiment(spec);
  spec.out_prefix = (dir_b / "run").string();
  const auto runs_again = run_experiment(spec);

  REQUIRE(runs.size() == 2);
  CHECK(runs[0].seed == 5592132763777985307ULL);
  CHECK(runs[1].seed == 9129838320742759465ULL);
  REQUIRE(runs[0].curve.size() == 3); // trials 0, 20, 40
  CHECK(runs[0].curve[2].trial == 40);
  CHECK(runs[0].final_performance == runs[0].curve.back().performance);

  for (const char* name : {"run_seed0.csv", "run_seed1.csv", "run_mean.csv"}) {
    const std::string a = slurp(dir_a / name);
    CHECK(a == slurp(dir_b / name)); // byte-identical rerun
    CHECK(!parse_curve_csv(a).empty());
  }

  // Per-seed files carry exactly the returned curves...
  const auto rows0 = parse_curve_csv(slurp(dir_a / "run_seed0.csv"));
  REQUIRE(rows0.size() == runs[0].curve.size());
  for (std::size_t i = 0; i < rows0.size(); ++i) {
    CHECK(rows0[i].trial == runs[0].curve[i].trial);
    CHECK(rows0[i].ticks == runs[0].curve[i].step_ticks);
    CHECK(rows0[i].performance == runs[0].curve[i].performance);
    CHECK(rows0[i].seed == runs[0].curve[i].seed);
  }
  // ...and the mean file is their pointwise average, stamped with the base seed.
  const auto rows1 = parse_curve_csv(slurp(dir_a / "run_seed1.csv"));
  const auto mean = parse_curve_csv(slurp(dir_a / "run_mean.csv"));
  REQUIRE(mean.size() == rows0.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    CHECK(mean[i].performance == (rows0[i].performance + rows1[i].performance) / 2);
    CHECK(mean[i].ticks == std::llround((static_cast<double>(rows0[i].ticks) +
                                         static_cast<double>(rows1[i].ticks)) /
                                        2.0));
    CHECK(mean[i].seed == 42);
    CHECK(mean[i].trial == rows0[i].trial);
  }

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("run_experiment: zero step size gives a flat exact-value curve") {
  ExperimentSpec spec = experiment_from_json(R"({
    "environment": {"id": "load_unload", "n_locations": 3},
    "algorithm": "vaps_fsc", "n_nodes": 2,
    "learner": {"alpha": 0.0, "termination": "geometric",
                "n_trials": 30, "eval_every": 10}
  })");
  const auto runs = run_experiment(spec);
  REQUIRE(runs.size() == 1);
  REQUIRE(runs[0].curve.size() == 4);
  for (const CurvePoint& p : runs[0].curve)
    CHECK(p.performance == runs[0].curve[0].performance);
  // A fresh uniform controller on the shuttle has positive value.
  CHECK(runs[0].curve[0].performance > 0.0);
}

TEST_CASE("run_experiment: exact gradient descent on the shuttle climbs") {
  ExperimentSpec spec = experiment_from_json(R"({
    "environment": {"id": "load_unload", "n_locations": 3},
    "algorithm": "exact_grad", "n_nodes": 2,
    "exact": {"alpha": 0.2, "n_iters": 10},
    "seed": 5
  })");
  const auto runs = run_experiment(spec);
  REQUIRE(runs.size() == 1);
  REQUIRE(runs[0].curve.size() == 11);
  CHECK(runs[0].curve.front().trial == 0);
  CHECK(runs[0].curve.back().trial == 10);
  CHECK(runs[0].final_performance > runs[0].curve.front().performance);
}

TEST_CASE("run_experiment rejects mismatched algorithm/environment pairs") {
  ExperimentSpec sarsa_tab = experiment_from_json(R"({
    "environment": {"id": "load_unload", "n_locations": 3},
    "algorithm": "sarsa"
  })");
  CHECK_THROWS_WITH_AS(run_experiment(sarsa_tab),
                       doctest::Contains("cart-pole environment only"),
                       std::invalid_argument);

  ExperimentSpec exact_pole = experiment_from_json(R"({
    "environment": {"id": "cart_pole"},
    "algorithm": "exact_grad"
  })");
  CHECK_THROWS_WITH_AS(run_experiment(exact_pole),
                       doctest::Contains("needs a tabular environment"),
                       std::invalid_argument);
}

TEST_CASE("comparison defaults are the documented grid and bases") {
  const CompareSpec spec{make_load_unload(5, 0.9), {0.9}};
  CHECK(spec.alpha_grid == std::vector<double>{0.2, 0.1, 0.05, 0.01, 0.005});
  CHECK(spec.stoch_alpha_base == 1.0);
  CHECK(spec.exact_alpha_base == 25.0);
  CHECK(spec.threshold == 0.9);
  CHECK(spec.init_jitter == 0.1);
  CHECK(spec.n_nodes == 2);
}

TEST_CASE("tiny comparison run: both sides cross an easy threshold") {
  CompareSpec spec{make_load_unload(3, 0.9), {0.9}};
  spec.threshold = 0.5;
  spec.alpha_grid = {0.1};
  spec.seed = 1;
  spec.stochastic.n_trials = 4000;
  spec.stochastic.eval_every = 100;
  spec.stochastic.error_kind = ErrorKind::E_POLICY_PRIME;
  spec.stochastic.termination = Termination::GEOMETRIC;
  spec.exact.n_iters = 300;
  const CompareReport rep = run_compare(spec);
  REQUIRE(rep.points.size() == 1);
  CHECK(rep.points[0].gamma == 0.9);
  CHECK(rep.points[0].optimal ==
        doctest::Approx(mdp_optimal_value(make_load_unload(3, 0.9))));
  CHECK(rep.points[0].exact_ns.has_value());
  CHECK(rep.points[0].stoch_ns.has_value());
  CHECK(rep.exact_alpha == doctest::Approx(0.1 * 25.0));
  CHECK(rep.stoch_alpha == doctest::Approx(0.1));
}

TEST_CASE("tiny comparison run: hopeless budgets are censored, not faked") {
  CompareSpec spec{make_load_unload(3, 0.9), {0.9}};
  spec.threshold = 0.999; // far beyond what zero iterations can reach
  spec.alpha_grid = {0.1};
  spec.stochastic.n_trials = 0;
  spec.stochastic.termination = Termination::GEOMETRIC;
  spec.exact.n_iters = 0;
  const CompareReport rep = run_compare(spec);
  REQUIRE(rep.points.size() == 1);
  CHECK(!rep.points[0].exact_ns.has_value());
  CHECK(!rep.points[0].stoch_ns.has_value());
}

TEST_CASE("cmd_train end to end: spec file in, curve files out") {
  const fs::path dir = scratch_dir("fsc_cmd_train");
  std::string doc(kTinyShuttleExperiment);
  const std::string marker = "\"seed\": 42";
  const auto at = doc.find(marker);
  REQUIRE(at != std::string::npos);
  doc.insert(at + marker.size(),
             ",\n  \"out\": \"" + (dir / "cli").string() + "\"");
  const fs::path spec_path = dir / "spec.json";
  std::ofstream(spec_path) << doc;

  CHECK(cmd_train(spec_path.string()) == 0);
  CHECK(fs::exists(dir / "cli_seed0.csv"));
  CHECK(fs::exists(dir / "cli_seed1.csv"));
  CHECK(fs::exists(dir / "cli_mean.csv"));
  CHECK(cmd_train((dir / "missing.json").string()) != 0);
  fs::remove_all(dir);
}
