#pragma once

#include <iosfwd>
#include <string>

#include "fsc/env.hpp"
#include "fsc/exact.hpp"
#include "fsc/sarsa.hpp"
#include "fsc/vaps.hpp"

namespace fsc {

// ---------------------------------------------------------------------------
// Experiment descriptions (JSON-backed)
// ---------------------------------------------------------------------------

enum class Algorithm {
  VAPS_FSC,   // stochastic policy-graph learner
  VAPS_RP,    // same learner, reactive-policy constraint
  SARSA,      // tabular Q baseline (cart-pole only)
  EXACT_GRAD, // finite-difference gradient descent on the exact value
};

Algorithm algorithm_from_string(const std::string& name);
std::string algorithm_to_string(Algorithm a);

/// One runnable experiment: an environment, an algorithm, and its knobs.
/// Parsed from a JSON file; see README for the schema.
struct ExperimentSpec {
  std::string name = "experiment";
  Environment env;
  Algorithm algorithm = Algorithm::VAPS_FSC;
  int n_nodes = 1;      // controller size for VAPS_FSC / EXACT_GRAD
  double theta = 1.0;   // soft-max temperature for the controller
  LearnerConfig learner;
  SarsaConfig sarsa;
  ExactGdConfig exact;
  int n_seeds = 1;
  std::uint64_t base_seed = 0;
  std::int64_t eval_trials = 200; // rollouts per evaluation point (cart-pole)
  bool wall_clock_ticks = false;  // CSV ticks column: env steps (default) or ns
  std::string out_prefix;         // CSV path prefix; empty = no files

  explicit ExperimentSpec(Environment e) : env(std::move(e)) {}
};

ExperimentSpec experiment_from_json(const std::string& text);
ExperimentSpec load_experiment_file(const std::string& path);

/// Environment from a JSON document: an inline environment object
/// ({"id": "load_unload" | "cart_pole" | "pomdp_file", ...}), a whole
/// experiment document (its "environment" field is used), or a bare
/// tabular model document.
Environment env_from_json(const std::string& text);
Environment load_env_file(const std::string& path);

// ---------------------------------------------------------------------------
// Learning-curve CSV
// ---------------------------------------------------------------------------

/// Writes curve rows as `trial,ticks,performance,gamma,alpha,seed` under the
/// standard header. Rows are flushed as written so a killed run leaves a
/// valid partial curve.
void write_curve_csv(std::ostream& os, const LearnCurve& curve,
                     bool wall_clock_ticks);
void write_curve_file(const std::string& path, const LearnCurve& curve,
                      bool wall_clock_ticks);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Mean trial length in control decisions over n_trials rollouts of the
/// frozen graph (trials end at environment failure or step_cap).
double rollout_mean_length(const Environment& env, const PolicyGraph& graph,
                           std::int64_t step_cap, std::int64_t n_trials,
                           RandomStream& rng);

/// Same protocol for a frozen SARSA value table, following its Boltzmann
/// policy at the training temperature.
double sarsa_rollout_length(const Environment& env, const SarsaAgent& agent,
                            std::int64_t step_cap, std::int64_t n_trials,
                            RandomStream& rng);

struct RunOutcome {
  std::uint64_t seed = 0;
  LearnCurve curve;
  double final_performance = 0.0;
};

/// Runs one experiment across its seeds (seed of run r is
/// derive_seed(base_seed, r)), writing one CSV per seed plus a mean curve
/// when out_prefix is set. Seeds run as independent parallel jobs; each job
/// owns its generator, policy, and output file, so results and files are
/// identical to a sequential run. Returns per-seed outcomes in run order.
/// The stochastic learners start from the uniform controller; the
/// exact-gradient algorithm starts from a seed-jittered near-uniform one
/// (weights in [-0.1, 0.1]), because the exactly uniform start is a
/// stationary point of its gradient that no sampling noise would break.
std::vector<RunOutcome> run_experiment(const ExperimentSpec& spec);

// ---------------------------------------------------------------------------
// Exact-vs-stochastic comparison across a discount grid
// ---------------------------------------------------------------------------

struct CompareSpec {
  TabularPomdp base;          // gamma field overridden per grid point
  std::vector<double> gammas;
  double threshold = 0.9;     // fraction of the MDP-optimal value
  int n_nodes = 2;
  double theta = 1.0;
  LearnerConfig stochastic;   // gamma and alpha overridden per grid point
  ExactGdConfig exact;        // alpha overridden per grid point
  /// Step-size candidates for both sides' sweeps; each side settles on one
  /// of them for the whole discount grid (see run_compare). Empty = single
  /// candidate 1.0, i.e. each side's base is its step size.
  std::vector<double> alpha_grid = {0.2, 0.1, 0.05, 0.01, 0.005};
  /// Per-side grid multipliers. The exact comparator's steps are taken on
  /// the scale-normalized objective (1-gamma)*V — the value scale grows
  /// like 1/(1-gamma), and without the normalization a single grid cannot
  /// hold each discount's best step size. Its base recenters the grid for
  /// that landscape.
  double stoch_alpha_base = 1.0;
  double exact_alpha_base = 25.0;
  /// Both sides start every run from one shared near-uniform graph whose
  /// weights are drawn uniformly from [-init_jitter, init_jitter] under
  /// this spec's seed. An exactly uniform start is a symmetric stationary
  /// point of the exact gradient (node relabeling symmetry), which only
  /// the sampling noise of the stochastic side could break.
  double init_jitter = 0.1;
  std::uint64_t seed = 0;
};

struct ComparePoint {
  double gamma = 0.0;
  double optimal = 0.0;                 // MDP-optimal value at this gamma
  std::optional<std::int64_t> exact_ns; // time to threshold; empty = censored
  std::optional<std::int64_t> stoch_ns;
};

struct CompareReport {
  std::vector<ComparePoint> points;
  /// The single step size each side used across the whole grid (the exact
  /// side's is on the normalized objective, i.e. grid value times base).
  double exact_alpha = 0.0;
  double stoch_alpha = 0.0;
};

/// Runs the exact-gradient comparator and the stochastic learner over the
/// discount grid from the shared jittered start and records the first
/// wall-clock time at which each reaches threshold * optimal per gamma.
/// Each side keeps one step size for the whole grid — the discount is the
/// only variable — chosen from the alpha grid as the candidate reaching
/// the threshold at the most gammas, ties broken by the time at the first
/// gamma. Runs stop at the first crossing; thresholds never reached are
/// censored. Evaluation uses the iterative solver on both sides so the
/// discount's effect on evaluation cost is part of the measurement.
CompareReport run_compare(const CompareSpec& spec);

// ---------------------------------------------------------------------------
// CLI entry points (shared by the fsc binary and tests)
// ---------------------------------------------------------------------------

int cmd_train(const std::string& spec_path);
int cmd_eval(const std::string& env_path, const std::string& graph_path,
             std::int64_t n_trials, std::uint64_t seed);
int cmd_gradcheck(const std::string& env_path, const std::string& graph_path,
                  double h, std::int64_t n_trials, std::uint64_t seed);
int cmd_compare(const std::string& spec_path);

} // namespace fsc
