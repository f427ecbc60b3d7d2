#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fsc/env.hpp"
#include "fsc/policy_graph.hpp"

namespace fsc {

/// One time step of a trial: observation seen, node entered, action taken,
/// reward received.
struct StepRecord {
  int obs;
  int node;
  int action;
  double reward;
};

using TrajectoryPrefix = std::vector<StepRecord>;

/// Eligibility traces and per-trial weight-delta accumulators over the
/// graph's flat weight coordinates. Dense storage plus a touched-coordinate
/// list, so clearing and folding stay proportional to the coordinates a
/// trial actually visited.
///
/// The per-step update delta_k(t) = -alpha * e_t * (T_psi_k(t) + T_eta_k(t))
/// summed over t equals, per coordinate, -alpha * sum over gradient entries
/// of g * (suffix error sum from the entry's step). finish() evaluates that
/// form from the final traces, the total error, and a per-entry
/// g * (errors before the entry) accumulator, avoiding a full pass over the
/// traces at every step.
class TraceSet {
public:
  explicit TraceSet(int n_weights)
      : trace_psi_(n_weights, 0.0), trace_eta_(n_weights, 0.0),
        pre_(n_weights, 0.0), delta_acc_(n_weights, 0.0),
        seen_(n_weights, false) {}

  void clear();

  /// Adds a log-gradient slice to the action (psi) or node-transition (eta)
  /// trace. err_prefix is the sum of per-step errors over the steps
  /// completed so far.
  void add_psi(const GradSlice& slice, double err_prefix);
  void add_eta(const GradSlice& slice, double err_prefix);

  /// Finalizes delta_acc once all of the trial's errors are in.
  void finish(double alpha, double err_total);

  double trace_psi(int coord) const { return trace_psi_[coord]; }
  double trace_eta(int coord) const { return trace_eta_[coord]; }
  double delta_acc(int coord) const { return delta_acc_[coord]; }
  const std::vector<int>& touched() const { return touched_; }

private:
  void touch(int coord);

  std::vector<double> trace_psi_;
  std::vector<double> trace_eta_;
  std::vector<double> pre_; // per coordinate: sum of entry * errors-before-entry
  std::vector<double> delta_acc_;
  std::vector<int> touched_;
  std::vector<bool> seen_;
};

enum class ErrorKind { E_POLICY, E_POLICY_PRIME };
enum class Termination { GOAL_OBS, GEOMETRIC, STEP_CAP };

struct GammaSchedule {
  double start;
  double increment; // per trial
  double cap;
};

struct LearnerConfig {
  double alpha = 0.01;
  double gamma = 0.9;
  ErrorKind error_kind = ErrorKind::E_POLICY;
  Termination termination = Termination::GOAL_OBS;
  std::int64_t step_cap = 1'000'000; // hard guard; also the STEP_CAP length
  std::int64_t n_trials = 10'000;
  std::int64_t eval_every = 1'000;
  std::uint64_t seed = 0;
  std::optional<GammaSchedule> gamma_schedule;
  /// Stop after the first evaluation point whose performance reaches this
  /// value (no effect without an eval hook, since nothing is measured).
  std::optional<double> stop_value;

  /// GOAL_OBS needs an environment with a natural trial end; GEOMETRIC is
  /// for tabular maintenance tasks (no goal observation); E_POLICY_PRIME
  /// only together with GEOMETRIC. Throws on violation.
  void validate(const Environment& env) const;
};

/// Discount in effect at a given trial index under the optional schedule.
double effective_gamma(const LearnerConfig& config, std::int64_t trial);

/// Instantaneous error of a trajectory prefix: -gamma^t r^t, where t is
/// the prefix's last index.
double error_policy(const TrajectoryPrefix& prefix, double gamma);
/// Undiscounted variant -r^t used with geometric trial termination.
double error_policy_prime(const TrajectoryPrefix& prefix);

struct TrialResult {
  TrajectoryPrefix prefix;
  TraceSet traces;
  double total_return; // minus the summed per-step errors
  bool truncated;      // step-cap guard hit without a natural trial end
};

/// Runs one trial with frozen weights: samples the trajectory, maintains
/// the action and node-transition eligibility traces, and accumulates the
/// per-step weight deltas -alpha * e_t * (T_psi + T_eta) into delta_acc.
/// (The errors' own partial derivatives are identically zero, so no direct
/// term appears.) Weights are not modified.
TrialResult run_trial(const Environment& env, const PolicyGraph& graph,
                      const LearnerConfig& config, RandomStream& rng);

/// As run_trial but reusing a caller-owned TrialResult's storage and taking
/// the discount for this trial explicitly; the hot path for train().
void run_trial_into(const Environment& env, const PolicyGraph& graph,
                    const LearnerConfig& config, double gamma_now,
                    RandomStream& rng, TrialResult& out);

struct CurvePoint {
  std::int64_t trial;      // trials completed at this evaluation
  std::int64_t wall_ns;    // elapsed wall clock, nanoseconds
  std::int64_t step_ticks; // cumulative environment decisions (or work units)
  double performance;
  double gamma; // learner gamma at this point
  double alpha;
  std::uint64_t seed;
};

using LearnCurve = std::vector<CurvePoint>;

using EvalHook = std::function<double(const PolicyGraph&)>;

/// Called with each evaluation point as soon as it is recorded; lets callers
/// stream curve rows to disk so an interrupted run still leaves a valid
/// partial curve.
using PointSink = std::function<void(const CurvePoint&)>;

/// Trial-based stochastic gradient descent: repeats run_trial, applies the
/// accumulated deltas after each trial, advances the gamma schedule, and
/// records an evaluation point every eval_every trials (plus one before
/// training starts). Stops early if an evaluation reaches stop_value.
/// Throws if any weight goes non-finite, naming the trial and coordinate.
/// An empty eval_hook records no points.
LearnCurve train(const Environment& env, PolicyGraph& graph,
                 const LearnerConfig& config, const EvalHook& eval_hook,
                 const PointSink& sink = {});

} // namespace fsc
