#include "fsc/vaps.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fsc {

void TraceSet::clear() {
  for (int c : touched_) {
    trace_psi_[c] = 0.0;
    trace_eta_[c] = 0.0;
    pre_[c] = 0.0;
    delta_acc_[c] = 0.0;
    seen_[c] = false;
  }
  touched_.clear();
}

void TraceSet::touch(int coord) {
  if (!seen_[coord]) {
    seen_[coord] = true;
    touched_.push_back(coord);
  }
}

void TraceSet::add_psi(const GradSlice& slice, double err_prefix) {
  for (const GradEntry& e : slice) {
    touch(e.coord);
    trace_psi_[e.coord] += e.value;
    pre_[e.coord] += e.value * err_prefix;
  }
}

void TraceSet::add_eta(const GradSlice& slice, double err_prefix) {
  for (const GradEntry& e : slice) {
    touch(e.coord);
    trace_eta_[e.coord] += e.value;
    pre_[e.coord] += e.value * err_prefix;
  }
}

void TraceSet::finish(double alpha, double err_total) {
  // Entry g added at step j contributes g * (sum of errors from step j on)
  // to sum_t e_t * trace(t); that suffix sum is err_total minus the errors
  // preceding j, which pre_ has already folded in.
  for (int c : touched_)
    delta_acc_[c] =
        -alpha * (err_total * (trace_psi_[c] + trace_eta_[c]) - pre_[c]);
}

void LearnerConfig::validate(const Environment& env) const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("alpha must be a finite nonnegative number");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("gamma must lie in [0, 1)");
  if (step_cap < 1) throw std::invalid_argument("step_cap must be at least 1");
  if (n_trials < 0) throw std::invalid_argument("n_trials must be nonnegative");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be at least 1");
  if (gamma_schedule) {
    const GammaSchedule& g = *gamma_schedule;
    if (!(g.start >= 0.0 && g.start < 1.0) || !(g.cap >= g.start && g.cap < 1.0) ||
        !(g.increment >= 0.0))
      throw std::invalid_argument("gamma schedule must keep gamma in [0, 1) "
                                  "and be nondecreasing");
  }
  const bool tabular_goal = env.is_tabular() && env.tabular().goal_obs.has_value();
  switch (termination) {
    case Termination::GOAL_OBS:
      if (env.is_tabular() && !tabular_goal)
        throw std::invalid_argument(
            "GOAL_OBS termination needs a goal observation or a failing "
            "environment; use GEOMETRIC or STEP_CAP for maintenance tasks");
      break;
    case Termination::GEOMETRIC:
      if (tabular_goal)
        throw std::invalid_argument(
            "GEOMETRIC termination is for maintenance tasks; this environment "
            "has a goal observation");
      break;
    case Termination::STEP_CAP:
      break;
  }
  if (error_kind == ErrorKind::E_POLICY_PRIME &&
      termination != Termination::GEOMETRIC)
    throw std::invalid_argument(
        "the undiscounted error requires geometric trial termination");
}

double effective_gamma(const LearnerConfig& config, std::int64_t trial) {
  if (!config.gamma_schedule) return config.gamma;
  const GammaSchedule& g = *config.gamma_schedule;
  return std::min(g.cap, g.start + g.increment * static_cast<double>(trial));
}

double error_policy(const TrajectoryPrefix& prefix, double gamma) {
  const std::size_t t = prefix.size() - 1;
  return -(std::pow(gamma, static_cast<double>(t)) * prefix.back().reward);
}

double error_policy_prime(const TrajectoryPrefix& prefix) {
  return -prefix.back().reward;
}

namespace {

void check_shape(const Environment& env, const PolicyGraph& graph) {
  if (graph.n_obs() != env.n_obs() || graph.n_actions() != env.n_actions())
    throw std::invalid_argument(
        "graph shape (" + std::to_string(graph.n_obs()) + " obs, " +
        std::to_string(graph.n_actions()) + " actions) does not match the "
        "environment (" + std::to_string(env.n_obs()) + " obs, " +
        std::to_string(env.n_actions()) + " actions)");
}

} // namespace

void run_trial_into(const Environment& env, const PolicyGraph& graph,
                    const LearnerConfig& config, double gamma_now,
                    RandomStream& rng, TrialResult& out) {
  out.prefix.clear();
  out.traces.clear();
  out.truncated = false;
  const bool reactive = graph.constraint() == GraphConstraint::REACTIVE;
  const bool discounted = config.error_kind == ErrorKind::E_POLICY;

  std::vector<double> dist;
  GradSlice slice;
  double err_sum = 0.0;
  double gamma_pow = 1.0;

  ResetResult start = reset(env, rng);
  EnvState state = std::move(start.state);
  int obs = start.obs;
  int node = -1;

  for (std::int64_t t = 0;; ++t) {
    if (t >= config.step_cap) {
      out.truncated = config.termination != Termination::STEP_CAP;
      break;
    }
    // Enter this step's node; the transition that got us here (eta0 at the
    // first step) joins the eta trace.
    if (reactive) {
      node = obs;
    } else if (t == 0) {
      graph.initial_node_dist_into(obs, dist);
      node = rng.sample(dist);
      graph.log_grad_initial_into(obs, node, slice);
      out.traces.add_eta(slice, err_sum);
    } else {
      const int prev = node;
      graph.node_transition_dist_into(prev, obs, dist);
      node = rng.sample(dist);
      graph.log_grad_transition_into(prev, obs, node, slice);
      out.traces.add_eta(slice, err_sum);
    }

    graph.action_dist_into(node, dist);
    const int action = rng.sample(dist);
    graph.log_grad_action_into(node, action, slice);
    out.traces.add_psi(slice, err_sum);

    StepResult sr = step(env, state, action, rng);
    out.prefix.push_back({obs, node, action, sr.reward});

    double e;
    if (discounted) {
      e = -(gamma_pow * sr.reward);
      gamma_pow *= gamma_now;
    } else {
      e = -sr.reward;
    }
    err_sum += e;

    state = std::move(sr.state);
    obs = sr.obs;
    if (sr.terminal) break;
    if (config.termination == Termination::GEOMETRIC &&
        rng.bernoulli(1.0 - gamma_now))
      break;
  }

  out.traces.finish(config.alpha, err_sum);
  out.total_return = -err_sum;
}

TrialResult run_trial(const Environment& env, const PolicyGraph& graph,
                      const LearnerConfig& config, RandomStream& rng) {
  check_shape(env, graph);
  config.validate(env);
  TrialResult result{TrajectoryPrefix{}, TraceSet(graph.weight_count()), 0.0,
                     false};
  run_trial_into(env, graph, config, config.gamma, rng, result);
  return result;
}

LearnCurve train(const Environment& env, PolicyGraph& graph,
                 const LearnerConfig& config, const EvalHook& eval_hook,
                 const PointSink& sink) {
  check_shape(env, graph);
  config.validate(env);

  RandomStream rng(config.seed);
  LearnCurve curve;
  const auto t0 = std::chrono::steady_clock::now();
  std::int64_t ticks = 0;

  // Returns true once the stop_value threshold has been observed.
  auto record = [&](std::int64_t trial, double gamma_now) {
    if (!eval_hook) return false;
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    const double perf = eval_hook(graph);
    curve.push_back({trial, ns, ticks, perf, gamma_now, config.alpha,
                     config.seed});
    if (sink) sink(curve.back());
    return config.stop_value && perf >= *config.stop_value;
  };

  if (record(0, effective_gamma(config, 0))) return curve;

  TrialResult scratch{TrajectoryPrefix{}, TraceSet(graph.weight_count()), 0.0,
                      false};
  for (std::int64_t trial = 0; trial < config.n_trials; ++trial) {
    const double gamma_now = effective_gamma(config, trial);
    run_trial_into(env, graph, config, gamma_now, rng, scratch);
    for (int c : scratch.traces.touched()) {
      graph.add_weight(c, scratch.traces.delta_acc(c));
      if (!std::isfinite(graph.weight(c)))
        throw std::runtime_error("weight " + graph.coord_name(c) +
                                 " became non-finite after trial " +
                                 std::to_string(trial));
    }
    ticks += static_cast<std::int64_t>(scratch.prefix.size());
    if ((trial + 1) % config.eval_every == 0 && record(trial + 1, gamma_now))
      break;
  }
  return curve;
}

} // namespace fsc
