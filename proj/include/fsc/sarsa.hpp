#pragma once

#include "fsc/env.hpp"
#include "fsc/vaps.hpp"

namespace fsc {

/// Tabular SARSA over (observation, action) values with Boltzmann
/// exploration. TD(0) value search, used as the pole-balancing comparator.
struct SarsaConfig {
  double alpha = 0.2;
  double gamma = 0.99;
  double theta = 1.0; // Boltzmann temperature
  std::int64_t step_cap = 100'000;
  std::int64_t n_trials = 20'000;
  std::int64_t eval_every = 1'000;
  std::uint64_t seed = 0;
  std::optional<GammaSchedule> gamma_schedule;
};

class SarsaAgent {
public:
  SarsaAgent(int n_obs, int n_actions, double theta);

  std::vector<double> action_dist(int obs) const;
  int sample_action(int obs, RandomStream& rng) const;
  /// Highest-value action for `obs` (ties broken toward the lower index).
  int greedy_action(int obs) const;

  double q(int obs, int action) const { return q_[obs * n_actions_ + action]; }
  void bump_q(int obs, int action, double dv) { q_[obs * n_actions_ + action] += dv; }
  int n_obs() const { return n_obs_; }
  int n_actions() const { return n_actions_; }

private:
  int n_obs_;
  int n_actions_;
  double theta_;
  std::vector<double> q_;
};

struct SarsaEpisode {
  double total_return; // undiscounted sum of rewards
  std::int64_t steps;  // control decisions taken
};

/// Runs one SARSA episode, updating Q in place after every transition.
SarsaEpisode sarsa_episode(const Environment& env, SarsaAgent& agent,
                           const SarsaConfig& config, double gamma_now,
                           RandomStream& rng);

using SarsaEvalHook = std::function<double(const SarsaAgent&)>;

/// SARSA training loop with the same evaluation cadence as train().
LearnCurve sarsa_train(const Environment& env, SarsaAgent& agent,
                       const SarsaConfig& config, const SarsaEvalHook& eval_hook,
                       const PointSink& sink = {});

} // namespace fsc
