#include "fsc/sarsa.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace fsc {

SarsaAgent::SarsaAgent(int n_obs, int n_actions, double theta)
    : n_obs_(n_obs), n_actions_(n_actions), theta_(theta),
      q_(static_cast<std::size_t>(n_obs) * n_actions, 0.0) {
  if (n_obs <= 0 || n_actions <= 0)
    throw std::invalid_argument("observation/action counts must be positive");
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw std::invalid_argument("theta must be positive and finite");
}

std::vector<double> SarsaAgent::action_dist(int obs) const {
  const double* q = q_.data() + static_cast<std::size_t>(obs) * n_actions_;
  std::vector<double> p(n_actions_);
  const double m = *std::max_element(q, q + n_actions_);
  double z = 0.0;
  for (int a = 0; a < n_actions_; ++a) {
    p[a] = std::exp((q[a] - m) / theta_);
    z += p[a];
  }
  for (int a = 0; a < n_actions_; ++a) p[a] /= z;
  return p;
}

int SarsaAgent::sample_action(int obs, RandomStream& rng) const {
  return rng.sample(action_dist(obs));
}

int SarsaAgent::greedy_action(int obs) const {
  int best = 0;
  for (int a = 1; a < n_actions_; ++a) {
    if (q(obs, a) > q(obs, best)) best = a;
  }
  return best;
}

SarsaEpisode sarsa_episode(const Environment& env, SarsaAgent& agent,
                           const SarsaConfig& config, double gamma_now,
                           RandomStream& rng) {
  ResetResult start = reset(env, rng);
  EnvState state = std::move(start.state);
  int obs = start.obs;
  int action = agent.sample_action(obs, rng);
  double ret = 0.0;
  std::int64_t steps = 0;
  for (std::int64_t t = 0; t < config.step_cap; ++t) {
    StepResult sr = step(env, state, action, rng);
    ret += sr.reward;
    ++steps;
    if (sr.terminal) {
      agent.bump_q(obs, action,
                   config.alpha * (sr.reward - agent.q(obs, action)));
      break;
    }
    const int next_action = agent.sample_action(sr.obs, rng);
    agent.bump_q(obs, action,
                 config.alpha * (sr.reward +
                                 gamma_now * agent.q(sr.obs, next_action) -
                                 agent.q(obs, action)));
    state = std::move(sr.state);
    obs = sr.obs;
    action = next_action;
  }
  return {ret, steps};
}

LearnCurve sarsa_train(const Environment& env, SarsaAgent& agent,
                       const SarsaConfig& config, const SarsaEvalHook& eval_hook,
                       const PointSink& sink) {
  if (agent.n_obs() != env.n_obs() || agent.n_actions() != env.n_actions())
    throw std::invalid_argument("agent table does not match the environment");
  if (config.step_cap < 1 || config.eval_every < 1 || config.n_trials < 0)
    throw std::invalid_argument("invalid SARSA schedule");

  RandomStream rng(config.seed);
  LearnCurve curve;
  const auto t0 = std::chrono::steady_clock::now();
  std::int64_t ticks = 0;

  auto gamma_at = [&](std::int64_t trial) {
    if (!config.gamma_schedule) return config.gamma;
    const GammaSchedule& g = *config.gamma_schedule;
    return std::min(g.cap, g.start + g.increment * static_cast<double>(trial));
  };
  auto record = [&](std::int64_t trial, double gamma_now) {
    if (!eval_hook) return;
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    curve.push_back({trial, ns, ticks, eval_hook(agent), gamma_now,
                     config.alpha, config.seed});
    if (sink) sink(curve.back());
  };

  record(0, gamma_at(0));
  for (std::int64_t trial = 0; trial < config.n_trials; ++trial) {
    const double gamma_now = gamma_at(trial);
    ticks += sarsa_episode(env, agent, config, gamma_now, rng).steps;
    if ((trial + 1) % config.eval_every == 0) record(trial + 1, gamma_now);
  }
  return curve;
}

} // namespace fsc
