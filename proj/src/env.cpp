#include "fsc/env.hpp"

#include <stdexcept>

namespace fsc {

int Environment::n_obs() const {
  return is_tabular() ? tabular().n_obs : cart_pole().n_obs();
}

int Environment::n_actions() const {
  return is_tabular() ? tabular().n_actions : cart_pole().n_actions();
}

ResetResult reset(const Environment& env, RandomStream& rng) {
  if (env.is_tabular()) {
    const TabularPomdp& m = env.tabular();
    const int s = rng.sample(std::span<const double>(m.pi0));
    const int o = rng.sample(std::span<const double>(
        m.B.data() + static_cast<std::size_t>(s) * m.n_obs, m.n_obs));
    return {EnvState(s), o};
  }
  const CartPoleEnv& c = env.cart_pole();
  CartState s{};
  if (c.start_jitter > 0.0) {
    s.x = rng.uniform(-c.start_jitter, c.start_jitter);
    s.x_dot = rng.uniform(-c.start_jitter, c.start_jitter);
    s.phi = rng.uniform(-c.start_jitter, c.start_jitter);
    s.phi_dot = rng.uniform(-c.start_jitter, c.start_jitter);
  }
  return {EnvState(s), c.observe(s)};
}

StepResult step(const Environment& env, const EnvState& state, int action,
                RandomStream& rng) {
  if (action < 0 || action >= env.n_actions())
    throw std::invalid_argument("action " + std::to_string(action) +
                                " out of range");
  if (env.is_tabular()) {
    const TabularPomdp& m = env.tabular();
    const int s = std::get<int>(state);
    const int s2 = rng.sample(std::span<const double>(
        m.T.data() + (static_cast<std::size_t>(s) * m.n_actions + action) * m.n_states,
        m.n_states));
    const double r = m.reward(s, action, s2);
    const int o = rng.sample(std::span<const double>(
        m.B.data() + static_cast<std::size_t>(s2) * m.n_obs, m.n_obs));
    const bool terminal = m.goal_obs && o == *m.goal_obs;
    return {EnvState(s2), r, o, terminal};
  }
  const CartPoleEnv& c = env.cart_pole();
  const CartState next = c.integrate(std::get<CartState>(state), action);
  const bool fail = c.failed(next);
  return {EnvState(next), fail ? 0.0 : c.step_reward, c.observe(next), fail};
}

} // namespace fsc
