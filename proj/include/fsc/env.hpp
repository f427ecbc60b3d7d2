#pragma once

#include <variant>

#include "fsc/cartpole.hpp"
#include "fsc/pomdp.hpp"
#include "fsc/rng.hpp"

namespace fsc {

/// Runtime environment state: a tabular state index or a cart-pole
/// physical state.
using EnvState = std::variant<int, CartState>;

/// Read-only environment handle dispatching over the two model kinds.
/// Models are immutable and shareable; all randomness comes from the
/// caller's RandomStream.
class Environment {
public:
  explicit Environment(TabularPomdp m) : model_(std::move(m)) {}
  explicit Environment(CartPoleEnv m) : model_(std::move(m)) {}

  int n_obs() const;
  int n_actions() const;
  bool is_tabular() const { return std::holds_alternative<TabularPomdp>(model_); }
  const TabularPomdp& tabular() const { return std::get<TabularPomdp>(model_); }
  const CartPoleEnv& cart_pole() const { return std::get<CartPoleEnv>(model_); }

private:
  std::variant<TabularPomdp, CartPoleEnv> model_;
};

struct ResetResult {
  EnvState state;
  int obs;
};

struct StepResult {
  EnvState state;
  double reward;
  int obs;
  bool terminal;
};

/// Draws the initial state and first observation: s0 ~ pi0 then o0 ~ B
/// for tabular models, centered (optionally jittered) start for cart-pole.
ResetResult reset(const Environment& env, RandomStream& rng);

/// One environment transition. Tabular: s' ~ T, r = R(s,a,s'), o ~ B,
/// terminal iff o equals the goal observation. Cart-pole: one Euler step,
/// terminal on bound violation, reward per surviving step.
StepResult step(const Environment& env, const EnvState& state, int action,
                RandomStream& rng);

} // namespace fsc
