#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fsc/rng.hpp"

namespace fsc {

/// Finite POMDP with dense transition, observation and reward tables.
/// Immutable after construction; validate() is called by every factory
/// and by the JSON loader.
struct TabularPomdp {
  int n_states = 0;
  int n_obs = 0;
  int n_actions = 0;
  std::vector<double> T;    // (s, a, s') row-major
  std::vector<double> B;    // (s, o) row-major
  std::vector<double> R;    // (s, a, s') row-major
  double gamma = 0.9;
  std::vector<double> pi0;  // initial state distribution
  std::optional<int> goal_obs;

  double trans(int s, int a, int s2) const {
    return T[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double obs_prob(int s, int o) const {
    return B[static_cast<std::size_t>(s) * n_obs + o];
  }
  double reward(int s, int a, int s2) const {
    return R[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }

  double& trans_ref(int s, int a, int s2) {
    return T[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& obs_prob_ref(int s, int o) {
    return B[static_cast<std::size_t>(s) * n_obs + o];
  }
  double& reward_ref(int s, int a, int s2) {
    return R[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }

  /// Checks row-stochasticity of T and B (tolerance 1e-12), the pi0
  /// distribution, and that goal-emitting states are zero-reward sinks.
  /// Throws std::invalid_argument naming the offending row.
  void validate() const;
};

/// Maps (location, loaded) pairs of the load/unload corridor onto state
/// indices. Location 0 is the unload end (always unloaded after arrival),
/// location n_locations-1 is the load end (always loaded).
struct LoadUnloadLayout {
  int n_locations;

  explicit LoadUnloadLayout(int L) : n_locations(L) {}

  int n_states() const { return 2 * n_locations - 2; }

  int state(int location, bool loaded) const;
  int location_of(int state) const;
  bool loaded_of(int state) const;

  static constexpr int kObsUnload = 0;
  static constexpr int kObsLoad = 1;
  static constexpr int kObsMid = 2;
  static constexpr int kActionLeft = 0;
  static constexpr int kActionRight = 1;
};

/// Builds the load/unload corridor POMDP: 2L-2 states, 3 observations,
/// 2 actions, reward 1 on arrival at the unload end while loaded.
/// The start distribution is a point mass on the unload end.
TabularPomdp make_load_unload(int n_locations, double gamma = 0.9);

/// JSON model file round trip. Loading re-runs validate() and reports the
/// offending row on failure.
std::string pomdp_to_json(const TabularPomdp& m);
TabularPomdp pomdp_from_json(const std::string& text);
TabularPomdp load_pomdp_file(const std::string& path);
void save_pomdp_file(const TabularPomdp& m, const std::string& path);

} // namespace fsc
