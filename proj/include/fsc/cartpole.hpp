#pragma once

#include <numbers>
#include <vector>

namespace fsc {

/// One-dimensional partition of the real line given by its interior edges
/// (strictly increasing). m interior edges define m+1 cells; a value maps
/// to the number of edges <= it.
struct Partition {
  std::vector<double> edges;

  Partition() = default;
  explicit Partition(std::vector<double> interior_edges);

  int n_cells() const { return static_cast<int>(edges.size()) + 1; }
  int bin(double v) const;
};

/// Symmetric partition of [-bound, bound] into `cells` cells whose widths
/// grow geometrically (factor `ratio`) away from the center, so the finest
/// resolution sits around zero.
Partition make_geometric_partition(int cells, double bound, double ratio = 2.0);

enum class CartPoleMode { FULL, PARTIAL };

struct CartState {
  double x = 0.0;       // cart position, m
  double x_dot = 0.0;   // cart velocity, m/s
  double phi = 0.0;     // pole angle, rad
  double phi_dot = 0.0; // pole angular velocity, rad/s
};

/// Cart-pole balancing environment with discretized observations.
/// Physics follows the classical benchmark; decisions at 50 Hz.
struct CartPoleEnv {
  // physics
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_pole_length = 0.5;
  double force_mag = 10.0;
  double dt = 0.02;

  // failure bounds
  double x_limit = 2.4;
  double phi_limit = 12.0 * std::numbers::pi / 180.0;

  double step_reward = 1.0;

  CartPoleMode mode = CartPoleMode::PARTIAL;
  Partition pos_part;       // cart position
  Partition angle_part;     // pole angle
  Partition pos_vel_part;   // cart velocity (FULL only)
  Partition angle_vel_part; // pole angular velocity (FULL only)

  /// Uniform start jitter half-width applied to every component; 0 gives
  /// the exactly centered deterministic start.
  double start_jitter = 0.0;

  int n_obs() const;
  int n_actions() const { return 2; }

  /// Observation index for a physical state. In PARTIAL mode this is a
  /// function of (x, phi) only.
  int observe(const CartState& s) const;

  bool failed(const CartState& s) const;

  /// One Euler step under action 0 (push left) or 1 (push right).
  CartState integrate(const CartState& s, int action) const;
};

/// Factory with the partition counts used by the two observability
/// settings: FULL = 6 position x 3 angle x 3 x 3 velocity cells,
/// PARTIAL = 8 position x 6 angle cells, velocities never observed.
CartPoleEnv make_cart_pole(CartPoleMode mode);
CartPoleEnv make_cart_pole(CartPoleMode mode, const Partition& pos,
                           const Partition& angle,
                           const Partition& pos_vel = Partition{},
                           const Partition& angle_vel = Partition{});

} // namespace fsc
