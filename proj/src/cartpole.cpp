#include "fsc/cartpole.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fsc {

Partition::Partition(std::vector<double> interior_edges)
    : edges(std::move(interior_edges)) {
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i] < edges[i + 1]))
      throw std::invalid_argument("partition edges must be strictly increasing");
  for (double e : edges)
    if (!std::isfinite(e))
      throw std::invalid_argument("partition edges must be finite");
}

int Partition::bin(double v) const {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) -
                          edges.begin());
}

Partition make_geometric_partition(int cells, double bound, double ratio) {
  if (cells < 1) throw std::invalid_argument("partition needs at least 1 cell");
  if (!(bound > 0.0)) throw std::invalid_argument("partition bound must be positive");
  if (!(ratio > 0.0)) throw std::invalid_argument("partition ratio must be positive");
  std::vector<double> edges;
  auto geo_sum = [&](int k) { // 1 + ratio + ... + ratio^(k-1)
    return ratio == 1.0 ? static_cast<double>(k)
                        : (std::pow(ratio, k) - 1.0) / (ratio - 1.0);
  };
  if (cells % 2 == 0) {
    // Innermost edge at 0; per side, cell widths w, w*ratio, ... out to bound.
    const int h = cells / 2;
    const double w = bound / geo_sum(h);
    for (int k = h - 1; k >= 1; --k) edges.push_back(-w * geo_sum(k));
    edges.push_back(0.0);
    for (int k = 1; k <= h - 1; ++k) edges.push_back(w * geo_sum(k));
  } else {
    // Central cell straddles 0; flanking widths grow by ratio out to bound.
    const int h = (cells - 1) / 2;
    if (h > 0) {
      const double w0 = bound / (0.5 + ratio * geo_sum(h));
      for (int k = h - 1; k >= 0; --k)
        edges.push_back(-(w0 * (0.5 + ratio * geo_sum(k))));
      for (int k = 0; k <= h - 1; ++k)
        edges.push_back(w0 * (0.5 + ratio * geo_sum(k)));
    }
  }
  return Partition(std::move(edges));
}

int CartPoleEnv::n_obs() const {
  int n = pos_part.n_cells() * angle_part.n_cells();
  if (mode == CartPoleMode::FULL)
    n *= pos_vel_part.n_cells() * angle_vel_part.n_cells();
  return n;
}

int CartPoleEnv::observe(const CartState& s) const {
  const int ip = pos_part.bin(s.x);
  const int ia = angle_part.bin(s.phi);
  if (mode == CartPoleMode::PARTIAL) return ip * angle_part.n_cells() + ia;
  const int iv = pos_vel_part.bin(s.x_dot);
  const int iw = angle_vel_part.bin(s.phi_dot);
  return ((ip * angle_part.n_cells() + ia) * pos_vel_part.n_cells() + iv) *
             angle_vel_part.n_cells() +
         iw;
}

bool CartPoleEnv::failed(const CartState& s) const {
  return std::abs(s.x) > x_limit || std::abs(s.phi) > phi_limit;
}

CartState CartPoleEnv::integrate(const CartState& s, int action) const {
  const double force = action == 1 ? force_mag : -force_mag;
  const double total_mass = cart_mass + pole_mass;
  const double pml = pole_mass * half_pole_length;
  const double cos_phi = std::cos(s.phi);
  const double sin_phi = std::sin(s.phi);
  const double temp = (force + pml * s.phi_dot * s.phi_dot * sin_phi) / total_mass;
  const double phi_acc =
      (gravity * sin_phi - cos_phi * temp) /
      (half_pole_length * (4.0 / 3.0 - pole_mass * cos_phi * cos_phi / total_mass));
  const double x_acc = temp - pml * phi_acc * cos_phi / total_mass;
  CartState n;
  n.x = s.x + dt * s.x_dot;
  n.x_dot = s.x_dot + dt * x_acc;
  n.phi = s.phi + dt * s.phi_dot;
  n.phi_dot = s.phi_dot + dt * phi_acc;
  return n;
}

CartPoleEnv make_cart_pole(CartPoleMode mode) {
  CartPoleEnv env;
  env.mode = mode;
  if (mode == CartPoleMode::FULL) {
    env.pos_part = make_geometric_partition(6, env.x_limit);
    env.angle_part = make_geometric_partition(3, env.phi_limit);
    env.pos_vel_part = make_geometric_partition(3, 2.0);
    env.angle_vel_part = make_geometric_partition(3, 3.0);
  } else {
    env.pos_part = make_geometric_partition(8, env.x_limit);
    env.angle_part = make_geometric_partition(6, env.phi_limit);
  }
  return env;
}

CartPoleEnv make_cart_pole(CartPoleMode mode, const Partition& pos,
                           const Partition& angle, const Partition& pos_vel,
                           const Partition& angle_vel) {
  CartPoleEnv env;
  env.mode = mode;
  env.pos_part = pos;
  env.angle_part = angle;
  env.pos_vel_part = pos_vel;
  env.angle_vel_part = angle_vel;
  return env;
}

} // namespace fsc
