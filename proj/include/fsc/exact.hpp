#pragma once

#include <cstdint>
#include <optional>

#include "fsc/pomdp.hpp"
#include "fsc/policy_graph.hpp"
#include "fsc/vaps.hpp"

namespace fsc {

/// Exact controller value on the cross-product chain over (state, node)
/// pairs. v0 is the value under the initial state/observation/node draw.
struct CrossValue {
  int n_states = 0;
  int n_nodes = 0;
  std::vector<double> V; // (s, n) row-major
  double v0 = 0.0;

  double value(int s, int n) const { return V[static_cast<std::size_t>(s) * n_nodes + n]; }
};

enum class SolveMethod { AUTO, DENSE, ITERATIVE };

/// Solves V(s,n) = sum_a psi(n,a) sum_s' T(s,a,s') [R(s,a,s') +
/// gamma sum_o B(s',o) sum_n' eta(n,o,n') V(s',n')]. AUTO uses a dense LU
/// solve up to 10^4 cross-product states and successive approximation
/// (residual < 1e-10) above.
CrossValue exact_value(const TabularPomdp& pomdp, const PolicyGraph& graph,
                       SolveMethod method = SolveMethod::AUTO);

/// Probability of an observable-and-internal prefix under the controller,
/// by forward filtering over hidden states. Rewards filter states through
/// the deterministic reward table; impossible prefixes return 0.
double prefix_prob(const TabularPomdp& pomdp, const PolicyGraph& graph,
                   const TrajectoryPrefix& prefix);

/// Central finite differences of the trajectory-error objective (minus the
/// exact value) with respect to every weight coordinate.
GradSlice finite_diff_gradient(const TabularPomdp& pomdp,
                               const PolicyGraph& graph, double h = 1e-6,
                               SolveMethod method = SolveMethod::AUTO);

struct ExactGdConfig {
  double alpha = 0.1;
  std::int64_t n_iters = 100;
  double fd_step = 1e-6;
  SolveMethod method = SolveMethod::AUTO;
  std::uint64_t seed = 0; // recorded in curve points only
  /// Stop after the first iteration whose value reaches this level.
  std::optional<double> stop_value;
};

/// Gradient descent on the exact objective: w <- w - alpha * grad,
/// recording the exact value and elapsed wall clock per iteration.
/// Aborts with a diagnostic if the value decreases for 50 consecutive
/// iterations.
LearnCurve exact_gradient_descent(const TabularPomdp& pomdp,
                                  PolicyGraph& graph,
                                  const ExactGdConfig& config,
                                  const PointSink& sink = {});

/// Value iteration on the underlying MDP to residual < 1e-10; returns the
/// optimal value under pi0. The reference denominator for
/// percentage-of-optimal curves.
double mdp_optimal_value(const TabularPomdp& pomdp);

} // namespace fsc
