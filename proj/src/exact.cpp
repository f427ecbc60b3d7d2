#include "fsc/exact.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fsc {

namespace {

constexpr double kResidualTol = 1e-10;
constexpr std::int64_t kMaxSweeps = 5'000'000;
constexpr int kDenseLimit = 10'000; // cross-product states

struct GraphTables {
  int N, O, A;
  std::vector<double> psi;  // (n, a)
  std::vector<double> eta;  // (n, o, n')
  std::vector<double> eta0; // (o, n)
};

GraphTables tabulate(const PolicyGraph& g) {
  GraphTables t{g.n_nodes(), g.n_obs(), g.n_actions(), {}, {}, {}};
  t.psi.resize(static_cast<std::size_t>(t.N) * t.A);
  t.eta.resize(static_cast<std::size_t>(t.N) * t.O * t.N);
  t.eta0.resize(static_cast<std::size_t>(t.O) * t.N);
  for (int n = 0; n < t.N; ++n) {
    const auto pa = g.action_dist(n);
    for (int a = 0; a < t.A; ++a) t.psi[n * t.A + a] = pa[a];
    for (int o = 0; o < t.O; ++o) {
      const auto pn = g.node_transition_dist(n, o);
      for (int n2 = 0; n2 < t.N; ++n2)
        t.eta[(static_cast<std::size_t>(n) * t.O + o) * t.N + n2] = pn[n2];
    }
  }
  for (int o = 0; o < t.O; ++o) {
    const auto pn = g.initial_node_dist(o);
    for (int n = 0; n < t.N; ++n) t.eta0[o * t.N + n] = pn[n];
  }
  return t;
}

} // namespace

CrossValue exact_value(const TabularPomdp& m, const PolicyGraph& graph,
                       SolveMethod method) {
  if (graph.n_obs() != m.n_obs || graph.n_actions() != m.n_actions)
    throw std::invalid_argument("graph shape does not match the model");
  if (!(m.gamma < 1.0))
    throw std::invalid_argument("exact evaluation needs gamma < 1");

  const int S = m.n_states, N = graph.n_nodes(), A = m.n_actions, O = m.n_obs;
  const int K = S * N;
  const GraphTables g = tabulate(graph);

  // D(s, n, s') = sum_a psi(n,a) T(s,a,s'): the state kernel under node n.
  std::vector<double> D(static_cast<std::size_t>(S) * N * S, 0.0);
  for (int s = 0; s < S; ++s)
    for (int n = 0; n < N; ++n) {
      double* row = D.data() + (static_cast<std::size_t>(s) * N + n) * S;
      for (int a = 0; a < A; ++a) {
        const double pa = g.psi[n * A + a];
        if (pa == 0.0) continue;
        const double* trow =
            m.T.data() + (static_cast<std::size_t>(s) * A + a) * S;
        for (int s2 = 0; s2 < S; ++s2) row[s2] += pa * trow[s2];
      }
    }

  // C(n, s', n') = sum_o B(s',o) eta(n,o,n'): the node kernel at s'.
  std::vector<double> C(static_cast<std::size_t>(N) * S * N, 0.0);
  for (int n = 0; n < N; ++n)
    for (int s2 = 0; s2 < S; ++s2) {
      double* row = C.data() + (static_cast<std::size_t>(n) * S + s2) * N;
      for (int o = 0; o < O; ++o) {
        const double bo = m.obs_prob(s2, o);
        if (bo == 0.0) continue;
        const double* erow =
            g.eta.data() + (static_cast<std::size_t>(n) * O + o) * N;
        for (int n2 = 0; n2 < N; ++n2) row[n2] += bo * erow[n2];
      }
    }

  // b(s, n) = sum_a psi(n,a) sum_s' T(s,a,s') R(s,a,s').
  std::vector<double> b(static_cast<std::size_t>(K), 0.0);
  for (int s = 0; s < S; ++s)
    for (int n = 0; n < N; ++n) {
      double acc = 0.0;
      for (int a = 0; a < A; ++a) {
        const double pa = g.psi[n * A + a];
        if (pa == 0.0) continue;
        const std::size_t base = (static_cast<std::size_t>(s) * A + a) * S;
        double er = 0.0;
        for (int s2 = 0; s2 < S; ++s2) er += m.T[base + s2] * m.R[base + s2];
        acc += pa * er;
      }
      b[static_cast<std::size_t>(s) * N + n] = acc;
    }

  if (method == SolveMethod::AUTO)
    method = K <= kDenseLimit ? SolveMethod::DENSE : SolveMethod::ITERATIVE;

  CrossValue out;
  out.n_states = S;
  out.n_nodes = N;
  out.V.assign(K, 0.0);

  if (method == SolveMethod::DENSE) {
    // (I - gamma P) V = b with P[(s,n),(s',n')] = D(s,n,s') C(n,s',n').
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(K, K);
    for (int s = 0; s < S; ++s)
      for (int n = 0; n < N; ++n) {
        const int row = s * N + n;
        const double* drow = D.data() + (static_cast<std::size_t>(s) * N + n) * S;
        for (int s2 = 0; s2 < S; ++s2) {
          if (drow[s2] == 0.0) continue;
          const double* crow =
              C.data() + (static_cast<std::size_t>(n) * S + s2) * N;
          for (int n2 = 0; n2 < N; ++n2)
            M(row, s2 * N + n2) -= m.gamma * drow[s2] * crow[n2];
        }
      }
    Eigen::Map<const Eigen::VectorXd> bv(b.data(), K);
    Eigen::VectorXd V = M.partialPivLu().solve(bv);
    for (int i = 0; i < K; ++i) out.V[i] = V(i);
  } else {
    std::vector<double> V(K, 0.0), U(K, 0.0), Vn(K, 0.0);
    double residual = 0.0;
    std::int64_t sweep = 0;
    for (;; ++sweep) {
      if (sweep >= kMaxSweeps)
        throw std::runtime_error(
            "iterative evaluation did not converge; residual " +
            std::to_string(residual));
      // U(s', n) = sum_n' C(n, s', n') V(s', n').
      for (int s2 = 0; s2 < S; ++s2)
        for (int n = 0; n < N; ++n) {
          const double* crow =
              C.data() + (static_cast<std::size_t>(n) * S + s2) * N;
          const double* vrow = V.data() + static_cast<std::size_t>(s2) * N;
          double acc = 0.0;
          for (int n2 = 0; n2 < N; ++n2) acc += crow[n2] * vrow[n2];
          U[static_cast<std::size_t>(s2) * N + n] = acc;
        }
      residual = 0.0;
      for (int s = 0; s < S; ++s)
        for (int n = 0; n < N; ++n) {
          const double* drow =
              D.data() + (static_cast<std::size_t>(s) * N + n) * S;
          double acc = 0.0;
          for (int s2 = 0; s2 < S; ++s2)
            acc += drow[s2] * U[static_cast<std::size_t>(s2) * N + n];
          const std::size_t i = static_cast<std::size_t>(s) * N + n;
          Vn[i] = b[i] + m.gamma * acc;
          residual = std::max(residual, std::abs(Vn[i] - V[i]));
        }
      V.swap(Vn);
      if (residual < kResidualTol) break;
    }
    out.V = std::move(V);
  }

  double v0 = 0.0;
  for (int s = 0; s < S; ++s) {
    if (m.pi0[s] == 0.0) continue;
    double acc = 0.0;
    for (int o = 0; o < O; ++o) {
      const double bo = m.obs_prob(s, o);
      if (bo == 0.0) continue;
      double nacc = 0.0;
      for (int n = 0; n < N; ++n) nacc += g.eta0[o * N + n] * out.value(s, n);
      acc += bo * nacc;
    }
    v0 += m.pi0[s] * acc;
  }
  out.v0 = v0;
  return out;
}

double prefix_prob(const TabularPomdp& m, const PolicyGraph& graph,
                   const TrajectoryPrefix& prefix) {
  if (graph.n_obs() != m.n_obs || graph.n_actions() != m.n_actions)
    throw std::invalid_argument("graph shape does not match the model");
  const int S = m.n_states;
  std::vector<double> beta(m.pi0), next(S);
  double scalar = 1.0;
  int prev_node = -1;
  for (std::size_t j = 0; j < prefix.size(); ++j) {
    const StepRecord& rec = prefix[j];
    for (int s = 0; s < S; ++s) beta[s] *= m.obs_prob(s, rec.obs);
    const double pn = j == 0
                          ? graph.initial_node_dist(rec.obs)[rec.node]
                          : graph.node_transition_dist(prev_node, rec.obs)[rec.node];
    scalar *= pn * graph.action_dist(rec.node)[rec.action];
    if (scalar == 0.0) return 0.0;
    next.assign(S, 0.0);
    for (int s = 0; s < S; ++s) {
      if (beta[s] == 0.0) continue;
      for (int s2 = 0; s2 < S; ++s2) {
        const double t = m.trans(s, rec.action, s2);
        // Deterministic rewards: the observed reward filters transitions.
        if (t > 0.0 && m.reward(s, rec.action, s2) == rec.reward)
          next[s2] += beta[s] * t;
      }
    }
    beta.swap(next);
    prev_node = rec.node;
  }
  double p = 0.0;
  for (double v : beta) p += v;
  return scalar * p;
}

GradSlice finite_diff_gradient(const TabularPomdp& m, const PolicyGraph& graph,
                               double h, SolveMethod method) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  PolicyGraph g = graph;
  GradSlice out;
  out.reserve(g.weight_count());
  for (int k = 0; k < g.weight_count(); ++k) {
    const double w0 = g.weight(k);
    g.set_weight(k, w0 + h);
    const double vp = exact_value(m, g, method).v0;
    g.set_weight(k, w0 - h);
    const double vm = exact_value(m, g, method).v0;
    g.set_weight(k, w0);
    // Objective is the trajectory error, i.e. minus the value.
    out.push_back({k, -(vp - vm) / (2.0 * h)});
  }
  return out;
}

LearnCurve exact_gradient_descent(const TabularPomdp& m, PolicyGraph& graph,
                                  const ExactGdConfig& config,
                                  const PointSink& sink) {
  if (config.n_iters < 0)
    throw std::invalid_argument("n_iters must be nonnegative");
  LearnCurve curve;
  const auto t0 = std::chrono::steady_clock::now();
  std::int64_t ticks = 0; // exact evaluations performed
  auto record = [&](std::int64_t iter, double v) {
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    curve.push_back({iter, ns, ticks, v, m.gamma, config.alpha, config.seed});
    if (sink) sink(curve.back());
  };

  double v = exact_value(m, graph, config.method).v0;
  ticks += 1;
  record(0, v);
  if (config.stop_value && v >= *config.stop_value) return curve;

  int declines = 0;
  for (std::int64_t it = 1; it <= config.n_iters; ++it) {
    const GradSlice grad =
        finite_diff_gradient(m, graph, config.fd_step, config.method);
    for (const GradEntry& e : grad) graph.add_weight(e.coord, -config.alpha * e.value);
    ticks += 2 * static_cast<std::int64_t>(grad.size()) + 1;
    const double v_new = exact_value(m, graph, config.method).v0;
    record(it, v_new);
    if (config.stop_value && v_new >= *config.stop_value) return curve;
    if (v_new < v) {
      if (++declines >= 50)
        throw std::runtime_error(
            "exact gradient descent diverged: value fell for 50 consecutive "
            "iterations (last " + std::to_string(v_new) + ")");
    } else {
      declines = 0;
    }
    v = v_new;
  }
  return curve;
}

double mdp_optimal_value(const TabularPomdp& m) {
  if (!(m.gamma < 1.0))
    throw std::invalid_argument("value iteration needs gamma < 1");
  const int S = m.n_states, A = m.n_actions;
  std::vector<double> V(S, 0.0), Vn(S, 0.0);
  double residual = 0.0;
  for (std::int64_t sweep = 0;; ++sweep) {
    if (sweep >= kMaxSweeps)
      throw std::runtime_error("value iteration did not converge; residual " +
                               std::to_string(residual));
    residual = 0.0;
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        const std::size_t base = (static_cast<std::size_t>(s) * A + a) * S;
        double q = 0.0;
        for (int s2 = 0; s2 < S; ++s2)
          q += m.T[base + s2] * (m.R[base + s2] + m.gamma * V[s2]);
        best = std::max(best, q);
      }
      Vn[s] = best;
      residual = std::max(residual, std::abs(Vn[s] - V[s]));
    }
    V.swap(Vn);
    if (residual < kResidualTol) break;
  }
  double v = 0.0;
  for (int s = 0; s < S; ++s) v += m.pi0[s] * V[s];
  return v;
}

} // namespace fsc
