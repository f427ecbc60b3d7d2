#pragma once

#include <string>
#include <vector>

namespace fsc {

enum class GraphConstraint { NONE, REACTIVE };

/// One (weight coordinate, partial derivative) pair. Coordinates are flat
/// indices into the graph's weight vector; see PolicyGraph::psi_index and
/// friends.
struct GradEntry {
  int coord;
  double value;
};

using GradSlice = std::vector<GradEntry>;

/// Stochastic finite-state controller with soft-max parameterization.
/// Action weights q_psi (node, action), transition weights q_eta
/// (node, obs, node'), initial-node weights q_eta0 (obs, node), all stored
/// in one flat weight vector. Under the REACTIVE constraint the graph has
/// one node per observation and node transitions are forced to follow the
/// observation; the eta tables stay allocated but are inert.
class PolicyGraph {
public:
  PolicyGraph() = default;
  PolicyGraph(int n_nodes, int n_obs, int n_actions, double theta = 1.0,
              GraphConstraint constraint = GraphConstraint::NONE);

  int n_nodes() const { return n_nodes_; }
  int n_obs() const { return n_obs_; }
  int n_actions() const { return n_actions_; }
  double theta() const { return theta_; }
  GraphConstraint constraint() const { return constraint_; }

  // flat weight coordinates
  int weight_count() const { return static_cast<int>(w_.size()); }
  int psi_index(int node, int action) const { return node * n_actions_ + action; }
  int eta_index(int node, int obs, int next) const {
    return psi_size_ + (node * n_obs_ + obs) * n_nodes_ + next;
  }
  int eta0_index(int obs, int node) const {
    return psi_size_ + eta_size_ + obs * n_nodes_ + node;
  }
  double weight(int coord) const { return w_[coord]; }
  void set_weight(int coord, double v) { w_[coord] = v; }
  void add_weight(int coord, double dv) { w_[coord] += dv; }
  /// Human-readable coordinate name, e.g. "q_psi(1,0)".
  std::string coord_name(int coord) const;

  /// Soft-max action distribution psi(node, .).
  std::vector<double> action_dist(int node) const;
  /// Node transition distribution eta(node, obs, .); forced point mass on
  /// the observation's node under REACTIVE.
  std::vector<double> node_transition_dist(int node, int obs) const;
  /// Initial node distribution eta0(obs, .); forced under REACTIVE.
  std::vector<double> initial_node_dist(int obs) const;

  // Allocation-free variants for sampling loops.
  void action_dist_into(int node, std::vector<double>& out) const;
  void node_transition_dist_into(int node, int obs, std::vector<double>& out) const;
  void initial_node_dist_into(int obs, std::vector<double>& out) const;

  double log_psi(int node, int action) const;
  double log_eta(int node, int obs, int next) const;
  double log_eta0(int obs, int node) const;

  /// d ln psi(node, action) / d q_psi(node, b) = (1[action=b] - psi_b) / theta.
  GradSlice log_grad_action(int node, int action) const;
  /// Same form over the eta (node, obs, .) row; empty under REACTIVE.
  GradSlice log_grad_transition(int node, int obs, int next) const;
  /// Same form over the eta0 (obs, .) row; empty under REACTIVE.
  GradSlice log_grad_initial(int obs, int node) const;

  // Allocation-free variants for sampling loops.
  void log_grad_action_into(int node, int action, GradSlice& out) const;
  void log_grad_transition_into(int node, int obs, int next, GradSlice& out) const;
  void log_grad_initial_into(int obs, int node, GradSlice& out) const;

  bool finite() const;

private:
  void softmax_row_into(const double* q, int len, std::vector<double>& out) const;
  void softmax_log_grad_into(const double* q, int len, int base_coord,
                             int chosen, GradSlice& out) const;

  int n_nodes_ = 0;
  int n_obs_ = 0;
  int n_actions_ = 0;
  int psi_size_ = 0;
  int eta_size_ = 0;
  double theta_ = 1.0;
  GraphConstraint constraint_ = GraphConstraint::NONE;
  std::vector<double> w_;
};

/// JSON round trip with a format_version tag. Deserialization rejects
/// malformed documents, shape mismatches, non-positive theta and
/// non-finite weights.
std::string graph_to_json(const PolicyGraph& g);
PolicyGraph graph_from_json(const std::string& text);
PolicyGraph load_graph_file(const std::string& path);
void save_graph_file(const PolicyGraph& g, const std::string& path);

} // namespace fsc
