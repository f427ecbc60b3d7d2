#include "fsc/policy_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fsc {

PolicyGraph::PolicyGraph(int n_nodes, int n_obs, int n_actions, double theta,
                         GraphConstraint constraint)
    : n_nodes_(n_nodes), n_obs_(n_obs), n_actions_(n_actions), theta_(theta),
      constraint_(constraint) {
  if (n_nodes <= 0 || n_obs <= 0 || n_actions <= 0)
    throw std::invalid_argument("graph shape counts must be positive");
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw std::invalid_argument("theta must be positive and finite");
  if (constraint == GraphConstraint::REACTIVE && n_nodes != n_obs)
    throw std::invalid_argument(
        "reactive constraint requires one node per observation (n_nodes " +
        std::to_string(n_nodes) + " vs n_obs " + std::to_string(n_obs) + ")");
  psi_size_ = n_nodes_ * n_actions_;
  eta_size_ = n_nodes_ * n_obs_ * n_nodes_;
  // All-zero weights: every distribution starts uniform.
  w_.assign(static_cast<std::size_t>(psi_size_) + eta_size_ +
                static_cast<std::size_t>(n_obs_) * n_nodes_,
            0.0);
}

std::string PolicyGraph::coord_name(int coord) const {
  if (coord < psi_size_)
    return "q_psi(" + std::to_string(coord / n_actions_) + "," +
           std::to_string(coord % n_actions_) + ")";
  if (coord < psi_size_ + eta_size_) {
    int rel = coord - psi_size_;
    const int next = rel % n_nodes_;
    rel /= n_nodes_;
    return "q_eta(" + std::to_string(rel / n_obs_) + "," +
           std::to_string(rel % n_obs_) + "," + std::to_string(next) + ")";
  }
  const int rel = coord - psi_size_ - eta_size_;
  return "q_eta0(" + std::to_string(rel / n_nodes_) + "," +
         std::to_string(rel % n_nodes_) + ")";
}

void PolicyGraph::softmax_row_into(const double* q, int len,
                                   std::vector<double>& out) const {
  out.resize(len);
  const double m = *std::max_element(q, q + len);
  double z = 0.0;
  for (int i = 0; i < len; ++i) {
    out[i] = std::exp((q[i] - m) / theta_);
    z += out[i];
  }
  for (int i = 0; i < len; ++i) out[i] /= z;
}

void PolicyGraph::softmax_log_grad_into(const double* q, int len,
                                        int base_coord, int chosen,
                                        GradSlice& out) const {
  out.clear();
  out.reserve(len);
  const double m = *std::max_element(q, q + len);
  double z = 0.0;
  for (int i = 0; i < len; ++i) z += std::exp((q[i] - m) / theta_);
  for (int b = 0; b < len; ++b) {
    const double p = std::exp((q[b] - m) / theta_) / z;
    out.push_back({base_coord + b, ((b == chosen ? 1.0 : 0.0) - p) / theta_});
  }
}

void PolicyGraph::action_dist_into(int node, std::vector<double>& out) const {
  softmax_row_into(w_.data() + psi_index(node, 0), n_actions_, out);
}

void PolicyGraph::node_transition_dist_into(int node, int obs,
                                            std::vector<double>& out) const {
  if (constraint_ == GraphConstraint::REACTIVE) {
    out.assign(n_nodes_, 0.0);
    out[obs] = 1.0;
    return;
  }
  softmax_row_into(w_.data() + eta_index(node, obs, 0), n_nodes_, out);
}

void PolicyGraph::initial_node_dist_into(int obs, std::vector<double>& out) const {
  if (constraint_ == GraphConstraint::REACTIVE) {
    out.assign(n_nodes_, 0.0);
    out[obs] = 1.0;
    return;
  }
  softmax_row_into(w_.data() + eta0_index(obs, 0), n_nodes_, out);
}

std::vector<double> PolicyGraph::action_dist(int node) const {
  std::vector<double> p;
  action_dist_into(node, p);
  return p;
}

std::vector<double> PolicyGraph::node_transition_dist(int node, int obs) const {
  std::vector<double> p;
  node_transition_dist_into(node, obs, p);
  return p;
}

std::vector<double> PolicyGraph::initial_node_dist(int obs) const {
  std::vector<double> p;
  initial_node_dist_into(obs, p);
  return p;
}

double PolicyGraph::log_psi(int node, int action) const {
  return std::log(action_dist(node)[action]);
}

double PolicyGraph::log_eta(int node, int obs, int next) const {
  if (constraint_ == GraphConstraint::REACTIVE)
    return next == obs ? 0.0 : -std::numeric_limits<double>::infinity();
  return std::log(node_transition_dist(node, obs)[next]);
}

double PolicyGraph::log_eta0(int obs, int node) const {
  if (constraint_ == GraphConstraint::REACTIVE)
    return node == obs ? 0.0 : -std::numeric_limits<double>::infinity();
  return std::log(initial_node_dist(obs)[node]);
}

void PolicyGraph::log_grad_action_into(int node, int action,
                                       GradSlice& out) const {
  softmax_log_grad_into(w_.data() + psi_index(node, 0), n_actions_,
                        psi_index(node, 0), action, out);
}

void PolicyGraph::log_grad_transition_into(int node, int obs, int next,
                                           GradSlice& out) const {
  out.clear();
  if (constraint_ == GraphConstraint::REACTIVE) return;
  softmax_log_grad_into(w_.data() + eta_index(node, obs, 0), n_nodes_,
                        eta_index(node, obs, 0), next, out);
}

void PolicyGraph::log_grad_initial_into(int obs, int node, GradSlice& out) const {
  out.clear();
  if (constraint_ == GraphConstraint::REACTIVE) return;
  softmax_log_grad_into(w_.data() + eta0_index(obs, 0), n_nodes_,
                        eta0_index(obs, 0), node, out);
}

GradSlice PolicyGraph::log_grad_action(int node, int action) const {
  GradSlice g;
  log_grad_action_into(node, action, g);
  return g;
}

GradSlice PolicyGraph::log_grad_transition(int node, int obs, int next) const {
  GradSlice g;
  log_grad_transition_into(node, obs, next, g);
  return g;
}

GradSlice PolicyGraph::log_grad_initial(int obs, int node) const {
  GradSlice g;
  log_grad_initial_into(obs, node, g);
  return g;
}

bool PolicyGraph::finite() const {
  return std::all_of(w_.begin(), w_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace {
constexpr int kFormatVersion = 1;
} // namespace

std::string graph_to_json(const PolicyGraph& g) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["n_nodes"] = g.n_nodes();
  j["n_obs"] = g.n_obs();
  j["n_actions"] = g.n_actions();
  j["theta"] = g.theta();
  j["constraint"] =
      g.constraint() == GraphConstraint::REACTIVE ? "reactive" : "none";
  const int psi_size = g.n_nodes() * g.n_actions();
  const int eta_size = g.n_nodes() * g.n_obs() * g.n_nodes();
  const int eta0_size = g.n_obs() * g.n_nodes();
  std::vector<double> q_psi(psi_size), q_eta(eta_size), q_eta0(eta0_size);
  for (int i = 0; i < psi_size; ++i) q_psi[i] = g.weight(i);
  for (int i = 0; i < eta_size; ++i) q_eta[i] = g.weight(psi_size + i);
  for (int i = 0; i < eta0_size; ++i) q_eta0[i] = g.weight(psi_size + eta_size + i);
  j["q_psi"] = q_psi;
  j["q_eta"] = q_eta;
  j["q_eta0"] = q_eta0;
  return j.dump(2);
}

PolicyGraph graph_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("graph document is not valid JSON: ") +
                                e.what());
  }
  int n_nodes, n_obs, n_actions;
  double theta;
  std::string constraint_name;
  std::vector<double> q_psi, q_eta, q_eta0;
  try {
    const int version = j.value("format_version", kFormatVersion);
    if (version != kFormatVersion)
      throw std::invalid_argument("unsupported graph format_version " +
                                  std::to_string(version));
    n_nodes = j.at("n_nodes").get<int>();
    n_obs = j.at("n_obs").get<int>();
    n_actions = j.at("n_actions").get<int>();
    theta = j.at("theta").get<double>();
    constraint_name = j.value("constraint", "none");
    q_psi = j.at("q_psi").get<std::vector<double>>();
    q_eta = j.at("q_eta").get<std::vector<double>>();
    q_eta0 = j.at("q_eta0").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(
        std::string("graph document is missing or mistypes a field: ") + e.what());
  }
  GraphConstraint constraint;
  if (constraint_name == "none") constraint = GraphConstraint::NONE;
  else if (constraint_name == "reactive") constraint = GraphConstraint::REACTIVE;
  else
    throw std::invalid_argument("unknown graph constraint \"" + constraint_name +
                                "\"");
  PolicyGraph g(n_nodes, n_obs, n_actions, theta, constraint);
  const std::size_t psi_size = static_cast<std::size_t>(n_nodes) * n_actions;
  const std::size_t eta_size =
      static_cast<std::size_t>(n_nodes) * n_obs * n_nodes;
  const std::size_t eta0_size = static_cast<std::size_t>(n_obs) * n_nodes;
  if (q_psi.size() != psi_size || q_eta.size() != eta_size ||
      q_eta0.size() != eta0_size)
    throw std::invalid_argument("graph weight arrays do not match the declared shape");
  int c = 0;
  for (double v : q_psi) g.set_weight(c++, v);
  for (double v : q_eta) g.set_weight(c++, v);
  for (double v : q_eta0) g.set_weight(c++, v);
  if (!g.finite())
    throw std::invalid_argument("graph document contains a non-finite weight");
  return g;
}

PolicyGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return graph_from_json(ss.str());
}

void save_graph_file(const PolicyGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file: " + path);
  out << graph_to_json(g) << '\n';
}

} // namespace fsc
