#include "fsc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace fsc {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<double> scaled(const std::vector<double>& xs, double factor) {
  std::vector<double> out = xs;
  for (double& x : out) x *= factor;
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string(what) + " is not valid JSON: " +
                                e.what());
  }
}

Environment env_from_object(const json& j) {
  const std::string id = j.at("id").get<std::string>();
  if (id == "load_unload") {
    return Environment(make_load_unload(j.at("n_locations").get<int>(),
                                        j.value("gamma", 0.9)));
  }
  if (id == "cart_pole") {
    const std::string mode_name = j.value("mode", "partial");
    CartPoleMode mode;
    if (mode_name == "partial") mode = CartPoleMode::PARTIAL;
    else if (mode_name == "full") mode = CartPoleMode::FULL;
    else
      throw std::invalid_argument("unknown cart_pole mode \"" + mode_name +
                                  "\" (want \"full\" or \"partial\")");
    CartPoleEnv env = make_cart_pole(mode);
    env.start_jitter = j.value("start_jitter", 0.0);
    return Environment(env);
  }
  if (id == "pomdp_file")
    return Environment(load_pomdp_file(j.at("path").get<std::string>()));
  throw std::invalid_argument("unknown environment id \"" + id + "\"");
}

LearnerConfig learner_from_json(const json& j) {
  LearnerConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.gamma = j.value("gamma", c.gamma);
  if (j.contains("error_kind")) {
    const std::string k = j["error_kind"].get<std::string>();
    if (k == "e_policy") c.error_kind = ErrorKind::E_POLICY;
    else if (k == "e_policy_prime") c.error_kind = ErrorKind::E_POLICY_PRIME;
    else throw std::invalid_argument("unknown error_kind \"" + k + "\"");
  }
  if (j.contains("termination")) {
    const std::string t = j["termination"].get<std::string>();
    if (t == "goal_obs") c.termination = Termination::GOAL_OBS;
    else if (t == "geometric") c.termination = Termination::GEOMETRIC;
    else if (t == "step_cap") c.termination = Termination::STEP_CAP;
    else throw std::invalid_argument("unknown termination \"" + t + "\"");
  }
  c.step_cap = j.value("step_cap", c.step_cap);
  c.n_trials = j.value("n_trials", c.n_trials);
  c.eval_every = j.value("eval_every", c.eval_every);
  if (j.contains("gamma_schedule") && !j["gamma_schedule"].is_null()) {
    const json& s = j["gamma_schedule"];
    c.gamma_schedule = GammaSchedule{s.at("start").get<double>(),
                                     s.at("increment").get<double>(),
                                     s.at("cap").get<double>()};
  }
  return c;
}

SarsaConfig sarsa_from_json(const json& j) {
  SarsaConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.gamma = j.value("gamma", c.gamma);
  c.theta = j.value("theta", c.theta);
  c.step_cap = j.value("step_cap", c.step_cap);
  c.n_trials = j.value("n_trials", c.n_trials);
  c.eval_every = j.value("eval_every", c.eval_every);
  if (j.contains("gamma_schedule") && !j["gamma_schedule"].is_null()) {
    const json& s = j["gamma_schedule"];
    c.gamma_schedule = GammaSchedule{s.at("start").get<double>(),
                                     s.at("increment").get<double>(),
                                     s.at("cap").get<double>()};
  }
  return c;
}

ExactGdConfig exact_from_json(const json& j) {
  ExactGdConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.n_iters = j.value("n_iters", c.n_iters);
  c.fd_step = j.value("fd_step", c.fd_step);
  return c;
}

// Seed salt for evaluation rollouts, so they never share draws with training.
constexpr std::uint64_t kEvalSalt = 0x4556414CULL;

// Seed salt for initial-weight jitter ("INIT").
constexpr std::uint64_t kInitSalt = 0x494E4954ULL;

} // namespace

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "vaps_fsc") return Algorithm::VAPS_FSC;
  if (name == "vaps_rp") return Algorithm::VAPS_RP;
  if (name == "sarsa") return Algorithm::SARSA;
  if (name == "exact_grad") return Algorithm::EXACT_GRAD;
  throw std::invalid_argument(
      "unknown algorithm \"" + name +
      "\" (want vaps_fsc, vaps_rp, sarsa or exact_grad)");
}

std::string algorithm_to_string(Algorithm a) {
  switch (a) {
    case Algorithm::VAPS_FSC: return "vaps_fsc";
    case Algorithm::VAPS_RP: return "vaps_rp";
    case Algorithm::SARSA: return "sarsa";
    case Algorithm::EXACT_GRAD: return "exact_grad";
  }
  return "?";
}

Environment env_from_json(const std::string& text) {
  const json j = parse_json(text, "environment document");
  if (j.contains("environment")) return env_from_object(j.at("environment"));
  if (j.contains("id")) return env_from_object(j);
  if (j.contains("n_states")) return Environment(pomdp_from_json(text));
  throw std::invalid_argument(
      "environment document has neither \"environment\", \"id\" nor \"n_states\"");
}

Environment load_env_file(const std::string& path) {
  return env_from_json(read_file(path));
}

ExperimentSpec experiment_from_json(const std::string& text) {
  const json j = parse_json(text, "experiment document");
  ExperimentSpec spec(env_from_object(j.at("environment")));
  spec.name = j.value("name", spec.name);
  spec.algorithm =
      algorithm_from_string(j.value("algorithm", std::string("vaps_fsc")));
  spec.n_nodes = j.value("n_nodes", spec.n_nodes);
  spec.theta = j.value("theta", spec.theta);
  if (j.contains("learner")) spec.learner = learner_from_json(j["learner"]);
  if (j.contains("sarsa")) spec.sarsa = sarsa_from_json(j["sarsa"]);
  if (j.contains("exact")) spec.exact = exact_from_json(j["exact"]);
  spec.n_seeds = j.value("n_seeds", spec.n_seeds);
  spec.base_seed = j.value("seed", spec.base_seed);
  spec.eval_trials = j.value("eval_trials", spec.eval_trials);
  spec.wall_clock_ticks = j.value("wall_clock_ticks", spec.wall_clock_ticks);
  spec.out_prefix = j.value("out", spec.out_prefix);
  if (spec.n_seeds < 1) throw std::invalid_argument("n_seeds must be at least 1");
  if (spec.n_nodes < 1) throw std::invalid_argument("n_nodes must be at least 1");
  if (spec.eval_trials < 1)
    throw std::invalid_argument("eval_trials must be at least 1");
  return spec;
}

ExperimentSpec load_experiment_file(const std::string& path) {
  return experiment_from_json(read_file(path));
}

namespace {

void write_curve_row(std::ostream& os, const CurvePoint& p,
                     bool wall_clock_ticks) {
  os << p.trial << ',' << (wall_clock_ticks ? p.wall_ns : p.step_ticks) << ','
     << fmt(p.performance) << ',' << fmt(p.gamma) << ',' << fmt(p.alpha) << ','
     << p.seed << '\n';
  os.flush();
}

} // namespace

void write_curve_csv(std::ostream& os, const LearnCurve& curve,
                     bool wall_clock_ticks) {
  os << "trial,ticks,performance,gamma,alpha,seed\n";
  os.flush();
  for (const CurvePoint& p : curve) write_curve_row(os, p, wall_clock_ticks);
}

void write_curve_file(const std::string& path, const LearnCurve& curve,
                      bool wall_clock_ticks) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curve file: " + path);
  write_curve_csv(out, curve, wall_clock_ticks);
}

double rollout_mean_length(const Environment& env, const PolicyGraph& graph,
                           std::int64_t step_cap, std::int64_t n_trials,
                           RandomStream& rng) {
  if (n_trials < 1) throw std::invalid_argument("need at least one rollout");
  const bool reactive = graph.constraint() == GraphConstraint::REACTIVE;
  std::vector<double> dist;
  std::int64_t total = 0;
  for (std::int64_t i = 0; i < n_trials; ++i) {
    ResetResult start = reset(env, rng);
    EnvState state = std::move(start.state);
    int obs = start.obs;
    int node = -1;
    for (std::int64_t t = 0; t < step_cap; ++t) {
      if (reactive) {
        node = obs;
      } else if (t == 0) {
        graph.initial_node_dist_into(obs, dist);
        node = rng.sample(dist);
      } else {
        graph.node_transition_dist_into(node, obs, dist);
        node = rng.sample(dist);
      }
      graph.action_dist_into(node, dist);
      StepResult sr = step(env, state, rng.sample(dist), rng);
      ++total;
      state = std::move(sr.state);
      obs = sr.obs;
      if (sr.terminal) break;
    }
  }
  return static_cast<double>(total) / static_cast<double>(n_trials);
}

double sarsa_rollout_length(const Environment& env, const SarsaAgent& agent,
                            std::int64_t step_cap, std::int64_t n_trials,
                            RandomStream& rng) {
  if (n_trials < 1) throw std::invalid_argument("need at least one rollout");
  std::int64_t total = 0;
  for (std::int64_t i = 0; i < n_trials; ++i) {
    ResetResult start = reset(env, rng);
    EnvState state = std::move(start.state);
    int obs = start.obs;
    for (std::int64_t t = 0; t < step_cap; ++t) {
      StepResult sr = step(env, state, agent.sample_action(obs, rng), rng);
      ++total;
      state = std::move(sr.state);
      obs = sr.obs;
      if (sr.terminal) break;
    }
  }
  return static_cast<double>(total) / static_cast<double>(n_trials);
}

namespace {

LearnCurve mean_curve(const std::vector<RunOutcome>& runs,
                      std::uint64_t base_seed) {
  LearnCurve mean;
  if (runs.empty()) return mean;
  const std::size_t len = runs.front().curve.size();
  for (const RunOutcome& r : runs)
    if (r.curve.size() != len)
      throw std::runtime_error("per-seed curves have different lengths");
  const double n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < len; ++i) {
    CurvePoint p = runs.front().curve[i];
    double perf = 0.0, wall = 0.0, ticks = 0.0;
    for (const RunOutcome& r : runs) {
      perf += r.curve[i].performance;
      wall += static_cast<double>(r.curve[i].wall_ns);
      ticks += static_cast<double>(r.curve[i].step_ticks);
    }
    p.performance = perf / n;
    p.wall_ns = std::llround(wall / n);
    p.step_ticks = std::llround(ticks / n);
    p.seed = base_seed;
    mean.push_back(p);
  }
  return mean;
}

} // namespace

namespace {

// Open-on-construction CSV stream for one seed's curve; rows are appended
// and flushed as evaluations happen.
class CurveCsvStream {
public:
  CurveCsvStream(const std::string& path, bool wall_clock_ticks)
      : out_(path), wall_(wall_clock_ticks) {
    if (!out_) throw std::runtime_error("cannot write curve file: " + path);
    out_ << "trial,ticks,performance,gamma,alpha,seed\n";
    out_.flush();
  }
  void row(const CurvePoint& p) { write_curve_row(out_, p, wall_); }

private:
  std::ofstream out_;
  bool wall_;
};

} // namespace

std::vector<RunOutcome> run_experiment(const ExperimentSpec& spec) {
  if (!spec.out_prefix.empty()) {
    const auto parent = std::filesystem::path(spec.out_prefix).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }

  std::vector<RunOutcome> runs(spec.n_seeds);
  auto run_one = [&spec, &runs](int r) {
    const std::uint64_t seed_r = derive_seed(spec.base_seed, r);
    RunOutcome out;
    out.seed = seed_r;

    std::optional<CurveCsvStream> csv;
    PointSink sink;
    if (!spec.out_prefix.empty()) {
      csv.emplace(spec.out_prefix + "_seed" + std::to_string(r) + ".csv",
                  spec.wall_clock_ticks);
      sink = [&csv](const CurvePoint& p) { csv->row(p); };
    }

    switch (spec.algorithm) {
      case Algorithm::VAPS_FSC:
      case Algorithm::VAPS_RP: {
        const bool reactive = spec.algorithm == Algorithm::VAPS_RP;
        PolicyGraph graph(reactive ? spec.env.n_obs() : spec.n_nodes,
                          spec.env.n_obs(), spec.env.n_actions(), spec.theta,
                          reactive ? GraphConstraint::REACTIVE
                                   : GraphConstraint::NONE);
        LearnerConfig cfg = spec.learner;
        cfg.seed = seed_r;
        EvalHook hook;
        RandomStream eval_rng(derive_seed(seed_r, kEvalSalt));
        if (spec.env.is_tabular()) {
          const TabularPomdp& m = spec.env.tabular();
          hook = [&m](const PolicyGraph& g) { return exact_value(m, g).v0; };
        } else {
          hook = [&](const PolicyGraph& g) {
            return rollout_mean_length(spec.env, g, cfg.step_cap,
                                       spec.eval_trials, eval_rng);
          };
        }
        out.curve = train(spec.env, graph, cfg, hook, sink);
        break;
      }
      case Algorithm::SARSA: {
        if (spec.env.is_tabular())
          throw std::invalid_argument(
              "the SARSA baseline runs on the cart-pole environment only");
        SarsaAgent agent(spec.env.n_obs(), spec.env.n_actions(),
                         spec.sarsa.theta);
        SarsaConfig cfg = spec.sarsa;
        cfg.seed = seed_r;
        RandomStream eval_rng(derive_seed(seed_r, kEvalSalt));
        SarsaEvalHook hook = [&](const SarsaAgent& a) {
          return sarsa_rollout_length(spec.env, a, cfg.step_cap,
                                      spec.eval_trials, eval_rng);
        };
        out.curve = sarsa_train(spec.env, agent, cfg, hook, sink);
        break;
      }
      case Algorithm::EXACT_GRAD: {
        if (!spec.env.is_tabular())
          throw std::invalid_argument(
              "exact gradient descent needs a tabular environment");
        PolicyGraph graph(spec.n_nodes, spec.env.n_obs(), spec.env.n_actions(),
                          spec.theta);
        // An exactly uniform start is a stationary point of the exact
        // gradient (node relabeling symmetry); only sampling noise could
        // break the tie, and this algorithm has none. Jitter the start.
        RandomStream init_rng(derive_seed(seed_r, kInitSalt));
        for (int k = 0; k < graph.weight_count(); ++k)
          graph.set_weight(k, init_rng.uniform(-0.1, 0.1));
        ExactGdConfig cfg = spec.exact;
        cfg.seed = seed_r;
        out.curve =
            exact_gradient_descent(spec.env.tabular(), graph, cfg, sink);
        break;
      }
    }

    out.final_performance =
        out.curve.empty() ? 0.0 : out.curve.back().performance;
    runs[r] = std::move(out);
  };

  // Seeds are independent jobs: each owns its generator, policy, and CSV
  // file, so running them on a pool changes nothing about the results.
  const unsigned hw = std::thread::hardware_concurrency();
  const int workers =
      std::min(spec.n_seeds, hw > 0 ? static_cast<int>(hw) : 1);
  if (workers <= 1) {
    for (int r = 0; r < spec.n_seeds; ++r) run_one(r);
  } else {
    std::vector<std::exception_ptr> errors(spec.n_seeds);
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r; (r = next.fetch_add(1)) < spec.n_seeds;) {
          try {
            run_one(r);
          } catch (...) {
            errors[r] = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  }

  if (!spec.out_prefix.empty())
    write_curve_file(spec.out_prefix + "_mean.csv",
                     mean_curve(runs, spec.base_seed), spec.wall_clock_ticks);
  return runs;
}

namespace {

// One side's sweep outcome: per-gamma time to threshold for one step size.
struct SweepColumn {
  double alpha = 0.0; // grid value before base/normalization factors
  std::vector<std::optional<std::int64_t>> ns;
  int censored = 0;
};

// Fewest censored gammas wins; ties go to the faster first-gamma time.
bool better_column(const SweepColumn& a, const SweepColumn& b) {
  if (a.censored != b.censored) return a.censored < b.censored;
  const std::int64_t ta =
      a.ns.empty() || !a.ns.front() ? std::numeric_limits<std::int64_t>::max()
                                    : *a.ns.front();
  const std::int64_t tb =
      b.ns.empty() || !b.ns.front() ? std::numeric_limits<std::int64_t>::max()
                                    : *b.ns.front();
  return ta < tb;
}

// Runs one side of the comparison over (alpha grid) x (gamma grid) and
// returns the winning column. run_one(alpha, gamma_index) gives the time to
// threshold or nullopt. Columns that censor more gammas than the best
// complete column are abandoned early.
template <typename RunOne>
SweepColumn sweep_side(const std::vector<double>& grid, std::size_t n_gammas,
                       RunOne&& run_one) {
  SweepColumn best;
  best.censored = std::numeric_limits<int>::max();
  for (double alpha : grid) {
    SweepColumn col;
    col.alpha = alpha;
    bool abandoned = false;
    for (std::size_t gi = 0; gi < n_gammas; ++gi) {
      col.ns.push_back(run_one(alpha, gi));
      if (!col.ns.back() && ++col.censored > best.censored) {
        abandoned = true;
        break;
      }
    }
    if (!abandoned && better_column(col, best)) best = std::move(col);
  }
  return best;
}

} // namespace

CompareReport run_compare(const CompareSpec& spec) {
  const std::vector<double> grid =
      spec.alpha_grid.empty() ? std::vector<double>{1.0} : spec.alpha_grid;

  // Shared near-uniform start for every run on both sides.
  PolicyGraph start(spec.n_nodes, spec.base.n_obs, spec.base.n_actions,
                    spec.theta);
  RandomStream init_rng(derive_seed(spec.seed, kInitSalt));
  for (int k = 0; k < start.weight_count(); ++k)
    start.set_weight(k, init_rng.uniform(-spec.init_jitter, spec.init_jitter));

  std::vector<TabularPomdp> models;
  std::vector<double> optimal, target;
  for (double gamma : spec.gammas) {
    TabularPomdp m = spec.base;
    m.gamma = gamma;
    m.validate();
    models.push_back(m);
    optimal.push_back(mdp_optimal_value(m));
    target.push_back(spec.threshold * optimal.back());
  }

  auto first_crossing = [](const LearnCurve& curve,
                           double level) -> std::optional<std::int64_t> {
    for (const CurvePoint& p : curve)
      if (p.performance >= level) return p.wall_ns;
    return std::nullopt;
  };

  const SweepColumn exact_col = sweep_side(
      grid, models.size(),
      [&](double a, std::size_t gi) -> std::optional<std::int64_t> {
        PolicyGraph graph = start;
        ExactGdConfig cfg = spec.exact;
        // Steps are taken on the normalized objective (1-gamma)*V.
        cfg.alpha = a * spec.exact_alpha_base * (1.0 - models[gi].gamma);
        cfg.method = SolveMethod::ITERATIVE;
        cfg.seed = spec.seed;
        cfg.stop_value = target[gi];
        try {
          return first_crossing(exact_gradient_descent(models[gi], graph, cfg),
                                target[gi]);
        } catch (const std::runtime_error&) {
          return std::nullopt; // diverged: censored
        }
      });

  const SweepColumn stoch_col = sweep_side(
      grid, models.size(),
      [&](double a, std::size_t gi) -> std::optional<std::int64_t> {
        const TabularPomdp& m = models[gi];
        Environment env(m);
        PolicyGraph graph = start;
        LearnerConfig cfg = spec.stochastic;
        cfg.alpha = a * spec.stoch_alpha_base;
        cfg.gamma = m.gamma;
        cfg.seed = spec.seed;
        cfg.stop_value = target[gi];
        EvalHook hook = [&m](const PolicyGraph& g) {
          return exact_value(m, g, SolveMethod::ITERATIVE).v0;
        };
        try {
          return first_crossing(train(env, graph, cfg, hook), target[gi]);
        } catch (const std::runtime_error&) {
          return std::nullopt; // weights blew up: censored
        }
      });

  CompareReport report;
  report.exact_alpha = exact_col.alpha * spec.exact_alpha_base;
  report.stoch_alpha = stoch_col.alpha * spec.stoch_alpha_base;
  for (std::size_t gi = 0; gi < models.size(); ++gi) {
    ComparePoint pt;
    pt.gamma = spec.gammas[gi];
    pt.optimal = optimal[gi];
    if (gi < exact_col.ns.size()) pt.exact_ns = exact_col.ns[gi];
    if (gi < stoch_col.ns.size()) pt.stoch_ns = stoch_col.ns[gi];
    report.points.push_back(pt);
  }
  return report;
}

int cmd_train(const std::string& spec_path) {
  try {
    const ExperimentSpec spec = load_experiment_file(spec_path);
    const auto runs = run_experiment(spec);
    double mean = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      std::cout << "run " << r << " seed " << runs[r].seed
                << " final performance " << fmt(runs[r].final_performance)
                << '\n';
      mean += runs[r].final_performance;
    }
    mean /= static_cast<double>(runs.size());
    std::cout << "mean final performance " << fmt(mean) << '\n';
    if (!spec.out_prefix.empty())
      std::cout << "curves written to " << spec.out_prefix << "_seed*.csv and "
                << spec.out_prefix << "_mean.csv\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_eval(const std::string& env_path, const std::string& graph_path,
             std::int64_t n_trials, std::uint64_t seed) {
  try {
    const Environment env = load_env_file(env_path);
    const PolicyGraph graph = load_graph_file(graph_path);
    if (env.is_tabular()) {
      const TabularPomdp& m = env.tabular();
      const double v0 = exact_value(m, graph).v0;
      const double opt = mdp_optimal_value(m);
      std::cout << "exact value " << fmt(v0) << '\n';
      std::cout << "mdp optimal " << fmt(opt) << '\n';
      if (opt != 0.0)
        std::cout << "percent of optimal " << fmt(100.0 * v0 / opt) << '\n';
    } else {
      RandomStream rng(seed);
      const double len =
          rollout_mean_length(env, graph, 100'000, n_trials, rng);
      std::cout << "mean trial length over " << n_trials << " rollouts "
                << fmt(len) << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_gradcheck(const std::string& env_path, const std::string& graph_path,
                  double h, std::int64_t n_trials, std::uint64_t seed) {
  try {
    const Environment env = load_env_file(env_path);
    if (!env.is_tabular())
      throw std::invalid_argument("gradient checking needs a tabular model");
    const TabularPomdp& m = env.tabular();
    const PolicyGraph graph = load_graph_file(graph_path);

    LearnerConfig cfg;
    cfg.alpha = 1.0;
    cfg.gamma = m.gamma;
    if (m.goal_obs) {
      cfg.error_kind = ErrorKind::E_POLICY;
      cfg.termination = Termination::GOAL_OBS;
    } else {
      cfg.error_kind = ErrorKind::E_POLICY_PRIME;
      cfg.termination = Termination::GEOMETRIC;
    }
    cfg.seed = seed;

    const GradSlice fd = finite_diff_gradient(m, graph, h);
    const int K = graph.weight_count();
    std::vector<double> sum(K, 0.0), sumsq(K, 0.0);
    RandomStream rng(seed);
    TrialResult scratch{TrajectoryPrefix{}, TraceSet(K), 0.0, false};
    for (std::int64_t i = 0; i < n_trials; ++i) {
      run_trial_into(env, graph, cfg, cfg.gamma, rng, scratch);
      for (int c : scratch.traces.touched()) {
        const double d = scratch.traces.delta_acc(c);
        sum[c] += d;
        sumsq[c] += d * d;
      }
    }

    const double n = static_cast<double>(n_trials);
    double max_z = 0.0;
    std::cout << "coordinate,estimated,exact,z\n";
    for (int k = 0; k < K; ++k) {
      const double mean = sum[k] / n;
      const double var = std::max(0.0, sumsq[k] / n - mean * mean);
      const double se = std::sqrt(var / n);
      // delta_acc estimates -alpha * grad with alpha = 1.
      const double target = -fd[k].value;
      const double z = se > 0.0 ? (mean - target) / se
                                : (mean == target ? 0.0
                                                  : std::numeric_limits<double>::infinity());
      max_z = std::max(max_z, std::abs(z));
      std::cout << graph.coord_name(k) << ',' << fmt(-mean) << ','
                << fmt(fd[k].value) << ',' << fmt(z) << '\n';
    }
    std::cout << "max |z| " << fmt(max_z) << " over " << n_trials
              << " trials\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_compare(const std::string& spec_path) {
  try {
    const json j = parse_json(read_file(spec_path), "compare document");
    Environment env = env_from_object(j.at("environment"));
    if (!env.is_tabular())
      throw std::invalid_argument("compare needs a tabular environment");
    CompareSpec spec{.base = env.tabular()};
    spec.gammas = j.at("gammas").get<std::vector<double>>();
    if (spec.gammas.empty())
      throw std::invalid_argument("compare needs at least one gamma");
    spec.threshold = j.value("threshold", spec.threshold);
    spec.n_nodes = j.value("n_nodes", spec.n_nodes);
    spec.theta = j.value("theta", spec.theta);
    if (j.contains("stochastic")) spec.stochastic = learner_from_json(j["stochastic"]);
    if (j.contains("exact")) spec.exact = exact_from_json(j["exact"]);
    if (j.contains("alpha_grid"))
      spec.alpha_grid = j["alpha_grid"].get<std::vector<double>>();
    spec.stoch_alpha_base = j.value("stoch_alpha_base", spec.stoch_alpha_base);
    spec.exact_alpha_base = j.value("exact_alpha_base", spec.exact_alpha_base);
    spec.init_jitter = j.value("init_jitter", spec.init_jitter);
    spec.seed = j.value("seed", spec.seed);

    const CompareReport report = run_compare(spec);
    const auto& points = report.points;
    std::cout << "step sizes kept across the grid: exact "
              << fmt(report.exact_alpha) << " (normalized), stochastic "
              << fmt(report.stoch_alpha) << '\n';
    std::cout << "gamma,optimal,exact_ns,stochastic_ns\n";
    for (const ComparePoint& p : points) {
      std::cout << fmt(p.gamma) << ',' << fmt(p.optimal) << ','
                << (p.exact_ns ? std::to_string(*p.exact_ns)
                               : std::string("censored"))
                << ','
                << (p.stoch_ns ? std::to_string(*p.stoch_ns)
                               : std::string("censored"))
                << '\n';
    }
    const ComparePoint& first = points.front();
    const ComparePoint& last = points.back();
    if (first.exact_ns && last.exact_ns && first.stoch_ns && last.stoch_ns) {
      const double ge = static_cast<double>(*last.exact_ns) /
                        static_cast<double>(*first.exact_ns);
      const double gs = static_cast<double>(*last.stoch_ns) /
                        static_cast<double>(*first.stoch_ns);
      std::cout << "time-to-threshold growth (last/first gamma): exact "
                << fmt(ge) << ", stochastic " << fmt(gs) << '\n';
      std::cout << (ge > gs ? "exact gradient degrades faster with gamma\n"
                            : "stochastic degrades at least as fast\n");
    } else {
      std::cout << "growth comparison censored (threshold not always reached)\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

} // namespace fsc
