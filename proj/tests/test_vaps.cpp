#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>

#include "fsc/vaps.hpp"

using namespace fsc;

namespace {

// One state, one observation, self-loops everywhere. Action 0 pays
// `reward0`, action 1 pays `reward1`. A maintenance task: no goal.
TabularPomdp bandit(double reward0, double reward1) {
  TabularPomdp m;
  m.n_states = 1;
  m.n_obs = 1;
  m.n_actions = 2;
  m.gamma = 0.9;
  m.T = {1.0, 1.0};
  m.B = {1.0};
  m.R = {reward0, reward1};
  m.pi0 = {1.0};
  return m;
}

LearnerConfig geometric_config(double alpha, double gamma) {
  LearnerConfig cfg;
  cfg.alpha = alpha;
  cfg.gamma = gamma;
  cfg.error_kind = ErrorKind::E_POLICY_PRIME;
  cfg.termination = Termination::GEOMETRIC;
  return cfg;
}

// Recomputes the per-trial weight deltas from the stored prefix alone:
// delta(c) = -alpha * sum over log-gradient entries g of g * (suffix sum of
// errors from that entry's step on). An independent fold against the
// incremental dual-trace bookkeeping.
std::map<int, double> replay_deltas(const PolicyGraph& graph,
                                    const TrajectoryPrefix& prefix,
                                    const LearnerConfig& cfg, double gamma) {
  const std::size_t T = prefix.size();
  std::vector<double> err(T);
  for (std::size_t t = 0; t < T; ++t)
    err[t] = cfg.error_kind == ErrorKind::E_POLICY
                 ? -(std::pow(gamma, static_cast<double>(t)) * prefix[t].reward)
                 : -prefix[t].reward;
  std::vector<double> suffix(T + 1, 0.0);
  for (std::size_t t = T; t-- > 0;) suffix[t] = suffix[t + 1] + err[t];

  std::map<int, double> delta;
  auto fold = [&](const GradSlice& slice, std::size_t t) {
    for (const GradEntry& e : slice) delta[e.coord] += -cfg.alpha * e.value * suffix[t];
  };
  const bool reactive = graph.constraint() == GraphConstraint::REACTIVE;
  for (std::size_t t = 0; t < T; ++t) {
    if (!reactive) {
      if (t == 0)
        fold(graph.log_grad_initial(prefix[0].obs, prefix[0].node), 0);
      else
        fold(graph.log_grad_transition(prefix[t - 1].node, prefix[t].obs,
                                       prefix[t].node),
             t);
    }
    fold(graph.log_grad_action(prefix[t].node, prefix[t].action), t);
  }
  return delta;
}

} // namespace

TEST_CASE("per-step errors match their definitions") {
  TrajectoryPrefix p = {{0, 0, 0, 2.0}, {0, 0, 1, -1.5}, {0, 0, 0, 4.0}};
  // e_t depends on the last record only: t = 2 here.
  CHECK(error_policy(p, 0.5) == doctest::Approx(-0.25 * 4.0).epsilon(1e-15));
  CHECK(error_policy_prime(p) == doctest::Approx(-4.0).epsilon(1e-15));
  p.pop_back();
  CHECK(error_policy(p, 0.5) == doctest::Approx(0.5 * 1.5).epsilon(1e-15));
  CHECK(error_policy_prime(p) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("single-action controller has identically zero deltas") {
  TabularPomdp m = bandit(1.0, 1.0);
  m.n_actions = 1;
  m.T = {1.0};
  m.R = {1.0};
  m.validate();
  const Environment env(m);
  const PolicyGraph g(1, 1, 1, 1.0);
  RandomStream rng(4);
  const TrialResult tr = run_trial(env, g, geometric_config(0.5, 0.9), rng);
  CHECK(tr.prefix.size() >= 1);
  // Soft-max rows of length one are constant: every log-gradient is zero.
  for (int c = 0; c < g.weight_count(); ++c)
    CHECK(tr.traces.delta_acc(c) == 0.0);
}

TEST_CASE("two-armed bandit: hand-computed one-step deltas") {
  const Environment env(bandit(1.0, 0.0));
  const PolicyGraph g(1, 1, 2, 1.0); // uniform: psi = (1/2, 1/2)
  const double alpha = 0.1;
  // gamma ~ 0 makes the geometric coin stop after one step almost surely.
  LearnerConfig cfg = geometric_config(alpha, 1e-12);

  int saw_action0 = 0, saw_action1 = 0;
  RandomStream rng(2024);
  for (int i = 0; i < 20; ++i) {
    const TrialResult tr = run_trial(env, g, cfg, rng);
    REQUIRE(tr.prefix.size() == 1);
    const int a = tr.prefix[0].action;
    const int c0 = g.psi_index(0, 0), c1 = g.psi_index(0, 1);
    if (a == 0) {
      ++saw_action0;
      // E_total = -1; delta = -alpha * E * (1 - psi_a) etc.
      CHECK(tr.traces.delta_acc(c0) == doctest::Approx(alpha * 0.5).epsilon(1e-15));
      CHECK(tr.traces.delta_acc(c1) == doctest::Approx(-alpha * 0.5).epsilon(1e-15));
      CHECK(tr.total_return == 1.0);
    } else {
      ++saw_action1;
      // Reward 0: the total error is zero, so nothing moves.
      CHECK(tr.traces.delta_acc(c0) == 0.0);
      CHECK(tr.traces.delta_acc(c1) == 0.0);
      CHECK(tr.total_return == 0.0);
    }
    // Single-node eta rows never contribute.
    CHECK(tr.traces.delta_acc(g.eta0_index(0, 0)) == 0.0);
    CHECK(tr.traces.delta_acc(g.eta_index(0, 0, 0)) == 0.0);
  }
  CHECK(saw_action0 > 0);
  CHECK(saw_action1 > 0);
}

TEST_CASE("dual-trace fold equals the direct suffix-sum computation") {
  const Environment env(make_load_unload(3, 0.9));
  PolicyGraph g(2, env.n_obs(), env.n_actions(), 1.0);
  RandomStream wrng(8);
  for (int i = 0; i < g.weight_count(); ++i)
    g.set_weight(i, wrng.uniform(-1.0, 1.0));

  int nonzero_deltas = 0;
  for (ErrorKind kind : {ErrorKind::E_POLICY, ErrorKind::E_POLICY_PRIME}) {
    LearnerConfig cfg = geometric_config(0.03, 0.9);
    cfg.error_kind = kind;
    RandomStream rng(5150);
    for (int trial = 0; trial < 50; ++trial) {
      const TrialResult tr = run_trial(env, g, cfg, rng);
      const auto expect = replay_deltas(g, tr.prefix, cfg, cfg.gamma);
      for (int c = 0; c < g.weight_count(); ++c) {
        const auto it = expect.find(c);
        const double want = it == expect.end() ? 0.0 : it->second;
        CHECK(tr.traces.delta_acc(c) == doctest::Approx(want).epsilon(1e-9));
        if (tr.traces.delta_acc(c) != 0.0) ++nonzero_deltas;
      }
    }
  }
  CHECK(nonzero_deltas > 0); // the comparison exercised real mass, not all zeros
}

TEST_CASE("reactive trials touch no eta coordinate") {
  const Environment env(make_load_unload(4, 0.9));
  PolicyGraph g(env.n_obs(), env.n_obs(), env.n_actions(), 1.0,
                GraphConstraint::REACTIVE);
  RandomStream rng(77);
  const TrialResult tr = run_trial(env, g, geometric_config(0.1, 0.9), rng);
  CHECK(tr.prefix.size() >= 1);
  for (int n = 0; n < g.n_nodes(); ++n)
    for (int o = 0; o < g.n_obs(); ++o)
      for (int n2 = 0; n2 < g.n_nodes(); ++n2)
        CHECK(tr.traces.delta_acc(g.eta_index(n, o, n2)) == 0.0);
  // Node always equals the current observation.
  for (const StepRecord& r : tr.prefix) CHECK(r.node == r.obs);
}

TEST_CASE("total_return is the minus-sum of per-step errors") {
  const Environment env(make_load_unload(5, 0.9));
  PolicyGraph g(2, env.n_obs(), env.n_actions(), 1.0);
  LearnerConfig cfg = geometric_config(0.01, 0.9);
  cfg.error_kind = ErrorKind::E_POLICY;
  RandomStream rng(31415);
  for (int trial = 0; trial < 100; ++trial) {
    const TrialResult tr = run_trial(env, g, cfg, rng);
    double want = 0.0, gp = 1.0;
    for (const StepRecord& r : tr.prefix) {
      want += gp * r.reward;
      gp *= cfg.gamma;
    }
    CHECK(tr.total_return == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("geometric termination respects the step-cap guard") {
  const Environment env(make_load_unload(3, 0.9));
  const PolicyGraph g(2, env.n_obs(), env.n_actions(), 1.0);
  LearnerConfig cfg = geometric_config(0.0, 0.999999);
  cfg.step_cap = 5;
  RandomStream rng(1);
  const TrialResult tr = run_trial(env, g, cfg, rng);
  CHECK(tr.prefix.size() == 5);
  CHECK(tr.truncated); // the cap cut a trial that wanted to continue

  // Fixed-length trials end at the cap by design, not truncation.
  cfg.termination = Termination::STEP_CAP;
  cfg.error_kind = ErrorKind::E_POLICY;
  const TrialResult fixed = run_trial(env, g, cfg, rng);
  CHECK(fixed.prefix.size() == 5);
  CHECK(!fixed.truncated);
}

TEST_CASE("learner configuration rules") {
  const Environment lu(make_load_unload(3, 0.9));
  LearnerConfig cfg;

  // Maintenance task: no goal observation to stop on.
  cfg.termination = Termination::GOAL_OBS;
  CHECK_THROWS_WITH_AS(cfg.validate(lu), doctest::Contains("GOAL_OBS"),
                       std::invalid_argument);

  // The undiscounted error needs the geometric stopping coin.
  cfg.termination = Termination::STEP_CAP;
  cfg.error_kind = ErrorKind::E_POLICY_PRIME;
  CHECK_THROWS_WITH_AS(cfg.validate(lu),
                       doctest::Contains("geometric trial termination"),
                       std::invalid_argument);

  cfg = LearnerConfig{};
  cfg.termination = Termination::GEOMETRIC;
  cfg.alpha = -0.5;
  CHECK_THROWS_AS(cfg.validate(lu), std::invalid_argument);
  cfg.alpha = 0.1;
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(lu), std::invalid_argument);
  cfg.gamma = 0.9;
  cfg.gamma_schedule = GammaSchedule{0.9, -0.1, 0.99};
  CHECK_THROWS_AS(cfg.validate(lu), std::invalid_argument);
  cfg.gamma_schedule = GammaSchedule{0.9, 1e-6, 0.99};
  CHECK_NOTHROW(cfg.validate(lu));

  // Graph/environment shape mismatch is caught before any sampling.
  RandomStream rng(1);
  const PolicyGraph wrong(2, 5, 2, 1.0);
  CHECK_THROWS_WITH_AS(run_trial(lu, wrong, cfg, rng),
                       doctest::Contains("does not match"),
                       std::invalid_argument);
}

TEST_CASE("gamma schedule ramps linearly and caps") {
  LearnerConfig cfg;
  cfg.gamma = 0.5;
  CHECK(effective_gamma(cfg, 1000) == 0.5);
  cfg.gamma_schedule = GammaSchedule{0.9, 1e-3, 0.95};
  CHECK(effective_gamma(cfg, 0) == doctest::Approx(0.9));
  CHECK(effective_gamma(cfg, 10) == doctest::Approx(0.91));
  CHECK(effective_gamma(cfg, 100'000) == doctest::Approx(0.95));
}

TEST_CASE("train with zero step size changes nothing and records a flat curve") {
  const Environment env(make_load_unload(5, 0.9));
  PolicyGraph g(2, env.n_obs(), env.n_actions(), 1.0);
  RandomStream wrng(9);
  for (int i = 0; i < g.weight_count(); ++i)
    g.set_weight(i, wrng.uniform(-0.5, 0.5));
  const PolicyGraph before = g;

  LearnerConfig cfg = geometric_config(0.0, 0.9);
  cfg.n_trials = 200;
  cfg.eval_every = 50;
  int evals = 0;
  const LearnCurve curve = train(env, g, cfg, [&](const PolicyGraph&) {
    ++evals;
    return 3.25;
  });
  REQUIRE(curve.size() == 5); // trials 0, 50, 100, 150, 200
  CHECK(evals == 5);
  for (const CurvePoint& p : curve) CHECK(p.performance == 3.25);
  CHECK(curve.front().trial == 0);
  CHECK(curve.back().trial == 200);
  for (int i = 0; i < g.weight_count(); ++i)
    CHECK(g.weight(i) == before.weight(i));
}

TEST_CASE("evaluation cadence records 0 and every eval_every-th trial") {
  const Environment env(make_load_unload(3, 0.9));
  PolicyGraph g(2, env.n_obs(), env.n_actions(), 1.0);
  LearnerConfig cfg = geometric_config(0.01, 0.9);
  cfg.n_trials = 10;
  cfg.eval_every = 3;
  const LearnCurve curve =
      train(env, g, cfg, [](const PolicyGraph&) { return 0.0; });
  REQUIRE(curve.size() == 4);
  CHECK(curve[0].trial == 0);
  CHECK(curve[1].trial == 3);
  CHECK(curve[2].trial == 6);
  CHECK(curve[3].trial == 9);
  // Without a hook nothing is recorded.
  const LearnCurve none = train(env, g, cfg, EvalHook{});
  CHECK(none.empty());
}

TEST_CASE("curve points carry ticks, gamma and the configured alpha") {
  const Environment env(make_load_unload(3, 0.9));
  PolicyGraph g(2, env.n_obs(), env.n_actions(), 1.0);
  LearnerConfig cfg = geometric_config(0.02, 0.9);
  cfg.n_trials = 40;
  cfg.eval_every = 20;
  cfg.seed = 321;
  cfg.gamma_schedule = GammaSchedule{0.5, 0.01, 0.8};
  const LearnCurve curve =
      train(env, g, cfg, [](const PolicyGraph&) { return 1.0; });
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].step_ticks == 0);
  CHECK(curve[1].step_ticks > 0);
  CHECK(curve[2].step_ticks >= curve[1].step_ticks);
  for (const CurvePoint& p : curve) {
    CHECK(p.alpha == 0.02);
    CHECK(p.seed == 321);
  }
  CHECK(curve[0].gamma == doctest::Approx(0.5));
  CHECK(curve[1].gamma == doctest::Approx(0.69)); // gamma at trial 19
  CHECK(curve[2].gamma == doctest::Approx(0.8));  // capped
}

TEST_CASE("train stops early once an evaluation reaches stop_value") {
  const Environment env(make_load_unload(3, 0.9));
  PolicyGraph g(2, env.n_obs(), env.n_actions(), 1.0);
  LearnerConfig cfg = geometric_config(0.01, 0.9);
  cfg.n_trials = 100;
  cfg.eval_every = 10;
  cfg.stop_value = 5.0;
  std::int64_t calls = 0;
  const LearnCurve curve = train(env, g, cfg, [&](const PolicyGraph&) {
    return static_cast<double>(calls++); // crosses 5.0 at the 6th evaluation
  });
  REQUIRE(curve.size() == 6);
  CHECK(curve.back().trial == 50);
  CHECK(curve.back().performance == 5.0);
}

TEST_CASE("non-finite weights abort training with a named coordinate") {
  const Environment env(bandit(1e308, 1e308));
  PolicyGraph g(1, 1, 2, 1.0);
  LearnerConfig cfg = geometric_config(100.0, 0.5);
  cfg.n_trials = 50;
  CHECK_THROWS_WITH_AS(train(env, g, cfg, EvalHook{}),
                       doctest::Contains("became non-finite"),
                       std::runtime_error);
}
