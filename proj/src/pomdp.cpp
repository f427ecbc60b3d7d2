#include "fsc/pomdp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fsc {

namespace {

constexpr double kRowTol = 1e-12;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_row(const char* table, const std::string& row_desc,
               const double* p, int len) {
  double sum = 0.0;
  for (int i = 0; i < len; ++i) {
    if (!(p[i] >= 0.0) || !std::isfinite(p[i]))
      fail(std::string(table) + " row " + row_desc + " has invalid entry " +
           num(p[i]) + " at index " + std::to_string(i));
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > kRowTol)
    fail(std::string(table) + " row " + row_desc + " sums to " + num(sum) +
         " (want 1 within 1e-12)");
}

} // namespace

void TabularPomdp::validate() const {
  if (n_states <= 0 || n_obs <= 0 || n_actions <= 0)
    fail("state/observation/action counts must be positive");
  const std::size_t sas =
      static_cast<std::size_t>(n_states) * n_actions * n_states;
  if (T.size() != sas)
    fail("T has " + std::to_string(T.size()) + " entries, want " +
         std::to_string(sas));
  if (B.size() != static_cast<std::size_t>(n_states) * n_obs)
    fail("B has " + std::to_string(B.size()) + " entries, want " +
         std::to_string(static_cast<std::size_t>(n_states) * n_obs));
  if (R.size() != sas)
    fail("R has " + std::to_string(R.size()) + " entries, want " +
         std::to_string(sas));
  if (pi0.size() != static_cast<std::size_t>(n_states))
    fail("pi0 has " + std::to_string(pi0.size()) + " entries, want " +
         std::to_string(n_states));
  if (!(gamma >= 0.0 && gamma < 1.0))
    fail("gamma is " + num(gamma) + ", want [0, 1)");

  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a)
      check_row("T", "(s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")",
                T.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
                n_states);
  for (int s = 0; s < n_states; ++s)
    check_row("B", "(s=" + std::to_string(s) + ")",
              B.data() + static_cast<std::size_t>(s) * n_obs, n_obs);
  check_row("pi0", "(initial)", pi0.data(), n_states);
  for (double r : R)
    if (!std::isfinite(r)) fail("R has a non-finite entry");

  if (goal_obs) {
    if (*goal_obs < 0 || *goal_obs >= n_obs)
      fail("goal_obs " + std::to_string(*goal_obs) + " out of range");
    // A state that can emit the goal observation ends the trial, so the
    // exact value of a controller only matches simulated returns if such
    // states are zero-reward sinks.
    for (int s = 0; s < n_states; ++s) {
      if (obs_prob(s, *goal_obs) <= 0.0) continue;
      for (int a = 0; a < n_actions; ++a) {
        if (std::abs(trans(s, a, s) - 1.0) > kRowTol)
          fail("state " + std::to_string(s) +
               " emits goal_obs but is not absorbing under action " +
               std::to_string(a));
        if (reward(s, a, s) != 0.0)
          fail("state " + std::to_string(s) +
               " emits goal_obs but has nonzero self-loop reward under action " +
               std::to_string(a));
      }
    }
  }
}

int LoadUnloadLayout::state(int location, bool loaded) const {
  if (loaded) {
    if (location < 1 || location > n_locations - 1)
      throw std::invalid_argument("no loaded state at location " +
                                  std::to_string(location));
    return n_locations - 2 + location;
  }
  if (location < 0 || location > n_locations - 2)
    throw std::invalid_argument("no unloaded state at location " +
                                std::to_string(location));
  return location;
}

int LoadUnloadLayout::location_of(int state) const {
  return state <= n_locations - 2 ? state : state - (n_locations - 2);
}

bool LoadUnloadLayout::loaded_of(int state) const {
  return state >= n_locations - 1;
}

TabularPomdp make_load_unload(int n_locations, double gamma) {
  if (n_locations < 2)
    throw std::invalid_argument("load/unload needs at least 2 locations");
  LoadUnloadLayout lay(n_locations);
  const int S = lay.n_states();
  TabularPomdp m;
  m.n_states = S;
  m.n_obs = 3;
  m.n_actions = 2;
  m.gamma = gamma;
  m.T.assign(static_cast<std::size_t>(S) * 2 * S, 0.0);
  m.B.assign(static_cast<std::size_t>(S) * 3, 0.0);
  m.R.assign(static_cast<std::size_t>(S) * 2 * S, 0.0);
  m.pi0.assign(S, 0.0);

  for (int s = 0; s < S; ++s) {
    const int loc = lay.location_of(s);
    int o = LoadUnloadLayout::kObsMid;
    if (loc == 0) o = LoadUnloadLayout::kObsUnload;
    else if (loc == n_locations - 1) o = LoadUnloadLayout::kObsLoad;
    m.obs_prob_ref(s, o) = 1.0;

    const bool loaded = lay.loaded_of(s);
    for (int a = 0; a < 2; ++a) {
      int loc2 = a == LoadUnloadLayout::kActionLeft
                     ? std::max(0, loc - 1)
                     : std::min(n_locations - 1, loc + 1);
      // The flag is a side effect of the location reached: set at the load
      // end, cleared at the unload end, otherwise carried along.
      bool loaded2 = loaded;
      if (loc2 == n_locations - 1) loaded2 = true;
      if (loc2 == 0) loaded2 = false;
      const int s2 = lay.state(loc2, loaded2);
      m.trans_ref(s, a, s2) = 1.0;
      if (loaded && loc2 == 0) m.reward_ref(s, a, s2) = 1.0;
    }
  }
  m.pi0[lay.state(0, false)] = 1.0;
  m.validate();
  return m;
}

std::string pomdp_to_json(const TabularPomdp& m) {
  nlohmann::json j;
  j["n_states"] = m.n_states;
  j["n_obs"] = m.n_obs;
  j["n_actions"] = m.n_actions;
  j["gamma"] = m.gamma;
  j["T"] = m.T;
  j["B"] = m.B;
  j["R"] = m.R;
  j["pi0"] = m.pi0;
  if (m.goal_obs) j["goal_obs"] = *m.goal_obs;
  return j.dump(2);
}

TabularPomdp pomdp_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("model document is not valid JSON: ") + e.what());
  }
  TabularPomdp m;
  try {
    m.n_states = j.at("n_states").get<int>();
    m.n_obs = j.at("n_obs").get<int>();
    m.n_actions = j.at("n_actions").get<int>();
    m.gamma = j.at("gamma").get<double>();
    m.T = j.at("T").get<std::vector<double>>();
    m.B = j.at("B").get<std::vector<double>>();
    m.R = j.at("R").get<std::vector<double>>();
    m.pi0 = j.at("pi0").get<std::vector<double>>();
    if (j.contains("goal_obs") && !j["goal_obs"].is_null())
      m.goal_obs = j["goal_obs"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("model document is missing or mistypes a field: ") +
         e.what());
  }
  m.validate();
  return m;
}

TabularPomdp load_pomdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return pomdp_from_json(ss.str());
}

void save_pomdp_file(const TabularPomdp& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << pomdp_to_json(m) << '\n';
}

} // namespace fsc
