#ifndef GRIDRESTORE_BASELINES_HPP_
#define GRIDRESTORE_BASELINES_HPP_

// Ground truth and reference policies: exhaustive search over switch
// configurations, uniform-random switching and one-step greedy switching.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridrestore/constraints.hpp"
#include "gridrestore/env.hpp"
#include "gridrestore/errors.hpp"
#include "gridrestore/happo.hpp"
#include "gridrestore/powerflow.hpp"
#include "gridrestore/rng.hpp"

namespace gridrestore {

enum class OracleMode { Strict, PenaltyFreeBest };

inline const char* to_string(OracleMode m) {
  return m == OracleMode::Strict ? "strict" : "penalty-free-best";
}

inline constexpr int kOracleMaxSwitches = 20;
// Configurations with xi at or below this count as feasible in strict mode.
inline constexpr double kFeasibilityTol = 1e-9;

struct OracleResult {
  SwitchStates best_switch_states;
  double best_weighted_kw = 0.0;  // J*
  double best_fraction = 0.0;
  double best_xi = 0.0;
  bool best_feasible = false;
  long long configs_evaluated = 0;
  long long ties = 0;
  int operable_switches = 0;
  double seconds = 0.0;

  bool operator==(const OracleResult& o) const {
    return best_switch_states == o.best_switch_states && best_weighted_kw == o.best_weighted_kw &&
           best_fraction == o.best_fraction && best_xi == o.best_xi &&
           best_feasible == o.best_feasible && configs_evaluated == o.configs_evaluated &&
           ties == o.ties && operable_switches == o.operable_switches;
  }
};

inline std::string bit_string(const SwitchStates& states) {
  std::string s;
  for (auto st : states) s.push_back(st == SwitchState::Closed ? '1' : '0');
  return s;
}

// Enumerates every open/closed assignment of the non-faulted switches
// (faulted ones stay open). Strict mode keeps only feasible configurations
// and maximizes J; penalty-free-best maximizes fraction - lambda_pen * xi.
// Ties on the score resolve to the lexicographically smallest bit-vector.
inline OracleResult exhaustive_oracle(const FeederGraph& base, const ScenarioSpec& spec,
                                      OracleMode mode, const RewardConfig& reward = {},
                                      const PowerFlowOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  const FeederGraph graph = apply_scenario(base, spec);
  const auto faulted = faulted_switches(graph, spec);
  std::vector<std::size_t> operable;
  for (std::size_t s = 0; s < graph.switches.size(); ++s) {
    if (!faulted[s]) operable.push_back(s);
  }
  if (operable.size() > static_cast<std::size_t>(kOracleMaxSwitches)) {
    throw TooLarge("exhaustive oracle: " + std::to_string(operable.size()) +
                   " operable switches exceeds the guard of " + std::to_string(kOracleMaxSwitches));
  }

  OracleResult out;
  out.operable_switches = static_cast<int>(operable.size());
  out.best_switch_states.assign(graph.switches.size(), SwitchState::Open);
  bool have_best = false;
  double best_score = 0.0;
  std::vector<double> feasible_j;

  const std::uint64_t count = std::uint64_t{1} << operable.size();
  SwitchStates states(graph.switches.size(), SwitchState::Open);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t i = 0; i < operable.size(); ++i) {
      states[operable[i]] = (mask >> i) & 1 ? SwitchState::Closed : SwitchState::Open;
    }
    const PowerFlowResult flow = solve_system(graph, states, options);
    const ViolationReport report = evaluate_constraints(graph, flow, reward);
    const WeightedRestoration w = weighted_restored(graph, flow);
    ++out.configs_evaluated;

    const bool feasible = report.xi <= kFeasibilityTol;
    if (mode == OracleMode::Strict && !feasible) continue;
    const double score = mode == OracleMode::Strict ? w.weighted_kw
                                                    : w.fraction - reward.lambda_pen * report.xi;
    if (mode == OracleMode::Strict) feasible_j.push_back(w.weighted_kw);
    const double tol = 1e-9 * std::max(1.0, std::abs(best_score));
    const bool better = !have_best || score > best_score + tol;
    const bool tie = have_best && std::abs(score - best_score) <= tol;
    if (better) {
      have_best = true;
      best_score = score;
      out.ties = 1;
    } else if (tie) {
      ++out.ties;
    }
    if (better || (tie && states < out.best_switch_states)) {
      out.best_switch_states = states;
      out.best_weighted_kw = w.weighted_kw;
      out.best_fraction = w.fraction;
      out.best_xi = report.xi;
      out.best_feasible = feasible;
    }
  }

  if (mode == OracleMode::Strict) {
    const double tol = 1e-9 * std::max(1.0, out.best_weighted_kw);
    for (double j : feasible_j) {
      if (j > out.best_weighted_kw + tol) {
        throw std::logic_error("exhaustive oracle: dominance violated");
      }
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// Canonical evaluation suite: scenarios drawn with seeds first..first+count-1.
inline std::vector<ScenarioSpec> canonical_suite(const FeederGraph& graph,
                                                 const ScenarioConfig& config, int count = 5,
                                                 std::uint64_t first_seed = 1) {
  std::vector<ScenarioSpec> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(sample_scenario(graph, first_seed + static_cast<std::uint64_t>(i), config));
  }
  return out;
}

struct PolicySummary {
  int episodes = 0;
  double mean_fraction = 0.0;
  double std_fraction = 0.0;
  double max_fraction = 0.0;
  double mean_weighted_kw = 0.0;
  double mean_xi = 0.0;
  double mean_return = 0.0;
  double decide_seconds_per_step = 0.0;
};

inline PolicySummary summarize(const std::vector<EpisodeTrace>& traces) {
  PolicySummary s;
  s.episodes = static_cast<int>(traces.size());
  if (traces.empty()) return s;
  const double n = static_cast<double>(traces.size());
  double steps = 0.0, decide = 0.0;
  for (const auto& t : traces) {
    s.mean_fraction += t.final_fraction / n;
    s.max_fraction = std::max(s.max_fraction, t.final_fraction);
    s.mean_weighted_kw += t.final_weighted_kw / n;
    s.mean_xi += t.final_xi / n;
    s.mean_return += t.episode_return / n;
    steps += static_cast<double>(t.actions.size());
    decide += t.decide_seconds;
  }
  double var = 0.0;
  for (const auto& t : traces) var += (t.final_fraction - s.mean_fraction) * (t.final_fraction - s.mean_fraction);
  s.std_fraction = std::sqrt(var / n);
  s.decide_seconds_per_step = steps > 0 ? decide / steps : 0.0;
  return s;
}

// Drives one episode, asking `choose` for each step's joint action.
template <typename Chooser>
EpisodeTrace run_episode(RestorationEnv& env, const ScenarioSpec& spec, Chooser&& choose) {
  EpisodeTrace trace;
  StepResult step = env.reset(spec);
  trace.final_fraction = step.info.weighted_fraction;
  trace.final_weighted_kw = step.info.weighted_kw;
  trace.final_xi = step.info.xi;
  trace.final_restored_kw = step.info.restored_kw;
  while (!env.done()) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<AgentAction> joint = choose(env, step);
    trace.decide_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<int> chosen;
    for (const auto& a : joint) chosen.push_back(a.index);
    trace.actions.push_back(std::move(chosen));
    step = env.step(joint);
    trace.episode_return += step.reward;
    trace.final_fraction = step.info.weighted_fraction;
    trace.final_weighted_kw = step.info.weighted_kw;
    trace.final_xi = step.info.xi;
    trace.final_restored_kw = step.info.restored_kw;
  }
  trace.final_states = env.switch_states();
  return trace;
}

inline EpisodeTrace random_episode(RestorationEnv& env, const ScenarioSpec& spec, Rng& rng) {
  return run_episode(env, spec, [&rng](const RestorationEnv& e, const StepResult&) {
    std::vector<AgentAction> joint;
    for (std::size_t a = 0; a < e.num_agents(); ++a) {
      joint.push_back({static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(e.action_size(a)) - 1))});
    }
    return joint;
  });
}

// Uniform random switching over `episodes` freshly sampled scenarios.
inline PolicySummary random_policy(RestorationEnv& env, int episodes, Rng& rng) {
  std::vector<EpisodeTrace> traces;
  for (int i = 0; i < episodes; ++i) {
    const auto spec = sample_scenario(env.base_feeder(), rng.next_u64(), env.scenario_config());
    traces.push_back(random_episode(env, spec, rng));
  }
  return summarize(traces);
}

// Each agent evaluates its own actions one at a time on a cloned
// environment (other agents idle) and keeps the highest one-step reward;
// ties go to the lowest action index, so no-op wins when nothing helps.
inline std::vector<AgentAction> greedy_joint_action(const RestorationEnv& env) {
  const std::size_t agents = env.num_agents();
  std::vector<AgentAction> joint(agents, AgentAction::noop());
  for (std::size_t a = 0; a < agents; ++a) {
    double best = 0.0;
    bool have = false;
    for (std::size_t k = 0; k < env.action_size(a); ++k) {
      RestorationEnv probe = env;
      std::vector<AgentAction> trial(agents, AgentAction::noop());
      trial[a] = AgentAction{static_cast<int>(k)};
      const double r = probe.step(trial).reward;
      if (!have || r > best) {
        have = true;
        best = r;
        joint[a] = trial[a];
      }
    }
  }
  return joint;
}

inline EpisodeTrace greedy_episode(RestorationEnv& env, const ScenarioSpec& spec) {
  return run_episode(env, spec,
                     [](const RestorationEnv& e, const StepResult&) { return greedy_joint_action(e); });
}

inline PolicySummary greedy_policy(RestorationEnv& env, const std::vector<ScenarioSpec>& scenarios) {
  std::vector<EpisodeTrace> traces;
  for (const auto& spec : scenarios) traces.push_back(greedy_episode(env, spec));
  return summarize(traces);
}

}  // namespace gridrestore

#endif  // GRIDRESTORE_BASELINES_HPP_
