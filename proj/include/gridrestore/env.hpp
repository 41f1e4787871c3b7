#ifndef GRIDRESTORE_ENV_HPP_
#define GRIDRESTORE_ENV_HPP_

// Multi-agent episodic restoration MDP. Each microgrid region is one agent
// that toggles one of its own switches (or does nothing) per step; the joint
// action is applied simultaneously, the feeder is re-solved and every agent
// receives the same reward.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridrestore/constraints.hpp"
#include "gridrestore/errors.hpp"
#include "gridrestore/feeder.hpp"
#include "gridrestore/powerflow.hpp"
#include "gridrestore/rng.hpp"

namespace gridrestore {

struct ScenarioConfig {
  int fault_count_min = 0;
  int fault_count_max = 0;
  double der_scale_min = 1.0;
  double der_scale_max = 1.0;
  std::optional<int> horizon;  // default 2 * |switches|
  double lock_penalty = 0.1;

  void validate() const {
    if (fault_count_min < 0 || fault_count_min > fault_count_max) {
      throw ConfigError("scenario.fault_count_min/max must satisfy 0 <= min <= max");
    }
    if (!(der_scale_min > 0) || der_scale_min > der_scale_max || der_scale_max > 1.0) {
      throw ConfigError("scenario.der_scale range must lie in (0, 1] with min <= max");
    }
    if (horizon && *horizon < 0) throw ConfigError("scenario.horizon must be >= 0");
    if (lock_penalty < 0) throw ConfigError("scenario.lock_penalty must be >= 0");
  }
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  std::vector<std::string> faulted_branch_ids;  // sorted
  std::vector<int> priorities;                  // aligned with FeederGraph::loads
  double der_scale = 1.0;
  SwitchStates initial_switch_states;

  bool operator==(const ScenarioSpec&) const = default;
};

// Faulted branches are drawn without replacement from the switchable ones;
// priorities are i.i.d. uniform on 1..10.
inline ScenarioSpec sample_scenario(const FeederGraph& graph, std::uint64_t seed,
                                    const ScenarioConfig& config) {
  config.validate();
  const auto n_switches = static_cast<int>(graph.switches.size());
  if (config.fault_count_max > n_switches) {
    throw ConfigError("fault_count_max " + std::to_string(config.fault_count_max) +
                      " exceeds the feeder's " + std::to_string(n_switches) + " switches");
  }
  Rng rng(seed);
  ScenarioSpec spec;
  spec.seed = seed;
  const auto count = static_cast<int>(rng.uniform_int(config.fault_count_min, config.fault_count_max));
  std::vector<int> pool(n_switches);
  for (int i = 0; i < n_switches; ++i) pool[i] = i;
  for (int k = 0; k < count; ++k) {
    const auto j = static_cast<int>(rng.uniform_int(k, n_switches - 1));
    std::swap(pool[k], pool[j]);
    spec.faulted_branch_ids.push_back(graph.switches[pool[k]].branch_id);
  }
  std::sort(spec.faulted_branch_ids.begin(), spec.faulted_branch_ids.end());
  spec.priorities.reserve(graph.loads.size());
  for (std::size_t l = 0; l < graph.loads.size(); ++l) {
    spec.priorities.push_back(static_cast<int>(rng.uniform_int(1, 10)));
  }
  spec.der_scale = config.der_scale_min == config.der_scale_max
                       ? config.der_scale_min
                       : rng.uniform(config.der_scale_min, config.der_scale_max);
  spec.initial_switch_states = graph.all(SwitchState::Open);
  return spec;
}

// Element indices an agent observes, fixed for a (feeder, microgrid) pair.
struct ObservationLayout {
  std::vector<int> buses, switches, ders, loads, branches;

  std::size_t size() const {
    return buses.size() + 2 * switches.size() + 2 * ders.size() + 2 * loads.size() +
           branches.size() + 2;
  }
};

inline ObservationLayout make_layout(const FeederGraph& graph, int agent) {
  const auto& region = graph.microgrids.at(agent);
  ObservationLayout layout;
  for (const auto& id : region.bus_ids) layout.buses.push_back(graph.bus_index(id));
  for (const auto& id : region.switch_ids) layout.switches.push_back(graph.switch_index(id));
  for (const auto& id : region.der_ids) layout.ders.push_back(graph.der_index(id));
  for (const auto& id : region.load_ids) layout.loads.push_back(graph.load_index(id));
  for (std::size_t b = 0; b < graph.branches.size(); ++b) {
    if (graph.index().branch_region[b] == agent) layout.branches.push_back(static_cast<int>(b));
  }
  return layout;
}

// Discrete action of one agent: 0 = no-op, 2j+1 = open local switch j,
// 2j+2 = close local switch j.
struct AgentAction {
  int index = 0;

  static AgentAction noop() { return {0}; }
  static AgentAction open(int local_switch) { return {2 * local_switch + 1}; }
  static AgentAction close(int local_switch) { return {2 * local_switch + 2}; }
  bool is_noop() const { return index == 0; }
  int local_switch() const { return (index - 1) / 2; }
  SwitchState target() const { return index % 2 == 1 ? SwitchState::Open : SwitchState::Closed; }
};

using Observation = std::vector<double>;

struct StepInfo {
  ViolationReport report;
  double xi = 0.0;  // report.xi plus lock penalties
  int lock_violations = 0;
  double restored_kw = 0.0;
  double weighted_kw = 0.0;
  double weighted_fraction = 0.0;
  double p_loss_kw = 0.0;
};

struct StepResult {
  std::vector<Observation> observations;
  std::vector<double> global_state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Concatenates per-agent observations in agent order, then appends
// [served fraction, xi, t/T].
inline std::vector<double> build_global_state(const std::vector<Observation>& observations,
                                              double served_fraction, double xi,
                                              double time_fraction) {
  std::vector<double> state;
  for (const auto& o : observations) state.insert(state.end(), o.begin(), o.end());
  state.push_back(served_fraction);
  state.push_back(xi);
  state.push_back(time_fraction);
  return state;
}

// Copy of the feeder with the scenario's load priorities and DER scaling.
inline FeederGraph apply_scenario(const FeederGraph& base, const ScenarioSpec& spec) {
  if (spec.priorities.size() != base.loads.size()) {
    throw DimensionMismatch("scenario priorities do not match the feeder's loads");
  }
  FeederGraph graph = base;
  for (std::size_t l = 0; l < graph.loads.size(); ++l) graph.loads[l].priority = spec.priorities[l];
  for (auto& d : graph.ders) {
    d.p_min_kw *= spec.der_scale;
    d.p_max_kw *= spec.der_scale;
  }
  return graph;
}

// Per-switch flags for the scenario's faulted branches.
inline std::vector<bool> faulted_switches(const FeederGraph& graph, const ScenarioSpec& spec) {
  std::vector<bool> faulted(graph.switches.size(), false);
  for (const auto& id : spec.faulted_branch_ids) {
    const int s = graph.index().branch_switch.at(graph.branch_index(id));
    if (s < 0) throw ValidationError("faulted branch '" + id + "' has no switch");
    faulted[s] = true;
  }
  return faulted;
}

class RestorationEnv {
 public:
  RestorationEnv(std::shared_ptr<const FeederGraph> feeder, ScenarioConfig scenario_config,
                 RewardConfig reward_config, PowerFlowOptions pf_options = {})
      : base_(std::move(feeder)),
        scenario_config_(std::move(scenario_config)),
        reward_config_(std::move(reward_config)),
        pf_options_(pf_options) {
    if (!base_) throw std::invalid_argument("RestorationEnv needs a feeder");
    scenario_config_.validate();
    reward_config_.validate();
    for (std::size_t a = 0; a < base_->num_agents(); ++a) {
      layouts_.push_back(make_layout(*base_, static_cast<int>(a)));
    }
    horizon_ = scenario_config_.horizon.value_or(2 * static_cast<int>(base_->switches.size()));
  }

  const FeederGraph& base_feeder() const { return *base_; }
  std::shared_ptr<const FeederGraph> base_feeder_ptr() const { return base_; }
  // Feeder with the current scenario's priorities and DER scaling applied.
  const FeederGraph& scenario_feeder() const { return graph_; }
  const ScenarioConfig& scenario_config() const { return scenario_config_; }
  const RewardConfig& reward_config() const { return reward_config_; }
  const ScenarioSpec& scenario() const { return spec_; }

  std::size_t num_agents() const { return layouts_.size(); }
  const ObservationLayout& layout(std::size_t agent) const { return layouts_.at(agent); }
  std::size_t observation_size(std::size_t agent) const { return layouts_.at(agent).size(); }
  std::size_t action_size(std::size_t agent) const {
    return 2 * layouts_.at(agent).switches.size() + 1;
  }
  std::size_t global_state_size() const {
    std::size_t n = 3;
    for (const auto& l : layouts_) n += l.size();
    return n;
  }
  int horizon() const { return horizon_; }
  int t() const { return t_; }
  bool done() const { return t_ >= horizon_; }
  const SwitchStates& switch_states() const { return states_; }
  const std::vector<bool>& faulted() const { return faulted_; }
  const PowerFlowResult& power_flow() const { return flow_; }
  const StepResult& last() const { return last_; }

  StepResult sample_and_reset(std::uint64_t seed) {
    return reset(sample_scenario(*base_, seed, scenario_config_));
  }

  StepResult reset(const ScenarioSpec& spec) {
    if (spec.priorities.size() != base_->loads.size() ||
        spec.initial_switch_states.size() != base_->switches.size()) {
      throw DimensionMismatch("scenario does not match feeder dimensions");
    }
    spec_ = spec;
    graph_ = apply_scenario(*base_, spec);
    faulted_ = faulted_switches(graph_, spec);
    states_ = spec.initial_switch_states;
    for (std::size_t s = 0; s < states_.size(); ++s) {
      if (faulted_[s]) states_[s] = SwitchState::Open;
    }
    t_ = 0;
    solve();
    const StepInfo info = make_info(0);
    prev_delta_metric_ = delta_metric(info);
    last_ = package(0.0, info);
    return last_;
  }

  StepResult step(const std::vector<AgentAction>& joint) {
    if (done()) throw std::logic_error("step() called on a finished episode; call reset()");
    if (joint.size() != layouts_.size()) {
      throw OutOfBoundsAction("joint action has " + std::to_string(joint.size()) +
                              " entries for " + std::to_string(layouts_.size()) + " agents");
    }
    int locked = 0;
    SwitchStates next = states_;
    for (std::size_t a = 0; a < joint.size(); ++a) {
      const int index = joint[a].index;
      if (index < 0 || static_cast<std::size_t>(index) >= action_size(a)) {
        throw OutOfBoundsAction("agent " + std::to_string(a) + " action " +
                                std::to_string(index) + " outside [0, " +
                                std::to_string(action_size(a) - 1) + "]");
      }
      if (joint[a].is_noop()) continue;
      const int s = layouts_[a].switches[joint[a].local_switch()];
      if (faulted_[s]) {
        ++locked;
        continue;
      }
      next[s] = joint[a].target();
    }
    states_ = std::move(next);
    ++t_;
    solve();
    const StepInfo info = make_info(locked);
    const double metric = delta_metric(info);
    const double reward = step_reward(prev_delta_metric_, metric, info.p_loss_kw, info.xi,
                                      reward_config_, graph_.p_gen_cap_kw);
    prev_delta_metric_ = metric;
    last_ = package(reward, info);
    return last_;
  }

 private:
  void solve() { flow_ = solve_system(graph_, states_, pf_options_); }

  StepInfo make_info(int locked) const {
    StepInfo info;
    info.report = evaluate_constraints(graph_, flow_, reward_config_);
    info.lock_violations = locked;
    info.xi = info.report.xi + scenario_config_.lock_penalty * locked;
    info.restored_kw = flow_.total_served_kw();
    const auto w = weighted_restored(graph_, flow_);
    info.weighted_kw = w.weighted_kw;
    info.weighted_fraction = w.fraction;
    info.p_loss_kw = flow_.p_loss_kw;
    return info;
  }

  double delta_metric(const StepInfo& info) const {
    return reward_config_.delta_mode == DeltaMode::RawKw ? info.restored_kw
                                                         : info.weighted_fraction;
  }

  Observation observe(std::size_t agent, const StepInfo& info) const {
    const auto& layout = layouts_[agent];
    Observation o;
    o.reserve(layout.size());
    for (int b : layout.buses) o.push_back(flow_.energized[b] ? flow_.v_pu[b] : 0.0);
    for (int s : layout.switches) o.push_back(states_[s] == SwitchState::Closed ? 1.0 : 0.0);
    for (int s : layout.switches) o.push_back(faulted_[s] ? 1.0 : 0.0);
    for (int d : layout.ders) {
      const double cap = graph_.ders[d].p_max_kw;
      o.push_back(cap > 0 ? flow_.der_output[d].p_kw / cap : 0.0);
    }
    for (int d : layout.ders) {
      const double nominal = base_->ders[d].p_max_kw;
      o.push_back(nominal > 0 ? graph_.ders[d].p_max_kw / nominal : 0.0);
    }
    for (int l : layout.loads) {
      const double demand = graph_.loads[l].p_demand_kw;
      o.push_back(demand > 0 ? flow_.served[l] / demand : 0.0);
    }
    for (int l : layout.loads) o.push_back(graph_.loads[l].priority / 10.0);
    for (int b : layout.branches) {
      const double limit = graph_.branches[b].s_max_pu * graph_.s_base_kva;
      o.push_back(flow_.flows[b].s_kva / limit);
    }
    o.push_back(info.weighted_fraction);
    o.push_back(info.xi);
    return o;
  }

  StepResult package(double reward, const StepInfo& info) const {
    StepResult r;
    r.observations.reserve(layouts_.size());
    for (std::size_t a = 0; a < layouts_.size(); ++a) r.observations.push_back(observe(a, info));
    const double tf = horizon_ > 0 ? static_cast<double>(t_) / horizon_ : 1.0;
    r.global_state = build_global_state(r.observations, info.weighted_fraction, info.xi, tf);
    r.reward = reward;
    r.done = done();
    r.info = info;
    return r;
  }

  std::shared_ptr<const FeederGraph> base_;
  ScenarioConfig scenario_config_;
  RewardConfig reward_config_;
  PowerFlowOptions pf_options_;
  std::vector<ObservationLayout> layouts_;
  int horizon_ = 0;

  ScenarioSpec spec_;
  FeederGraph graph_;
  std::vector<bool> faulted_;
  SwitchStates states_;
  int t_ = 0;
  PowerFlowResult flow_;
  double prev_delta_metric_ = 0.0;
  StepResult last_;
};

}  // namespace gridrestore

#endif  // GRIDRESTORE_ENV_HPP_
