#ifndef GRIDRESTORE_POWERFLOW_HPP_
#define GRIDRESTORE_POWERFLOW_HPP_

// Single-phase balanced-equivalent AC power flow for radial islands, solved by
// backward/forward sweep. Each energized island has one slack (the source bus
// if present, otherwise its largest DER); the remaining DERs inject fixed
// setpoints proportional to their capacity.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "gridrestore/feeder.hpp"

namespace gridrestore {

using Complex = std::complex<double>;

struct PowerFlowOptions {
  double tol_pu = 1e-8;
  int max_iterations = 100;
};

struct DerSetpoint {
  double p_kw = 0.0;
  double q_kvar = 0.0;
  bool operator==(const DerSetpoint&) const = default;
};

struct IslandSlack {
  enum class Kind { None, Source, Der };
  Kind kind = Kind::None;
  int index = -1;  // bus index for Source, der index for Der
  bool operator==(const IslandSlack&) const = default;
};

struct DispatchPlan {
  // Fixed-injection DERs, keyed by der index; slack DERs are not listed.
  std::map<int, DerSetpoint> der_setpoints;
  // Setpoints before clamping to the DER's operating box.
  std::map<int, DerSetpoint> der_requested;
  // Aligned with the island list the plan was built from.
  std::vector<IslandSlack> island_slack;
};

enum class IslandStatus { Energized, Dead, NotRadial, NoConvergence };

inline const char* to_string(IslandStatus s) {
  switch (s) {
    case IslandStatus::Energized: return "energized";
    case IslandStatus::Dead: return "dead";
    case IslandStatus::NotRadial: return "not_radial";
    case IslandStatus::NoConvergence: return "no_convergence";
  }
  return "?";
}

struct BranchFlow {
  double p_kw = 0.0;   // from_bus -> to_bus, measured at from_bus
  double q_kvar = 0.0;
  double s_kva = 0.0;  // max apparent power over both ends
};

// Solution for one island. Vectors are indexed by global element index and
// only entries belonging to the island are meaningful.
struct IslandResult {
  IslandStatus status = IslandStatus::Dead;
  int iterations = 0;
  double max_mismatch_pu = 0.0;
  double p_loss_kw = 0.0;
  double q_loss_kvar = 0.0;
  // Slack injection the island asked for, and what was delivered after
  // clamping to the slack DER's active limit.
  double slack_p_requested_kw = 0.0;
  double slack_q_requested_kvar = 0.0;
  double slack_p_kw = 0.0;
  double slack_q_kvar = 0.0;
  std::vector<std::pair<int, double>> v_pu;          // (bus, |V|)
  std::vector<std::pair<int, BranchFlow>> flows;     // (branch, flow)
  std::vector<std::pair<int, double>> served_kw;     // (load, served)
  std::vector<std::pair<int, DerSetpoint>> der_output;
};

struct PowerFlowResult {
  bool converged = true;
  std::vector<double> v_pu;          // per bus; 0 when de-energized
  std::vector<BranchFlow> flows;     // per branch
  double p_loss_kw = 0.0;
  std::vector<double> served;        // per load, kW
  std::vector<bool> energized;       // per bus
  int iterations = 0;
  std::vector<DerSetpoint> der_output;     // per der, delivered
  std::vector<DerSetpoint> der_requested;  // per der, before clamping
  double source_p_kw = 0.0;
  double source_q_kvar = 0.0;
  std::vector<IslandSet> islands;
  std::vector<IslandStatus> island_status;
  DispatchPlan plan;

  double total_generation_kw() const {
    double total = source_p_kw;
    for (const auto& d : der_output) total += d.p_kw;
    return total;
  }
  double total_served_kw() const {
    double total = 0.0;
    for (double s : served) total += s;
    return total;
  }
  int count(IslandStatus status) const {
    return static_cast<int>(std::count(island_status.begin(), island_status.end(), status));
  }
};

inline DerSetpoint clamp_to_box(const Der& der, DerSetpoint sp) {
  sp.p_kw = std::clamp(sp.p_kw, der.p_min_kw, der.p_max_kw);
  sp.q_kvar = std::clamp(sp.q_kvar, der.q_min_kvar, der.q_max_kvar);
  return sp;
}

// Chooses one slack per island and fixed setpoints for the other DERs.
inline DispatchPlan dispatch_ders(const FeederGraph& graph,
                                  const std::vector<IslandSet>& islands) {
  const auto& idx = graph.index();
  std::vector<int> island_of(graph.buses.size(), -1);
  for (std::size_t i = 0; i < islands.size(); ++i) {
    for (int b : islands[i]) island_of[b] = static_cast<int>(i);
  }
  std::vector<std::vector<int>> ders_in(islands.size());
  for (std::size_t d = 0; d < graph.ders.size(); ++d) {
    const int isl = island_of[idx.der_bus[d]];
    if (isl >= 0) ders_in[isl].push_back(static_cast<int>(d));
  }
  std::vector<double> p_demand(islands.size(), 0.0), q_demand(islands.size(), 0.0);
  for (std::size_t l = 0; l < graph.loads.size(); ++l) {
    const int isl = island_of[idx.load_bus[l]];
    if (isl < 0) continue;
    p_demand[isl] += graph.loads[l].p_demand_kw;
    q_demand[isl] += graph.loads[l].q_demand_kvar;
  }

  DispatchPlan plan;
  plan.island_slack.resize(islands.size());
  for (std::size_t i = 0; i < islands.size(); ++i) {
    auto& slack = plan.island_slack[i];
    for (int b : islands[i]) {
      if (graph.buses[b].is_source) {
        slack = {IslandSlack::Kind::Source, b};
        break;
      }
    }
    if (slack.kind == IslandSlack::Kind::None && !ders_in[i].empty()) {
      int best = ders_in[i].front();
      for (int d : ders_in[i]) {
        if (graph.ders[d].p_max_kw > graph.ders[best].p_max_kw) best = d;
      }
      slack = {IslandSlack::Kind::Der, best};
    }
    if (slack.kind == IslandSlack::Kind::None) continue;

    double capacity = 0.0;
    for (int d : ders_in[i]) capacity += graph.ders[d].p_max_kw;
    const double share = capacity > 0 ? std::min(1.0, p_demand[i] / capacity) : 0.0;
    for (int d : ders_in[i]) {
      if (slack.kind == IslandSlack::Kind::Der && slack.index == d) continue;
      const auto& der = graph.ders[d];
      DerSetpoint requested{der.p_max_kw * share,
                            capacity > 0 ? q_demand[i] * der.p_max_kw / capacity : 0.0};
      plan.der_requested[d] = requested;
      plan.der_setpoints[d] = clamp_to_box(der, requested);
    }
  }
  return plan;
}

namespace detail {

struct RadialTree {
  std::vector<int> order;          // BFS order, slack first (local indices)
  std::vector<int> parent;         // local parent, -1 for slack
  std::vector<int> parent_branch;  // global branch index
};

// Returns nullopt when the in-service edge set of the island has a cycle.
inline std::optional<RadialTree> build_tree(const FeederGraph& graph, const IslandSet& island,
                                            const std::vector<int>& local,
                                            const SwitchStates& states, int slack_local) {
  const auto& idx = graph.index();
  const std::size_t n = island.size();
  std::vector<std::vector<std::pair<int, int>>> adj(n);
  std::size_t edges = 0;
  for (std::size_t b = 0; b < graph.branches.size(); ++b) {
    if (!branch_in_service(graph, b, states)) continue;
    const int u = local[idx.branch_from[b]];
    const int v = local[idx.branch_to[b]];
    if (u < 0 || v < 0) continue;
    adj[u].emplace_back(v, static_cast<int>(b));
    adj[v].emplace_back(u, static_cast<int>(b));
    ++edges;
  }
  if (edges != n - 1) return std::nullopt;

  RadialTree tree;
  tree.parent.assign(n, -1);
  tree.parent_branch.assign(n, -1);
  std::vector<bool> seen(n, false);
  tree.order.push_back(slack_local);
  seen[slack_local] = true;
  for (std::size_t head = 0; head < tree.order.size(); ++head) {
    const int u = tree.order[head];
    for (auto [v, br] : adj[u]) {
      if (seen[v]) continue;
      seen[v] = true;
      tree.parent[v] = u;
      tree.parent_branch[v] = br;
      tree.order.push_back(v);
    }
  }
  if (tree.order.size() != n) return std::nullopt;
  return tree;
}

}  // namespace detail

// Solves one island with backward/forward sweep. The slack bus is held at
// 1.0 pu. Returns Dead for islands without a slack, NotRadial for meshed
// islands and NoConvergence when the iteration cap is hit.
inline IslandResult solve_island(const FeederGraph& graph, const IslandSet& island,
                                 const IslandSlack& slack, const DispatchPlan& plan,
                                 const SwitchStates& states,
                                 const PowerFlowOptions& options = {}) {
  const auto& idx = graph.index();
  IslandResult out;
  if (slack.kind == IslandSlack::Kind::None) return out;

  const std::size_t n = island.size();
  std::vector<int> local(graph.buses.size(), -1);
  for (std::size_t i = 0; i < n; ++i) local[island[i]] = static_cast<int>(i);
  const int slack_bus =
      slack.kind == IslandSlack::Kind::Source ? slack.index : idx.der_bus[slack.index];
  const int slack_local = local[slack_bus];

  const auto tree = detail::build_tree(graph, island, local, states, slack_local);
  if (!tree) {
    out.status = IslandStatus::NotRadial;
    return out;
  }

  const double base = graph.s_base_kva;
  // Net complex power drawn at each bus (loads minus fixed injections), pu.
  std::vector<Complex> demand(n, Complex{});
  for (std::size_t l = 0; l < graph.loads.size(); ++l) {
    const int u = local[idx.load_bus[l]];
    if (u < 0) continue;
    demand[u] += Complex(graph.loads[l].p_demand_kw, graph.loads[l].q_demand_kvar) / base;
  }
  for (const auto& [d, sp] : plan.der_setpoints) {
    const int u = local[idx.der_bus[d]];
    if (u < 0) continue;
    demand[u] -= Complex(sp.p_kw, sp.q_kvar) / base;
  }

  std::vector<Complex> impedance(n, Complex{});
  for (std::size_t u = 0; u < n; ++u) {
    if (tree->parent_branch[u] >= 0) {
      const auto& br = graph.branches[tree->parent_branch[u]];
      impedance[u] = Complex(br.r_pu, br.x_pu);
    }
  }

  std::vector<Complex> voltage(n, Complex(1.0, 0.0));
  std::vector<Complex> branch_current(n, Complex{});  // current into u from its parent
  std::vector<Complex> bus_current(n, Complex{});
  bool converged = false;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    out.iterations = iter;
    for (std::size_t u = 0; u < n; ++u) bus_current[u] = std::conj(demand[u] / voltage[u]);
    std::fill(branch_current.begin(), branch_current.end(), Complex{});
    for (auto it = tree->order.rbegin(); it != tree->order.rend(); ++it) {
      const int u = *it;
      if (tree->parent[u] < 0) continue;
      branch_current[u] += bus_current[u];
      branch_current[tree->parent[u]] += branch_current[u];
    }
    for (int u : tree->order) {
      if (tree->parent[u] < 0) continue;
      voltage[u] = voltage[tree->parent[u]] - impedance[u] * branch_current[u];
    }
    double mismatch = 0.0;
    bool finite = true;
    for (std::size_t u = 0; u < n; ++u) {
      if (static_cast<int>(u) == slack_local) continue;
      const Complex s = voltage[u] * std::conj(bus_current[u]);
      const double m = std::abs(s - demand[u]);
      if (!std::isfinite(m)) finite = false;
      mismatch = std::max(mismatch, m);
    }
    out.max_mismatch_pu = mismatch;
    if (!finite) break;
    if (mismatch < options.tol_pu) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    out.status = IslandStatus::NoConvergence;
    return out;
  }

  out.status = IslandStatus::Energized;
  Complex loss{};
  Complex slack_out{};
  for (std::size_t u = 0; u < n; ++u) {
    const int br = tree->parent_branch[u];
    if (br < 0) continue;
    const int p = tree->parent[u];
    const Complex j = branch_current[u];
    loss += impedance[u] * std::norm(j);
    if (p == slack_local) slack_out += voltage[p] * std::conj(j);
    const Complex sending = voltage[p] * std::conj(j) * base;
    const Complex receiving = voltage[u] * std::conj(j) * base;
    const bool forward = idx.branch_from[br] == island[p];
    BranchFlow flow;
    const Complex from_end = forward ? sending : -receiving;
    flow.p_kw = from_end.real();
    flow.q_kvar = from_end.imag();
    flow.s_kva = std::max(std::abs(sending), std::abs(receiving));
    out.flows.emplace_back(br, flow);
  }
  out.p_loss_kw = loss.real() * base;
  out.q_loss_kvar = loss.imag() * base;

  // Slack bus injection = power leaving on its branches + its own net demand.
  const Complex slack_injection = (slack_out + demand[slack_local]) * base;
  out.slack_p_requested_kw = slack_injection.real();
  out.slack_q_requested_kvar = slack_injection.imag();
  out.slack_p_kw = out.slack_p_requested_kw;
  out.slack_q_kvar = out.slack_q_requested_kvar;
  if (slack.kind == IslandSlack::Kind::Der) {
    const auto& der = graph.ders[slack.index];
    out.slack_p_kw = std::clamp(out.slack_p_requested_kw, der.p_min_kw, der.p_max_kw);
  }

  for (std::size_t u = 0; u < n; ++u) out.v_pu.emplace_back(island[u], std::abs(voltage[u]));
  for (std::size_t l = 0; l < graph.loads.size(); ++l) {
    if (local[idx.load_bus[l]] >= 0) out.served_kw.emplace_back(l, graph.loads[l].p_demand_kw);
  }
  for (std::size_t d = 0; d < graph.ders.size(); ++d) {
    if (local[idx.der_bus[d]] < 0) continue;
    if (slack.kind == IslandSlack::Kind::Der && slack.index == static_cast<int>(d)) {
      out.der_output.emplace_back(d, DerSetpoint{out.slack_p_kw, out.slack_q_kvar});
    } else if (auto it = plan.der_setpoints.find(static_cast<int>(d));
               it != plan.der_setpoints.end()) {
      out.der_output.emplace_back(d, it->second);
    }
  }
  return out;
}

// Islands the feeder, dispatches DERs and solves every island. Never throws
// for physical infeasibility: meshed or divergent islands are reported as
// unserved and flagged in island_status.
inline PowerFlowResult solve_system(const FeederGraph& graph, const SwitchStates& states,
                                    const PowerFlowOptions& options = {}) {
  PowerFlowResult result;
  result.islands = connected_components(graph, states);
  result.plan = dispatch_ders(graph, result.islands);
  result.v_pu.assign(graph.buses.size(), 0.0);
  result.flows.assign(graph.branches.size(), BranchFlow{});
  result.served.assign(graph.loads.size(), 0.0);
  result.energized.assign(graph.buses.size(), false);
  result.der_output.assign(graph.ders.size(), DerSetpoint{});
  result.der_requested.assign(graph.ders.size(), DerSetpoint{});

  for (std::size_t i = 0; i < result.islands.size(); ++i) {
    const auto& slack = result.plan.island_slack[i];
    const IslandResult island =
        solve_island(graph, result.islands[i], slack, result.plan, states, options);
    result.island_status.push_back(island.status);
    result.iterations = std::max(result.iterations, island.iterations);
    if (island.status == IslandStatus::NoConvergence) result.converged = false;
    if (island.status != IslandStatus::Energized) continue;

    for (int b : result.islands[i]) result.energized[b] = true;
    for (auto [b, v] : island.v_pu) result.v_pu[b] = v;
    for (auto [br, f] : island.flows) result.flows[br] = f;
    for (auto [l, s] : island.served_kw) result.served[l] = s;
    for (auto [d, sp] : island.der_output) result.der_output[d] = sp;
    result.p_loss_kw += island.p_loss_kw;
    if (slack.kind == IslandSlack::Kind::Der) {
      result.der_requested[slack.index] = {island.slack_p_requested_kw,
                                           island.slack_q_requested_kvar};
    } else {
      result.source_p_kw += island.slack_p_kw;
      result.source_q_kvar += island.slack_q_kvar;
    }
  }
  for (const auto& [d, req] : result.plan.der_requested) {
    if (result.energized[graph.index().der_bus[d]]) result.der_requested[d] = req;
  }
  return result;
}

}  // namespace gridrestore

#endif  // GRIDRESTORE_POWERFLOW_HPP_
