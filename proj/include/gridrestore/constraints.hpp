#ifndef GRIDRESTORE_CONSTRAINTS_HPP_
#define GRIDRESTORE_CONSTRAINTS_HPP_

// Constraint evaluation (power balance, voltage band, DER box, thermal,
// global generation cap, per-microgrid balance), the aggregate violation
// magnitude xi and the shared step reward.

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <string>

#include "gridrestore/errors.hpp"
#include "gridrestore/feeder.hpp"
#include "gridrestore/powerflow.hpp"

namespace gridrestore {

// Normalization constants for each violation field. Unset entries fall back
// to the feeder-derived defaults in default_norms().
struct ConstraintNorms {
  std::array<double, 6> value{};  // c1..c6
};

enum class DeltaMode { WeightedFraction, RawKw };

struct RewardConfig {
  double alpha = 1.0;
  double beta = 0.1;
  double lambda_pen = 1.0;
  double v_min_pu = 0.95;
  double v_max_pu = 1.05;
  DeltaMode delta_mode = DeltaMode::WeightedFraction;
  std::optional<ConstraintNorms> constraint_norms;

  void validate() const {
    if (alpha < 0 || beta < 0 || lambda_pen < 0) {
      throw ConfigError("reward weights alpha, beta, lambda_pen must be >= 0");
    }
    if (!(v_min_pu < v_max_pu)) throw ConfigError("reward.v_min_pu must be < v_max_pu");
  }
};

struct ViolationReport {
  double c1_kw = 0.0;    // power balance shortfall
  double c2_pu = 0.0;    // summed voltage band excursion
  double c3_kw = 0.0;    // DER operating-box overshoot (kW + kvar)
  double c4_kva = 0.0;   // thermal overload
  double c5_kw = 0.0;    // global generation cap excess
  double c6_kw = 0.0;    // per-microgrid local balance shortfall
  double xi = 0.0;

  std::array<double, 6> fields() const { return {c1_kw, c2_pu, c3_kw, c4_kva, c5_kw, c6_kw}; }
  bool all_zero() const {
    const auto f = fields();
    return std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; });
  }
};

inline ConstraintNorms default_norms(const FeederGraph& graph) {
  double p_max_total = 0.0;
  for (const auto& d : graph.ders) p_max_total += d.p_max_kw;
  double s_max_total = 0.0;
  for (const auto& br : graph.branches) s_max_total += br.s_max_pu * graph.s_base_kva;
  const double cap = graph.p_gen_cap_kw;
  ConstraintNorms n;
  n.value = {cap, 1.0, p_max_total > 0 ? p_max_total : cap,
             s_max_total > 0 ? s_max_total : cap, cap, cap};
  return n;
}

inline double compose_xi(const ViolationReport& r, const ConstraintNorms& norms) {
  const auto f = r.fields();
  double xi = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) xi += f[i] / norms.value[i];
  return xi;
}

inline constexpr double kBalanceTolKw = 1e-3;

// P^gen_m is the active capacity of the energized DERs owned by microgrid m;
// a microgrid containing an energized source bus is unconstrained.
inline ViolationReport evaluate_constraints(const FeederGraph& graph,
                                            const PowerFlowResult& result,
                                            const RewardConfig& config) {
  const auto& idx = graph.index();
  ViolationReport r;

  const double generation = result.total_generation_kw();
  // Residuals below the sweep's convergence noise are not a shortfall.
  r.c1_kw = std::max(0.0, result.total_served_kw() + result.p_loss_kw - generation);
  if (r.c1_kw < kBalanceTolKw) r.c1_kw = 0.0;

  for (std::size_t b = 0; b < graph.buses.size(); ++b) {
    if (!result.energized[b]) continue;
    const double v = result.v_pu[b];
    r.c2_pu += std::max(0.0, v - config.v_max_pu) + std::max(0.0, config.v_min_pu - v);
  }

  for (std::size_t d = 0; d < graph.ders.size(); ++d) {
    if (!result.energized[idx.der_bus[d]]) continue;
    const auto& der = graph.ders[d];
    const auto& req = result.der_requested[d];
    r.c3_kw += std::max(0.0, req.p_kw - der.p_max_kw) + std::max(0.0, der.p_min_kw - req.p_kw);
    r.c3_kw += std::max(0.0, req.q_kvar - der.q_max_kvar) +
               std::max(0.0, der.q_min_kvar - req.q_kvar);
  }

  for (std::size_t br = 0; br < graph.branches.size(); ++br) {
    const double limit = graph.branches[br].s_max_pu * graph.s_base_kva;
    r.c4_kva += std::max(0.0, result.flows[br].s_kva - limit);
  }

  r.c5_kw = std::max(0.0, generation - graph.p_gen_cap_kw);

  const std::size_t regions = graph.microgrids.size();
  if (regions > 0) {
    std::vector<double> load(regions, 0.0), gen(regions, 0.0);
    std::vector<bool> has_source(regions, false);
    for (std::size_t l = 0; l < graph.loads.size(); ++l) {
      const int m = idx.load_region[l];
      if (m >= 0) load[m] += result.served[l];
    }
    for (std::size_t d = 0; d < graph.ders.size(); ++d) {
      if (!result.energized[idx.der_bus[d]]) continue;
      gen[graph.ders[d].owner_microgrid] += graph.ders[d].p_max_kw;
    }
    for (std::size_t b = 0; b < graph.buses.size(); ++b) {
      if (graph.buses[b].is_source && result.energized[b] && idx.bus_region[b] >= 0) {
        has_source[idx.bus_region[b]] = true;
      }
    }
    for (std::size_t m = 0; m < regions; ++m) {
      if (!has_source[m]) r.c6_kw += std::max(0.0, load[m] - gen[m]);
    }
  }

  r.xi = compose_xi(r, config.constraint_norms.value_or(default_norms(graph)));
  return r;
}

struct WeightedRestoration {
  double weighted_kw = 0.0;
  double fraction = 0.0;
};

inline double weighted_demand(const FeederGraph& graph) {
  double total = 0.0;
  for (const auto& l : graph.loads) total += l.priority * l.p_demand_kw;
  return total;
}

// J = sum_k c_k P_k and its ratio to the fully-served value.
inline WeightedRestoration weighted_restored(const FeederGraph& graph,
                                             const PowerFlowResult& result) {
  WeightedRestoration out;
  for (std::size_t l = 0; l < graph.loads.size(); ++l) {
    out.weighted_kw += graph.loads[l].priority * result.served[l];
  }
  const double demand = weighted_demand(graph);
  out.fraction = demand > 0 ? out.weighted_kw / demand : 0.0;
  return out;
}

inline double step_reward(double prev_restored, double curr_restored, double p_loss_kw,
                          double xi, const RewardConfig& config,
                          double p_gen_cap_kw = 2400.0) {
  return config.alpha * (curr_restored - prev_restored) -
         config.beta * (p_loss_kw / p_gen_cap_kw) - config.lambda_pen * xi;
}

inline double step_reward(double prev_restored, double curr_restored, double p_loss_kw,
                          const ViolationReport& report, const RewardConfig& config,
                          double p_gen_cap_kw = 2400.0) {
  return step_reward(prev_restored, curr_restored, p_loss_kw, report.xi, config, p_gen_cap_kw);
}

}  // namespace gridrestore

#endif  // GRIDRESTORE_CONSTRAINTS_HPP_
