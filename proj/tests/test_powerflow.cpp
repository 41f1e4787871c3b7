#include <gtest/gtest.h>

#include <complex>

#include "gridrestore/feeder.hpp"
#include "gridrestore/powerflow.hpp"
#include "gridrestore/rng.hpp"
#include "pf_oracle.hpp"

using namespace gridrestore;
using namespace gridrestore::fixtures;

namespace {

double served_sum(const PowerFlowResult& r) { return r.total_served_kw(); }

}  // namespace

TEST(SolveIsland, TwoBusNoLoadIsFlat) {
  auto g = two_bus(0.01, 0.01, 0.0, 0.0);
  const auto r = solve_system(g, {});
  ASSERT_TRUE(r.converged);
  EXPECT_DOUBLE_EQ(r.v_pu[0], 1.0);
  EXPECT_DOUBLE_EQ(r.v_pu[1], 1.0);
  EXPECT_DOUBLE_EQ(r.p_loss_kw, 0.0);
}

TEST(SolveIsland, TwoBusMatchesGaussOracle) {
  auto g = two_bus(0.01, 0.01, 100.0, 50.0);
  const auto r = solve_system(g, {});
  ASSERT_TRUE(r.converged);
  const auto oracle = gauss_oracle(g, r);
  EXPECT_NEAR(r.v_pu[1], oracle.v_pu[1], 1e-8 * oracle.v_pu[1]);
  EXPECT_NEAR(r.p_loss_kw, oracle.p_loss_kw, 1e-8 * oracle.p_loss_kw);
  // Hand check of the magnitude: drop is about (rP + xQ) = 0.0015 pu.
  EXPECT_NEAR(r.v_pu[1], 1.0 - 0.0015, 5e-5);
}

TEST(SolveIsland, LoopIsNotRadial) {
  FeederGraph g;
  g.s_base_kva = 1000;
  g.buses = {{"a", 4.16, true}, {"b", 4.16, false}, {"c", 4.16, false}};
  g.branches = {{"ab", "a", "b", 0.01, 0.01, 1.0, std::nullopt},
                {"bc", "b", "c", 0.01, 0.01, 1.0, std::nullopt},
                {"ca", "c", "a", 0.01, 0.01, 1.0, std::nullopt}};
  g.loads = {{"L", "c", 100, 30, 1}};
  g.build_index();
  const auto r = solve_system(g, {});
  ASSERT_EQ(r.island_status.size(), 1u);
  EXPECT_EQ(r.island_status[0], IslandStatus::NotRadial);
  EXPECT_EQ(r.served[0], 0.0);
  EXPECT_FALSE(r.energized[0]);
}

TEST(SolveIsland, HeavyLoadDoesNotConverge) {
  auto g = two_bus(1.0, 1.0, 5000.0, 2000.0);
  const auto r = solve_system(g, {});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.count(IslandStatus::NoConvergence), 1);
  EXPECT_EQ(r.served[0], 0.0);
  EXPECT_EQ(r.v_pu[1], 0.0);
}

TEST(DispatchDers, SingleDerIsSlack) {
  FeederGraph g;
  g.buses = {{"a", 4.16, false}, {"b", 4.16, false}};
  g.branches = {{"ab", "a", "b", 0.01, 0.01, 1.0, std::nullopt}};
  g.loads = {{"L", "b", 100, 30, 1}};
  g.ders = {{"G", "a", 0, 500, -300, 300, 0}};
  g.build_index();
  const auto plan = dispatch_ders(g, {{0, 1}});
  ASSERT_EQ(plan.island_slack.size(), 1u);
  EXPECT_EQ(plan.island_slack[0].kind, IslandSlack::Kind::Der);
  EXPECT_EQ(plan.island_slack[0].index, 0);
  EXPECT_TRUE(plan.der_setpoints.empty());
}

TEST(DispatchDers, LargestDerIsSlackOthersProportional) {
  FeederGraph g;
  g.buses = {{"a", 4.16, false}, {"b", 4.16, false}};
  g.branches = {{"ab", "a", "b", 0.01, 0.01, 1.0, std::nullopt}};
  g.loads = {{"L", "b", 200, 80, 1}};
  g.ders = {{"small", "b", 0, 100, -100, 100, 0}, {"big", "a", 0, 300, -300, 300, 0}};
  g.build_index();
  const auto plan = dispatch_ders(g, {{0, 1}});
  EXPECT_EQ(plan.island_slack[0].kind, IslandSlack::Kind::Der);
  EXPECT_EQ(plan.island_slack[0].index, 1);
  ASSERT_EQ(plan.der_setpoints.count(0), 1u);
  // share = 200 / 400; the 100 kW unit injects 50 kW and 80 * 100/400 kvar.
  EXPECT_DOUBLE_EQ(plan.der_setpoints.at(0).p_kw, 50.0);
  EXPECT_DOUBLE_EQ(plan.der_setpoints.at(0).q_kvar, 20.0);
}

TEST(DispatchDers, SourceBeatsDers) {
  FeederGraph g;
  g.buses = {{"a", 4.16, true}, {"b", 4.16, false}};
  g.branches = {{"ab", "a", "b", 0.01, 0.01, 1.0, std::nullopt}};
  g.loads = {{"L", "b", 200, 80, 1}};
  g.ders = {{"G", "b", 0, 900, -300, 300, 0}};
  g.build_index();
  const auto plan = dispatch_ders(g, {{0, 1}});
  EXPECT_EQ(plan.island_slack[0].kind, IslandSlack::Kind::Source);
  EXPECT_EQ(plan.island_slack[0].index, 0);
  EXPECT_EQ(plan.der_setpoints.count(0), 1u);
}

TEST(DispatchDers, IslandWithoutGenerationIsDead) {
  const auto g = load_feeder("toy4");
  const auto r = solve_system(g, g.all(SwitchState::Open));
  // b2 and b3 hold the loads and have no DER: both dead.
  EXPECT_FALSE(r.energized[g.bus_index("b2")]);
  EXPECT_FALSE(r.energized[g.bus_index("b3")]);
  EXPECT_TRUE(r.energized[g.bus_index("b1")]);
  EXPECT_EQ(r.v_pu[g.bus_index("b2")], 0.0);
}

TEST(SolveSystem, Toy13AllOpenServesNothing) {
  const auto g = load_feeder("toy13");
  const auto r = solve_system(g, g.all(SwitchState::Open));
  for (double s : r.served) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(r.p_loss_kw, 0.0);
}

TEST(SolveSystem, Toy13AllClosedServesEverything) {
  const auto g = load_feeder("toy13");
  const auto r = solve_system(g, g.all(SwitchState::Closed));
  ASSERT_TRUE(r.converged);
  for (std::size_t l = 0; l < g.loads.size(); ++l) EXPECT_DOUBLE_EQ(r.served[l], g.loads[l].p_demand_kw);
  const auto oracle = gauss_oracle(g, r, g.all(SwitchState::Closed));
  for (std::size_t b = 0; b < g.buses.size(); ++b) EXPECT_NEAR(r.v_pu[b], oracle.v_pu[b], 1e-6);
}

TEST(SolveSystem, Toy13IsolatedLoadIslandUnserved) {
  const auto g = load_feeder("toy13");
  auto states = g.all(SwitchState::Closed);
  states[g.switch_index("s3")] = SwitchState::Open;
  states[g.switch_index("s6")] = SwitchState::Open;
  const auto r = solve_system(g, states);
  for (std::size_t l = 0; l < g.loads.size(); ++l) {
    const bool isolated = g.loads[l].id == "L4" || g.loads[l].id == "L5";
    EXPECT_EQ(r.served[l], isolated ? 0.0 : g.loads[l].p_demand_kw) << g.loads[l].id;
  }
}

TEST(SolveSystem, DeterministicBitwise) {
  const auto g = load_feeder("toy34");
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    SwitchStates s(g.switches.size());
    for (auto& st : s) st = rng.uniform() < 0.6 ? SwitchState::Closed : SwitchState::Open;
    const auto a = solve_system(g, s);
    const auto b = solve_system(g, s);
    EXPECT_EQ(a.v_pu, b.v_pu);
    EXPECT_EQ(a.p_loss_kw, b.p_loss_kw);
    EXPECT_EQ(a.served, b.served);
  }
}

TEST(SolveSystemProperty, RandomIslandsMatchOracleAndConserve) {
  Rng rng(2024);
  for (int trial = 0; trial < 150; ++trial) {
    const auto g = random_radial_island(rng, 6);
    const auto r = solve_system(g, {});
    ASSERT_TRUE(r.converged) << "trial " << trial;
    const auto oracle = gauss_oracle(g, r);
    for (std::size_t b = 0; b < g.buses.size(); ++b) {
      ASSERT_NEAR(r.v_pu[b], oracle.v_pu[b], 1e-6) << "trial " << trial << " bus " << b;
    }
    ASSERT_GE(r.p_loss_kw, 0.0);
    const double balance = r.total_generation_kw() - served_sum(r) - r.p_loss_kw;
    ASSERT_LT(std::abs(balance), 1e-6 * g.s_base_kva) << "trial " << trial;
  }
}

TEST(SolveSystemProperty, ConservationOnFixtureConfigurations) {
  Rng rng(5);
  for (const char* name : {"toy13", "toy34"}) {
    const auto g = load_feeder(name);
    for (int t = 0; t < 100; ++t) {
      SwitchStates s(g.switches.size());
      for (auto& st : s) st = rng.uniform() < 0.5 ? SwitchState::Closed : SwitchState::Open;
      const auto r = solve_system(g, s);
      ASSERT_GE(r.p_loss_kw, 0.0);
      // Conservation uses the physical slack injection, before clamping.
      double injected = r.source_p_kw;
      for (std::size_t d = 0; d < g.ders.size(); ++d) {
        if (r.energized[g.index().der_bus[d]]) injected += r.der_requested[d].p_kw;
      }
      // Fixed DERs deliver their clamped setpoint; requested may differ only when clamped.
      for (const auto& [d, sp] : r.plan.der_setpoints) {
        if (r.energized[g.index().der_bus[d]]) injected += sp.p_kw - r.der_requested[d].p_kw;
      }
      ASSERT_LT(std::abs(injected - served_sum(r) - r.p_loss_kw), 1e-6 * g.s_base_kva);
    }
  }
}

TEST(SolveSystemProperty, VoltageFallsAlongUniformChain) {
  for (int n = 2; n <= 8; ++n) {
    FeederGraph g;
    g.s_base_kva = 1000;
    for (int i = 0; i < n; ++i) g.buses.push_back({"b" + std::to_string(i), 4.16, false});
    for (int i = 1; i < n; ++i) {
      g.branches.push_back({"l" + std::to_string(i), "b" + std::to_string(i - 1),
                            "b" + std::to_string(i), 0.005, 0.01, 1.0, std::nullopt});
      g.loads.push_back({"L" + std::to_string(i), "b" + std::to_string(i), 80, 25, 1});
    }
    g.ders.push_back({"G", "b0", 0, 5000, -3000, 3000, 0});
    g.build_index();
    const auto r = solve_system(g, {});
    ASSERT_TRUE(r.converged);
    for (int i = 1; i < n; ++i) EXPECT_LE(r.v_pu[i], r.v_pu[i - 1]);
  }
}

TEST(SolveSystem, SlackClampRecordsRequest) {
  // 300 kW DER facing 500 kW of load: delivered output is clamped, the
  // request keeps the physical value.
  FeederGraph g;
  g.buses = {{"a", 4.16, false}, {"b", 4.16, false}};
  g.branches = {{"ab", "a", "b", 0.001, 0.001, 1.0, std::nullopt}};
  g.loads = {{"L", "b", 500, 100, 1}};
  g.ders = {{"G", "a", 0, 300, -300, 300, 0}};
  g.build_index();
  const auto r = solve_system(g, {});
  EXPECT_DOUBLE_EQ(r.der_output[0].p_kw, 300.0);
  EXPECT_GT(r.der_requested[0].p_kw, 500.0);
}
