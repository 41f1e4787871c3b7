#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "gridrestore/feeder.hpp"
#include "gridrestore/rng.hpp"

using namespace gridrestore;
using nlohmann::json;

namespace {

json fixture_json(const std::string& name) {
  std::ifstream in(resolve_feeder_path(name));
  return json::parse(in);
}

// Reachability over in-service branches by repeated relaxation; slow but
// shares nothing with the union-find used by connected_components.
std::vector<int> naive_labels(const FeederGraph& g, const SwitchStates& states) {
  const auto& idx = g.index();
  std::vector<int> label(g.buses.size());
  for (std::size_t b = 0; b < label.size(); ++b) label[b] = static_cast<int>(b);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t br = 0; br < g.branches.size(); ++br) {
      const int s = idx.branch_switch[br];
      if (s >= 0 && states[s] == SwitchState::Open) continue;
      int& a = label[idx.branch_from[br]];
      int& b = label[idx.branch_to[br]];
      if (a != b) {
        a = b = std::min(a, b);
        changed = true;
      }
    }
  }
  return label;
}

std::size_t naive_island_count(const FeederGraph& g, const SwitchStates& states) {
  const auto labels = naive_labels(g, states);
  return std::set<int>(labels.begin(), labels.end()).size();
}

SwitchStates random_states(const FeederGraph& g, Rng& rng) {
  SwitchStates s(g.switches.size());
  for (auto& st : s) st = rng.uniform() < 0.5 ? SwitchState::Open : SwitchState::Closed;
  return s;
}

json minimal_two_bus() {
  return json::parse(R"({
    "s_base_kva": 1000, "p_gen_cap_kw": 2400,
    "buses": [{"id": "src", "base_kv": 4.16, "is_source": true}, {"id": "b2", "base_kv": 4.16}],
    "branches": [{"id": "l1", "from_bus": "src", "to_bus": "b2", "r_pu": 0.01, "x_pu": 0.01, "s_max_pu": 1}],
    "switches": [], "loads": [{"id": "L1", "bus_id": "b2", "p_demand_kw": 100, "q_demand_kvar": 50, "priority": 1}],
    "ders": [], "microgrids": []
  })");
}

}  // namespace

TEST(LoadFeeder, Toy13Counts) {
  const auto g = load_feeder("toy13");
  EXPECT_EQ(g.buses.size(), 13u);
  EXPECT_EQ(g.switches.size(), 6u);
  EXPECT_EQ(g.ders.size(), 3u);
  EXPECT_EQ(g.loads.size(), 10u);
  EXPECT_EQ(g.microgrids.size(), 2u);
  EXPECT_EQ(g.num_agents(), 2u);
  EXPECT_EQ(g.microgrids[0].switch_ids.size(), 4u);
  EXPECT_EQ(g.microgrids[1].switch_ids.size(), 2u);
}

TEST(LoadFeeder, Toy4AndToy34Counts) {
  const auto t4 = load_feeder("toy4");
  EXPECT_EQ(t4.buses.size(), 4u);
  EXPECT_EQ(t4.switches.size(), 2u);
  const auto t34 = load_feeder("toy34");
  EXPECT_EQ(t34.buses.size(), 34u);
  EXPECT_EQ(t34.switches.size(), 12u);
  EXPECT_EQ(t34.microgrids.size(), 3u);
}

TEST(LoadFeeder, MinimalTwoBusFeeder) {
  const auto g = parse_feeder(minimal_two_bus());
  EXPECT_EQ(g.buses.size(), 2u);
  EXPECT_EQ(g.branches.size(), 1u);
  EXPECT_EQ(g.index().source_count, 1);
}

TEST(LoadFeeder, DuplicateBusIdNamesTheId) {
  auto doc = minimal_two_bus();
  doc["buses"][1]["id"] = "src";
  try {
    parse_feeder(doc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("src"), std::string::npos) << e.what();
  }
}

TEST(LoadFeeder, UnknownKeyIsParseError) {
  auto doc = minimal_two_bus();
  doc["buses"][0]["colour"] = "red";
  EXPECT_THROW(parse_feeder(doc), ParseError);
  auto top = minimal_two_bus();
  top["extra"] = 1;
  EXPECT_THROW(parse_feeder(top), ParseError);
}

TEST(LoadFeeder, MalformedTextIsParseError) {
  EXPECT_THROW(parse_feeder_text("{\"buses\": ["), ParseError);
  EXPECT_THROW(parse_feeder_text("[]"), ParseError);
  EXPECT_THROW(load_feeder("/nonexistent/feeder.json"), ParseError);
}

TEST(LoadFeeder, ElementInvariants) {
  auto self_loop = minimal_two_bus();
  self_loop["branches"][0]["to_bus"] = "src";
  EXPECT_THROW(parse_feeder(self_loop), ValidationError);

  auto zero_z = minimal_two_bus();
  zero_z["branches"][0]["r_pu"] = 0;
  zero_z["branches"][0]["x_pu"] = 0;
  EXPECT_THROW(parse_feeder(zero_z), ValidationError);

  auto no_rating = minimal_two_bus();
  no_rating["branches"][0]["s_max_pu"] = 0;
  EXPECT_THROW(parse_feeder(no_rating), ValidationError);

  auto bad_priority = minimal_two_bus();
  bad_priority["loads"][0]["priority"] = 11;
  EXPECT_THROW(parse_feeder(bad_priority), ValidationError);

  auto negative_load = minimal_two_bus();
  negative_load["loads"][0]["p_demand_kw"] = -1;
  EXPECT_THROW(parse_feeder(negative_load), ValidationError);

  auto bad_kv = minimal_two_bus();
  bad_kv["buses"][1]["base_kv"] = 0;
  EXPECT_THROW(parse_feeder(bad_kv), ValidationError);

  auto dangling = minimal_two_bus();
  dangling["loads"][0]["bus_id"] = "nowhere";
  EXPECT_THROW(parse_feeder(dangling), ValidationError);
}

TEST(LoadFeeder, DerBoundsChecked) {
  auto doc = fixture_json("toy4");
  doc["ders"][0]["p_min_kw"] = 400.0;  // above p_max
  EXPECT_THROW(parse_feeder(doc), ValidationError);
  doc = fixture_json("toy4");
  doc["ders"][0]["q_min_kvar"] = 300.0;
  EXPECT_THROW(parse_feeder(doc), ValidationError);
  doc = fixture_json("toy4");
  doc["ders"][0]["p_min_kw"] = -1.0;
  EXPECT_THROW(parse_feeder(doc), ValidationError);
}

TEST(LoadFeeder, DisconnectedFeederRejected) {
  auto doc = minimal_two_bus();
  doc["buses"].push_back({{"id", "b3"}, {"base_kv", 4.16}});
  EXPECT_THROW(parse_feeder(doc), ValidationError);
}

TEST(ValidatePartition, FixturesPass) {
  for (const char* name : {"toy4", "toy13", "toy34"}) {
    const auto g = load_feeder(name);
    EXPECT_NO_THROW(validate_partition(g)) << name;
  }
}

TEST(ValidatePartition, BusInTwoRegions) {
  auto doc = fixture_json("toy13");
  doc["microgrids"][1]["bus_ids"].push_back("b1");
  try {
    parse_feeder(doc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("microgrid 1"), std::string::npos) << e.what();
  }
}

TEST(ValidatePartition, RegionWithoutSwitches) {
  auto doc = fixture_json("toy13");
  // Hand both of microgrid 1's switches to microgrid 0.
  for (auto& s : doc["switches"]) s["owner_microgrid"] = 0;
  doc["microgrids"][0]["switch_ids"] = {"s1", "s2", "s3", "s4", "s5", "s6"};
  doc["microgrids"][1]["switch_ids"] = json::array();
  try {
    parse_feeder(doc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("microgrid 1"), std::string::npos) << e.what();
  }
}

TEST(ValidatePartition, UncoveredBusRejected) {
  auto doc = fixture_json("toy13");
  auto& buses = doc["microgrids"][1]["bus_ids"];
  buses.erase(buses.end() - 1);
  EXPECT_THROW(parse_feeder(doc), ValidationError);
}

TEST(ConnectedComponents, AllClosedIsOneIsland) {
  for (const char* name : {"toy4", "toy13", "toy34"}) {
    const auto g = load_feeder(name);
    const auto islands = connected_components(g, g.all(SwitchState::Closed));
    ASSERT_EQ(islands.size(), 1u) << name;
    EXPECT_EQ(islands[0].size(), g.buses.size());
  }
}

TEST(ConnectedComponents, Toy13CutSwitches) {
  // toy13 is a tree: every open switch adds one island.
  const auto g = load_feeder("toy13");
  auto states = g.all(SwitchState::Closed);
  states[g.switch_index("s3")] = SwitchState::Open;
  EXPECT_EQ(connected_components(g, states).size(), 2u);
  states[g.switch_index("s6")] = SwitchState::Open;  // b6-b7 now cut off on both sides
  const auto islands = connected_components(g, states);
  ASSERT_EQ(islands.size(), 3u);
  std::set<int> all;
  for (const auto& isl : islands) all.insert(isl.begin(), isl.end());
  EXPECT_EQ(all.size(), g.buses.size());
  const std::set<int> cut{g.bus_index("b6"), g.bus_index("b7")};
  int matches = 0;
  for (const auto& isl : islands) matches += std::set<int>(isl.begin(), isl.end()) == cut;
  EXPECT_EQ(matches, 1);
}

TEST(ConnectedComponents, AllOpenMatchesNaiveReachability) {
  for (const char* name : {"toy4", "toy13", "toy34"}) {
    const auto g = load_feeder(name);
    const auto states = g.all(SwitchState::Open);
    EXPECT_EQ(connected_components(g, states).size(), naive_island_count(g, states)) << name;
  }
}

TEST(ConnectedComponents, WrongStateCountThrows) {
  const auto g = load_feeder("toy4");
  EXPECT_THROW(connected_components(g, SwitchStates(1, SwitchState::Open)), DimensionMismatch);
}

TEST(ConnectedComponentsProperty, ExactPartitionMatchingOracle) {
  Rng rng(11);
  for (const char* name : {"toy13", "toy34"}) {
    const auto g = load_feeder(name);
    for (int trial = 0; trial < 300; ++trial) {
      const auto states = random_states(g, rng);
      const auto islands = connected_components(g, states);
      std::vector<int> seen(g.buses.size(), 0);
      for (const auto& isl : islands) {
        for (int b : isl) ++seen[b];
      }
      for (int c : seen) ASSERT_EQ(c, 1);
      const auto labels = naive_labels(g, states);
      for (const auto& isl : islands) {
        for (int b : isl) ASSERT_EQ(labels[b], labels[isl.front()]);
      }
      ASSERT_EQ(islands.size(), naive_island_count(g, states));
    }
  }
}

TEST(ConnectedComponentsProperty, ClosingNeverIncreasesIslandCount) {
  Rng rng(12);
  for (const char* name : {"toy13", "toy34"}) {
    const auto g = load_feeder(name);
    for (int trial = 0; trial < 300; ++trial) {
      auto states = random_states(g, rng);
      const auto before = connected_components(g, states).size();
      const auto s = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(g.switches.size()) - 1));
      states[s] = SwitchState::Closed;
      ASSERT_LE(connected_components(g, states).size(), before);
    }
  }
}

TEST(Serialization, RoundTripIsIdentity) {
  for (const char* name : {"toy4", "toy13", "toy34"}) {
    const auto g = load_feeder(name);
    const auto again = parse_feeder_text(serialize_feeder(g).dump());
    EXPECT_EQ(g, again) << name;
  }
  const auto minimal = parse_feeder(minimal_two_bus());
  EXPECT_EQ(minimal, parse_feeder_text(serialize_feeder(minimal).dump()));
}
