// Small hand-built feeders shared by several test binaries.
#pragma once

#include <memory>

#include "gridrestore/feeder.hpp"

namespace gridrestore::fixtures {

// One microgrid: DER at a, load at b, a single switch between them.
inline std::shared_ptr<const FeederGraph> single_switch_feeder() {
  return std::make_shared<const FeederGraph>(parse_feeder_text(R"({
    "s_base_kva": 1000, "p_gen_cap_kw": 2400,
    "buses": [{"id": "a", "base_kv": 4.16, "is_source": false},
              {"id": "b", "base_kv": 4.16, "is_source": false}],
    "branches": [{"id": "ab", "from_bus": "a", "to_bus": "b", "r_pu": 0.01, "x_pu": 0.01,
                  "s_max_pu": 1.0, "switch_id": "s"}],
    "switches": [{"id": "s", "branch_id": "ab", "state": "Open", "owner_microgrid": 0}],
    "loads": [{"id": "L", "bus_id": "b", "p_demand_kw": 50, "q_demand_kvar": 10, "priority": 1}],
    "ders": [{"id": "G", "bus_id": "a", "p_min_kw": 0, "p_max_kw": 100, "q_min_kvar": -50,
              "q_max_kvar": 50, "owner_microgrid": 0}],
    "microgrids": [{"index": 0, "bus_ids": ["a", "b"], "switch_ids": ["s"],
                    "load_ids": ["L"], "der_ids": ["G"]}]
  })"));
}

}  // namespace gridrestore::fixtures
