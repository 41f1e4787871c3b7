#ifndef GRIDRESTORE_FEEDER_HPP_
#define GRIDRESTORE_FEEDER_HPP_

// Static feeder description: buses, branches, switches, loads, DERs and the
// fixed partition into microgrid regions. Loaded from a strict JSON document.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gridrestore/errors.hpp"

namespace gridrestore {

enum class SwitchState { Open, Closed };

inline const char* to_string(SwitchState s) {
  return s == SwitchState::Open ? "Open" : "Closed";
}

struct Bus {
  std::string id;
  double base_kv = 0.0;
  bool is_source = false;
  bool operator==(const Bus&) const = default;
};

struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double r_pu = 0.0;
  double x_pu = 0.0;
  double s_max_pu = 0.0;
  std::optional<std::string> switch_id;
  bool operator==(const Branch&) const = default;
};

struct Switch {
  std::string id;
  std::string branch_id;
  SwitchState state = SwitchState::Open;
  int owner_microgrid = 0;
  bool operator==(const Switch&) const = default;
};

struct Load {
  std::string id;
  std::string bus_id;
  double p_demand_kw = 0.0;
  double q_demand_kvar = 0.0;
  int priority = 1;
  bool operator==(const Load&) const = default;
};

struct Der {
  std::string id;
  std::string bus_id;
  double p_min_kw = 0.0;
  double p_max_kw = 0.0;
  double q_min_kvar = 0.0;
  double q_max_kvar = 0.0;
  int owner_microgrid = 0;
  bool operator==(const Der&) const = default;
};

struct MicrogridRegion {
  int index = 0;
  std::vector<std::string> bus_ids;
  std::vector<std::string> switch_ids;
  std::vector<std::string> load_ids;
  std::vector<std::string> der_ids;
  bool operator==(const MicrogridRegion&) const = default;
};

// Sorted bus indices of one connected component.
using IslandSet = std::vector<int>;

// Switch states aligned with FeederGraph::switches.
using SwitchStates = std::vector<SwitchState>;

class FeederGraph {
 public:
  double s_base_kva = 1000.0;
  double p_gen_cap_kw = 2400.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Switch> switches;
  std::vector<Load> loads;
  std::vector<Der> ders;
  std::vector<MicrogridRegion> microgrids;

  bool operator==(const FeederGraph& other) const {
    return s_base_kva == other.s_base_kva &&
           p_gen_cap_kw == other.p_gen_cap_kw && buses == other.buses &&
           branches == other.branches && switches == other.switches &&
           loads == other.loads && ders == other.ders &&
           microgrids == other.microgrids;
  }

  // Index tables derived from the element lists. Rebuilt by build_index().
  struct Index {
    std::unordered_map<std::string, int> bus, branch, sw, load, der;
    std::vector<int> branch_from, branch_to;
    std::vector<int> branch_switch;  // -1 for fixed branches
    std::vector<int> switch_branch;
    std::vector<int> load_bus, der_bus;
    std::vector<int> bus_region;     // -1 when no regions are declared
    std::vector<int> load_region, der_region, branch_region;
    int source_count = 0;
  };

  const Index& index() const { return index_; }

  int bus_index(const std::string& id) const { return lookup(index_.bus, id, "bus"); }
  int branch_index(const std::string& id) const { return lookup(index_.branch, id, "branch"); }
  int switch_index(const std::string& id) const { return lookup(index_.sw, id, "switch"); }
  int load_index(const std::string& id) const { return lookup(index_.load, id, "load"); }
  int der_index(const std::string& id) const { return lookup(index_.der, id, "der"); }

  std::size_t num_agents() const { return microgrids.size(); }

  SwitchStates states_from_file() const {
    SwitchStates out;
    out.reserve(switches.size());
    for (const auto& s : switches) out.push_back(s.state);
    return out;
  }

  SwitchStates all(SwitchState state) const {
    return SwitchStates(switches.size(), state);
  }

  double total_demand_kw() const {
    double total = 0.0;
    for (const auto& l : loads) total += l.p_demand_kw;
    return total;
  }

  // Populates index tables; throws ValidationError on dangling references.
  void build_index();

 private:
  static int lookup(const std::unordered_map<std::string, int>& map,
                    const std::string& id, const char* kind) {
    auto it = map.find(id);
    if (it == map.end()) {
      throw ValidationError(std::string("unknown ") + kind + " id '" + id + "'");
    }
    return it->second;
  }

  Index index_;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& context,
                       std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object()) throw ParseError(context + ": expected an object");
  for (const char* key : required) {
    if (!obj.contains(key)) {
      throw ParseError(context + ": missing key '" + key + "'");
    }
  }
  for (const auto& item : obj.items()) {
    const bool known =
        std::any_of(required.begin(), required.end(),
                    [&](const char* k) { return item.key() == k; }) ||
        std::any_of(optional.begin(), optional.end(),
                    [&](const char* k) { return item.key() == k; });
    if (!known) {
      throw ParseError(context + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
T get_field(const json& obj, const char* key, const std::string& context) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(context + ": bad value for '" + key + "': " + e.what());
  }
}

inline SwitchState parse_state(const std::string& text, const std::string& context) {
  if (text == "Open") return SwitchState::Open;
  if (text == "Closed") return SwitchState::Closed;
  throw ParseError(context + ": switch state must be Open or Closed, got '" + text + "'");
}

inline std::vector<std::string> get_ids(const json& obj, const char* key,
                                        const std::string& context) {
  return get_field<std::vector<std::string>>(obj, key, context);
}

inline const json& get_array(const json& doc, const char* key) {
  const auto& arr = doc.at(key);
  if (!arr.is_array()) throw ParseError(std::string("'") + key + "' must be an array");
  return arr;
}

}  // namespace detail

inline void FeederGraph::build_index() {
  Index idx;
  auto add = [](std::unordered_map<std::string, int>& map, const std::string& id,
                int i, const char* kind) {
    if (!map.emplace(id, i).second) {
      throw ValidationError(std::string("duplicate ") + kind + " id '" + id + "'");
    }
  };
  for (int i = 0; i < static_cast<int>(buses.size()); ++i) add(idx.bus, buses[i].id, i, "bus");
  for (int i = 0; i < static_cast<int>(branches.size()); ++i) add(idx.branch, branches[i].id, i, "branch");
  for (int i = 0; i < static_cast<int>(switches.size()); ++i) add(idx.sw, switches[i].id, i, "switch");
  for (int i = 0; i < static_cast<int>(loads.size()); ++i) add(idx.load, loads[i].id, i, "load");
  for (int i = 0; i < static_cast<int>(ders.size()); ++i) add(idx.der, ders[i].id, i, "der");

  auto find = [](const std::unordered_map<std::string, int>& map, const std::string& id,
                 const std::string& who) {
    auto it = map.find(id);
    if (it == map.end()) throw ValidationError(who + " references unknown id '" + id + "'");
    return it->second;
  };

  idx.branch_switch.assign(branches.size(), -1);
  for (const auto& br : branches) {
    idx.branch_from.push_back(find(idx.bus, br.from_bus, "branch '" + br.id + "'"));
    idx.branch_to.push_back(find(idx.bus, br.to_bus, "branch '" + br.id + "'"));
  }
  for (std::size_t s = 0; s < switches.size(); ++s) {
    const auto& sw = switches[s];
    const int b = find(idx.branch, sw.branch_id, "switch '" + sw.id + "'");
    if (idx.branch_switch[b] != -1) {
      throw ValidationError("branch '" + branches[b].id + "' has more than one switch");
    }
    if (branches[b].switch_id != sw.id) {
      throw ValidationError("switch '" + sw.id + "' and branch '" + branches[b].id +
                            "' disagree on switch_id");
    }
    idx.branch_switch[b] = static_cast<int>(s);
    idx.switch_branch.push_back(b);
  }
  for (std::size_t b = 0; b < branches.size(); ++b) {
    if (branches[b].switch_id && idx.branch_switch[b] == -1) {
      throw ValidationError("branch '" + branches[b].id + "' references switch '" +
                            *branches[b].switch_id + "' that does not point back to it");
    }
  }
  for (const auto& l : loads) idx.load_bus.push_back(find(idx.bus, l.bus_id, "load '" + l.id + "'"));
  for (const auto& d : ders) idx.der_bus.push_back(find(idx.bus, d.bus_id, "der '" + d.id + "'"));

  idx.bus_region.assign(buses.size(), -1);
  for (const auto& region : microgrids) {
    for (const auto& id : region.bus_ids) {
      const int b = find(idx.bus, id, "microgrid " + std::to_string(region.index));
      if (idx.bus_region[b] == -1) idx.bus_region[b] = region.index;
    }
  }
  for (int b : idx.load_bus) idx.load_region.push_back(idx.bus_region[b]);
  for (const auto& d : ders) idx.der_region.push_back(d.owner_microgrid);
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const int s = idx.branch_switch[b];
    idx.branch_region.push_back(s >= 0 ? switches[s].owner_microgrid
                                       : idx.bus_region[idx.branch_from[b]]);
  }
  idx.source_count = static_cast<int>(
      std::count_if(buses.begin(), buses.end(), [](const Bus& b) { return b.is_source; }));
  index_ = std::move(idx);
}

namespace detail {

// Minimal union-find used for islanding.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

}  // namespace detail

inline bool branch_in_service(const FeederGraph& graph, std::size_t branch,
                              const SwitchStates& states) {
  const int s = graph.index().branch_switch[branch];
  return s < 0 || states[s] == SwitchState::Closed;
}

// Partition of all buses into islands. Branches behind an Open switch are
// absent; fixed branches are always present. Islands are ordered by their
// smallest bus index and each island is sorted.
inline std::vector<IslandSet> connected_components(const FeederGraph& graph,
                                                   const SwitchStates& states) {
  if (states.size() != graph.switches.size()) {
    throw DimensionMismatch("switch state vector has " + std::to_string(states.size()) +
                            " entries, feeder has " +
                            std::to_string(graph.switches.size()) + " switches");
  }
  const auto& idx = graph.index();
  detail::DisjointSets sets(graph.buses.size());
  for (std::size_t b = 0; b < graph.branches.size(); ++b) {
    if (branch_in_service(graph, b, states)) sets.unite(idx.branch_from[b], idx.branch_to[b]);
  }
  std::vector<int> slot(graph.buses.size(), -1);
  std::vector<IslandSet> islands;
  for (int bus = 0; bus < static_cast<int>(graph.buses.size()); ++bus) {
    const int root = sets.find(bus);
    if (slot[root] == -1) {
      slot[root] = static_cast<int>(islands.size());
      islands.emplace_back();
    }
    islands[slot[root]].push_back(bus);
  }
  return islands;
}

// Confirms the microgrid regions partition the bus set and own disjoint,
// non-empty switch sets. A feeder with no regions declared passes trivially
// provided nothing claims ownership.
inline void validate_partition(const FeederGraph& graph) {
  const auto& regions = graph.microgrids;
  const int n = static_cast<int>(regions.size());
  auto fail = [](int region, const std::string& what) {
    throw ValidationError("microgrid " + std::to_string(region) + ": " + what);
  };
  for (int r = 0; r < n; ++r) {
    if (regions[r].index != r) fail(regions[r].index, "indices must be 0..N-1 in order");
  }
  for (const auto& sw : graph.switches) {
    if (sw.owner_microgrid < 0 || sw.owner_microgrid >= n) {
      throw ValidationError("switch '" + sw.id + "' has invalid owner_microgrid " +
                            std::to_string(sw.owner_microgrid));
    }
  }
  for (const auto& d : graph.ders) {
    if (d.owner_microgrid < 0 || d.owner_microgrid >= n) {
      throw ValidationError("der '" + d.id + "' has invalid owner_microgrid " +
                            std::to_string(d.owner_microgrid));
    }
  }
  if (n == 0) return;

  std::vector<int> bus_owner(graph.buses.size(), -1);
  std::set<std::string> seen_switches;
  for (const auto& region : regions) {
    const int r = region.index;
    if (region.switch_ids.empty()) fail(r, "owns no switches");
    if (region.load_ids.empty()) fail(r, "owns no loads");
    for (const auto& id : region.bus_ids) {
      const auto it = graph.index().bus.find(id);
      if (it == graph.index().bus.end()) fail(r, "unknown bus '" + id + "'");
      if (bus_owner[it->second] != -1) {
        fail(r, "bus '" + id + "' already belongs to microgrid " +
                    std::to_string(bus_owner[it->second]));
      }
      bus_owner[it->second] = r;
    }
    for (const auto& id : region.switch_ids) {
      if (!seen_switches.insert(id).second) fail(r, "switch '" + id + "' owned twice");
      const auto it = graph.index().sw.find(id);
      if (it == graph.index().sw.end()) fail(r, "unknown switch '" + id + "'");
      if (graph.switches[it->second].owner_microgrid != r) {
        fail(r, "lists switch '" + id + "' whose owner_microgrid is " +
                    std::to_string(graph.switches[it->second].owner_microgrid));
      }
    }
    for (const auto& id : region.load_ids) {
      const auto it = graph.index().load.find(id);
      if (it == graph.index().load.end()) fail(r, "unknown load '" + id + "'");
      const int bus = graph.index().load_bus[it->second];
      if (std::find(region.bus_ids.begin(), region.bus_ids.end(), graph.buses[bus].id) ==
          region.bus_ids.end()) {
        fail(r, "load '" + id + "' sits outside the region's buses");
      }
    }
    for (const auto& id : region.der_ids) {
      const auto it = graph.index().der.find(id);
      if (it == graph.index().der.end()) fail(r, "unknown der '" + id + "'");
      if (graph.ders[it->second].owner_microgrid != r) {
        fail(r, "lists der '" + id + "' owned by another microgrid");
      }
    }
  }
  for (std::size_t b = 0; b < bus_owner.size(); ++b) {
    if (bus_owner[b] == -1) {
      throw ValidationError("bus '" + graph.buses[b].id + "' belongs to no microgrid");
    }
  }
  for (const auto& sw : graph.switches) {
    if (!seen_switches.count(sw.id)) {
      throw ValidationError("switch '" + sw.id + "' is not listed by microgrid " +
                            std::to_string(sw.owner_microgrid));
    }
  }
  const auto& idx = graph.index();
  for (std::size_t l = 0; l < graph.loads.size(); ++l) {
    const int r = bus_owner[idx.load_bus[l]];
    const auto& ids = regions[r].load_ids;
    if (std::find(ids.begin(), ids.end(), graph.loads[l].id) == ids.end()) {
      fail(r, "does not list load '" + graph.loads[l].id + "' on its bus");
    }
  }
  for (std::size_t d = 0; d < graph.ders.size(); ++d) {
    const auto& der = graph.ders[d];
    const auto& ids = regions[der.owner_microgrid].der_ids;
    if (std::find(ids.begin(), ids.end(), der.id) == ids.end()) {
      fail(der.owner_microgrid, "does not list its der '" + der.id + "'");
    }
    if (bus_owner[idx.der_bus[d]] != der.owner_microgrid) {
      fail(der.owner_microgrid, "der '" + der.id + "' sits on a bus of another microgrid");
    }
  }
}

// Checks every element invariant, then connectivity and the partition.
inline void validate_feeder(FeederGraph& graph) {
  if (!(graph.s_base_kva > 0)) throw ValidationError("s_base_kva must be > 0");
  if (!(graph.p_gen_cap_kw > 0)) throw ValidationError("p_gen_cap_kw must be > 0");
  if (graph.buses.empty()) throw ValidationError("feeder has no buses");
  graph.build_index();
  for (const auto& b : graph.buses) {
    if (!(b.base_kv > 0)) throw ValidationError("bus '" + b.id + "': base_kv must be > 0");
  }
  for (const auto& br : graph.branches) {
    const std::string who = "branch '" + br.id + "'";
    if (br.from_bus == br.to_bus) throw ValidationError(who + ": from_bus equals to_bus");
    if (br.r_pu < 0 || br.x_pu < 0) throw ValidationError(who + ": negative impedance");
    if (br.r_pu == 0 && br.x_pu == 0) throw ValidationError(who + ": zero impedance");
    if (!(br.s_max_pu > 0)) throw ValidationError(who + ": s_max_pu must be > 0");
  }
  for (const auto& l : graph.loads) {
    const std::string who = "load '" + l.id + "'";
    if (l.p_demand_kw < 0) throw ValidationError(who + ": p_demand_kw must be >= 0");
    if (l.priority < 1 || l.priority > 10) throw ValidationError(who + ": priority outside 1..10");
  }
  for (const auto& d : graph.ders) {
    const std::string who = "der '" + d.id + "'";
    if (d.p_min_kw < 0) throw ValidationError(who + ": p_min_kw must be >= 0");
    if (d.p_min_kw > d.p_max_kw) throw ValidationError(who + ": p_min_kw > p_max_kw");
    if (d.q_min_kvar > d.q_max_kvar) throw ValidationError(who + ": q_min_kvar > q_max_kvar");
  }
  if (connected_components(graph, graph.all(SwitchState::Closed)).size() != 1) {
    throw ValidationError("feeder is not connected with all switches closed");
  }
  validate_partition(graph);
}

inline FeederGraph parse_feeder(const nlohmann::json& doc) {
  using detail::get_field;
  detail::check_keys(doc, "feeder",
                     {"s_base_kva", "p_gen_cap_kw", "buses", "branches", "switches",
                      "loads", "ders", "microgrids"});
  FeederGraph g;
  g.s_base_kva = get_field<double>(doc, "s_base_kva", "feeder");
  g.p_gen_cap_kw = get_field<double>(doc, "p_gen_cap_kw", "feeder");
  for (const auto& j : detail::get_array(doc, "buses")) {
    const std::string ctx = "bus";
    detail::check_keys(j, ctx, {"id", "base_kv"}, {"is_source"});
    Bus b;
    b.id = get_field<std::string>(j, "id", ctx);
    b.base_kv = get_field<double>(j, "base_kv", "bus '" + b.id + "'");
    b.is_source = j.contains("is_source") ? get_field<bool>(j, "is_source", ctx) : false;
    g.buses.push_back(std::move(b));
  }
  for (const auto& j : detail::get_array(doc, "branches")) {
    detail::check_keys(j, "branch", {"id", "from_bus", "to_bus", "r_pu", "x_pu", "s_max_pu"},
                       {"switch_id"});
    Branch br;
    br.id = get_field<std::string>(j, "id", "branch");
    const std::string ctx = "branch '" + br.id + "'";
    br.from_bus = get_field<std::string>(j, "from_bus", ctx);
    br.to_bus = get_field<std::string>(j, "to_bus", ctx);
    br.r_pu = get_field<double>(j, "r_pu", ctx);
    br.x_pu = get_field<double>(j, "x_pu", ctx);
    br.s_max_pu = get_field<double>(j, "s_max_pu", ctx);
    if (j.contains("switch_id") && !j.at("switch_id").is_null()) {
      br.switch_id = get_field<std::string>(j, "switch_id", ctx);
    }
    g.branches.push_back(std::move(br));
  }
  for (const auto& j : detail::get_array(doc, "switches")) {
    detail::check_keys(j, "switch", {"id", "branch_id", "state", "owner_microgrid"});
    Switch s;
    s.id = get_field<std::string>(j, "id", "switch");
    const std::string ctx = "switch '" + s.id + "'";
    s.branch_id = get_field<std::string>(j, "branch_id", ctx);
    s.state = detail::parse_state(get_field<std::string>(j, "state", ctx), ctx);
    s.owner_microgrid = get_field<int>(j, "owner_microgrid", ctx);
    g.switches.push_back(std::move(s));
  }
  for (const auto& j : detail::get_array(doc, "loads")) {
    detail::check_keys(j, "load", {"id", "bus_id", "p_demand_kw", "q_demand_kvar", "priority"});
    Load l;
    l.id = get_field<std::string>(j, "id", "load");
    const std::string ctx = "load '" + l.id + "'";
    l.bus_id = get_field<std::string>(j, "bus_id", ctx);
    l.p_demand_kw = get_field<double>(j, "p_demand_kw", ctx);
    l.q_demand_kvar = get_field<double>(j, "q_demand_kvar", ctx);
    l.priority = get_field<int>(j, "priority", ctx);
    g.loads.push_back(std::move(l));
  }
  for (const auto& j : detail::get_array(doc, "ders")) {
    detail::check_keys(j, "der", {"id", "bus_id", "p_min_kw", "p_max_kw", "q_min_kvar",
                                  "q_max_kvar", "owner_microgrid"});
    Der d;
    d.id = get_field<std::string>(j, "id", "der");
    const std::string ctx = "der '" + d.id + "'";
    d.bus_id = get_field<std::string>(j, "bus_id", ctx);
    d.p_min_kw = get_field<double>(j, "p_min_kw", ctx);
    d.p_max_kw = get_field<double>(j, "p_max_kw", ctx);
    d.q_min_kvar = get_field<double>(j, "q_min_kvar", ctx);
    d.q_max_kvar = get_field<double>(j, "q_max_kvar", ctx);
    d.owner_microgrid = get_field<int>(j, "owner_microgrid", ctx);
    g.ders.push_back(std::move(d));
  }
  for (const auto& j : detail::get_array(doc, "microgrids")) {
    detail::check_keys(j, "microgrid", {"index", "bus_ids", "switch_ids", "load_ids", "der_ids"});
    MicrogridRegion m;
    m.index = get_field<int>(j, "index", "microgrid");
    const std::string ctx = "microgrid " + std::to_string(m.index);
    m.bus_ids = detail::get_ids(j, "bus_ids", ctx);
    m.switch_ids = detail::get_ids(j, "switch_ids", ctx);
    m.load_ids = detail::get_ids(j, "load_ids", ctx);
    m.der_ids = detail::get_ids(j, "der_ids", ctx);
    g.microgrids.push_back(std::move(m));
  }
  validate_feeder(g);
  return g;
}

inline nlohmann::ordered_json serialize_feeder(const FeederGraph& g) {
  nlohmann::ordered_json doc;
  doc["s_base_kva"] = g.s_base_kva;
  doc["p_gen_cap_kw"] = g.p_gen_cap_kw;
  doc["buses"] = nlohmann::ordered_json::array();
  for (const auto& b : g.buses) {
    doc["buses"].push_back({{"id", b.id}, {"base_kv", b.base_kv}, {"is_source", b.is_source}});
  }
  doc["branches"] = nlohmann::ordered_json::array();
  for (const auto& br : g.branches) {
    nlohmann::ordered_json j = {{"id", br.id},     {"from_bus", br.from_bus},
                                {"to_bus", br.to_bus}, {"r_pu", br.r_pu},
                                {"x_pu", br.x_pu}, {"s_max_pu", br.s_max_pu}};
    if (br.switch_id) j["switch_id"] = *br.switch_id;
    doc["branches"].push_back(std::move(j));
  }
  doc["switches"] = nlohmann::ordered_json::array();
  for (const auto& s : g.switches) {
    doc["switches"].push_back({{"id", s.id},
                               {"branch_id", s.branch_id},
                               {"state", to_string(s.state)},
                               {"owner_microgrid", s.owner_microgrid}});
  }
  doc["loads"] = nlohmann::ordered_json::array();
  for (const auto& l : g.loads) {
    doc["loads"].push_back({{"id", l.id},
                            {"bus_id", l.bus_id},
                            {"p_demand_kw", l.p_demand_kw},
                            {"q_demand_kvar", l.q_demand_kvar},
                            {"priority", l.priority}});
  }
  doc["ders"] = nlohmann::ordered_json::array();
  for (const auto& d : g.ders) {
    doc["ders"].push_back({{"id", d.id},
                           {"bus_id", d.bus_id},
                           {"p_min_kw", d.p_min_kw},
                           {"p_max_kw", d.p_max_kw},
                           {"q_min_kvar", d.q_min_kvar},
                           {"q_max_kvar", d.q_max_kvar},
                           {"owner_microgrid", d.owner_microgrid}});
  }
  doc["microgrids"] = nlohmann::ordered_json::array();
  for (const auto& m : g.microgrids) {
    doc["microgrids"].push_back({{"index", m.index},
                                 {"bus_ids", m.bus_ids},
                                 {"switch_ids", m.switch_ids},
                                 {"load_ids", m.load_ids},
                                 {"der_ids", m.der_ids}});
  }
  return doc;
}

inline FeederGraph parse_feeder_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("feeder document is not valid JSON: ") + e.what());
  }
  return parse_feeder(doc);
}

// Resolves a bundled fixture name ("toy13") to its file; real paths pass through.
inline std::filesystem::path resolve_feeder_path(const std::string& name_or_path) {
  std::filesystem::path p(name_or_path);
  if (std::filesystem::exists(p)) return p;
#ifdef GRIDRESTORE_FIXTURE_DIR
  std::filesystem::path fixture = std::filesystem::path(GRIDRESTORE_FIXTURE_DIR) /
                                  (name_or_path + ".json");
  if (std::filesystem::exists(fixture)) return fixture;
#endif
  return p;
}

inline FeederGraph load_feeder(const std::string& name_or_path) {
  const auto path = resolve_feeder_path(name_or_path);
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open feeder file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_feeder_text(buffer.str());
}

}  // namespace gridrestore

#endif  // GRIDRESTORE_FEEDER_HPP_
