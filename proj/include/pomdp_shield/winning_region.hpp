#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pomdp_shield/pomdp.hpp"

namespace pomdp_shield {

// Per-observation antichains of belief supports known to be winning. Entries are
// append-only with stable 1-based indices: encodings reference entries by index across
// solver scopes, so an entry subsumed by a later superset is tombstoned, never removed,
// and its index is never reused.
class WinningRegionStore {
 public:
  struct Entry {
    Bitset support;
    bool tombstoned = false;
  };

  struct InsertOutcome {
    bool added = false;
    uint32_t index = 0;  // 1-based when added
  };

  WinningRegionStore() = default;

  WinningRegionStore(uint32_t num_observations, uint32_t num_states)
      : num_states_(num_states), entries_(num_observations) {}

  // Seed region: per observation the REACH-restriction, where nonempty. These supports
  // are winning because REACH states are absorbing.
  static WinningRegionStore from_reach(Pomdp const& pomdp, Specification const& spec) {
    WinningRegionStore store(pomdp.num_observations(), pomdp.num_states());
    for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
      Bitset restriction = pomdp.states_with_observation(z) & spec.reach;
      if (restriction.any()) {
        store.insert(z, restriction);
      }
    }
    return store;
  }

  uint32_t num_observations() const { return static_cast<uint32_t>(entries_.size()); }
  uint32_t num_states() const { return num_states_; }

  // Lets a store built for a base model accept entries for observations introduced
  // later (explicit shortcut sinks).
  void ensure_observation(uint32_t observation) {
    if (observation >= entries_.size()) {
      entries_.resize(observation + 1);
    }
  }

  InsertOutcome insert(uint32_t observation, Bitset const& support) {
    if (support.none()) {
      throw ModelError("refusing to insert empty support");
    }
    ensure_observation(observation);
    auto& column = entries_[observation];
    for (auto const& entry : column) {
      if (!entry.tombstoned && support.is_subset_of(entry.support)) {
        return InsertOutcome{false, 0};
      }
    }
    for (auto& entry : column) {
      if (!entry.tombstoned && entry.support.is_subset_of(support)) {
        entry.tombstoned = true;
        ++tombstones_;
      }
    }
    column.push_back(Entry{support, false});
    return InsertOutcome{true, static_cast<uint32_t>(column.size())};
  }

  bool is_winning(uint32_t observation, Bitset const& support) const {
    if (observation >= entries_.size()) {
      return false;
    }
    for (auto const& entry : entries_[observation]) {
      if (!entry.tombstoned && support.is_subset_of(entry.support)) {
        return true;
      }
    }
    return false;
  }

  bool is_winning(Pomdp const& pomdp, Bitset const& support) const {
    return is_winning(observation_of_support(pomdp, support), support);
  }

  // Total number of appended entries for an observation; tombstoned entries count
  // because indices stay referenced.
  uint32_t entry_count(uint32_t observation) const {
    return observation < entries_.size() ? static_cast<uint32_t>(entries_[observation].size()) : 0;
  }

  Entry const& entry(uint32_t observation, uint32_t index_1based) const {
    return entries_[observation].at(index_1based - 1);
  }

  std::vector<Bitset> live_entries(uint32_t observation) const {
    std::vector<Bitset> result;
    if (observation < entries_.size()) {
      for (auto const& entry : entries_[observation]) {
        if (!entry.tombstoned) {
          result.push_back(entry.support);
        }
      }
    }
    return result;
  }

  bool has_live_entry(uint32_t observation) const {
    if (observation >= entries_.size()) {
      return false;
    }
    for (auto const& entry : entries_[observation]) {
      if (!entry.tombstoned) {
        return true;
      }
    }
    return false;
  }

  uint32_t live_count() const {
    uint32_t n = 0;
    for (auto const& column : entries_) {
      for (auto const& entry : column) {
        if (!entry.tombstoned) {
          ++n;
        }
      }
    }
    return n;
  }

  uint32_t tombstone_count() const { return tombstones_; }

  // Union of all live entry states.
  Bitset flatten() const {
    Bitset result(num_states_);
    for (auto const& column : entries_) {
      for (auto const& entry : column) {
        if (!entry.tombstoned) {
          result |= entry.support;
        }
      }
    }
    return result;
  }

  // Approximate number of covered supports: sum over live entries of 2^|X| - 1.
  // Overlaps between incomparable entries are counted twice; this is a reporting
  // metric, not a set cardinality.
  double size_estimate() const {
    double total = 0.0;
    for (auto const& column : entries_) {
      for (auto const& entry : column) {
        if (!entry.tombstoned) {
          total += std::ldexp(1.0, static_cast<int>(entry.support.count())) - 1.0;
        }
      }
    }
    return total;
  }

 private:
  uint32_t num_states_ = 0;
  uint32_t tombstones_ = 0;
  std::vector<std::vector<Entry>> entries_;
};

// Two stores cover the same supports iff their live antichains agree per observation.
inline bool region_equals(WinningRegionStore const& a, WinningRegionStore const& b) {
  uint32_t n = std::max(a.num_observations(), b.num_observations());
  for (uint32_t z = 0; z < n; ++z) {
    auto left = a.live_entries(z);
    auto right = b.live_entries(z);
    std::sort(left.begin(), left.end());
    std::sort(right.begin(), right.end());
    if (left != right) {
      return false;
    }
  }
  return true;
}

// Region file format: one line per live entry, "win <observation> <state> <state> ...".
inline void save_region(std::ostream& out, Pomdp const& pomdp, WinningRegionStore const& store) {
  for (uint32_t z = 0; z < store.num_observations(); ++z) {
    for (auto const& support : store.live_entries(z)) {
      out << "win " << pomdp.observation_names[z];
      for (uint32_t s : support) {
        out << " " << s;
      }
      out << "\n";
    }
  }
}

inline WinningRegionStore load_region(std::istream& in, Pomdp const& pomdp) {
  WinningRegionStore store(pomdp.num_observations(), pomdp.num_states());
  std::map<std::string, uint32_t> observation_index;
  for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
    observation_index.emplace(pomdp.observation_names[z], z);
  }
  std::string line;
  uint32_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    std::istringstream tokens(line);
    std::string keyword;
    if (!(tokens >> keyword)) {
      continue;
    }
    if (keyword != "win") {
      throw ModelError("region line " + std::to_string(line_no) + ": unknown directive");
    }
    std::string obs_name;
    if (!(tokens >> obs_name)) {
      throw ModelError("region line " + std::to_string(line_no) + ": missing observation");
    }
    auto it = observation_index.find(obs_name);
    if (it == observation_index.end()) {
      throw ModelError("region line " + std::to_string(line_no) + ": unknown observation " +
                       obs_name);
    }
    Bitset support(pomdp.num_states());
    long long s = 0;
    while (tokens >> s) {
      if (s < 0 || s >= pomdp.num_states()) {
        throw ModelError("region line " + std::to_string(line_no) + ": state out of range");
      }
      if (pomdp.observation_of[static_cast<uint32_t>(s)] != it->second) {
        throw ModelError("region line " + std::to_string(line_no) +
                         ": state does not carry the entry's observation");
      }
      support.set(static_cast<uint32_t>(s));
    }
    if (support.none()) {
      throw ModelError("region line " + std::to_string(line_no) + ": empty entry");
    }
    store.insert(it->second, support);
  }
  return store;
}

// Actions of obs(b) whose every successor support stays covered by the region.
inline std::vector<uint32_t> shield_allowed(Pomdp const& pomdp, WinningRegionStore const& store,
                                            BeliefSupport const& b) {
  uint32_t z = observation_of_support(pomdp, b);
  std::vector<uint32_t> allowed;
  for (uint32_t action : pomdp.enabled_actions_of_observation(z)) {
    bool good = true;
    for (auto const& successor : support_update(pomdp, b, action)) {
      if (!store.is_winning(pomdp, successor)) {
        good = false;
        break;
      }
    }
    if (good) {
      allowed.push_back(action);
    }
  }
  return allowed;
}

// Runtime shield: restricts the offered actions to those keeping the tracked support
// inside the region. safety_only drops the productivity expectation: with a merely
// deadlock-free region the shield still guarantees avoid-freedom, not reachability.
struct Shield {
  Pomdp const* pomdp = nullptr;
  Specification const* spec = nullptr;
  WinningRegionStore const* region = nullptr;
  bool safety_only = false;

  std::vector<uint32_t> allowed(BeliefSupport const& b) const {
    return shield_allowed(*pomdp, *region, b);
  }
};

// Every live entry keeps at least one fully covered action.
inline bool is_deadlock_free(Pomdp const& pomdp, WinningRegionStore const& store) {
  for (uint32_t z = 0; z < store.num_observations(); ++z) {
    for (auto const& entry : store.live_entries(z)) {
      if (shield_allowed(pomdp, store, entry).empty()) {
        return false;
      }
    }
  }
  return true;
}

// Every live entry can reach a support inside REACH along covered supports, using only
// actions whose entire successor bundle stays covered. Explores the support graph
// spanned by the region entries under shield-allowed actions.
inline bool is_productive(Pomdp const& pomdp, Specification const& spec,
                          WinningRegionStore const& store, uint64_t node_cap = 1u << 20) {
  std::unordered_map<Bitset, uint32_t, BitsetHash> index;
  std::vector<Bitset> nodes;
  std::vector<std::vector<uint32_t>> forward;  // successors via allowed actions
  std::vector<uint32_t> entry_nodes;

  auto intern = [&](Bitset const& support) -> uint32_t {
    auto it = index.find(support);
    if (it != index.end()) {
      return it->second;
    }
    if (nodes.size() >= node_cap) {
      throw BudgetExceeded("productivity check exceeded node cap");
    }
    uint32_t id = static_cast<uint32_t>(nodes.size());
    index.emplace(support, id);
    nodes.push_back(support);
    forward.emplace_back();
    return id;
  };

  for (uint32_t z = 0; z < store.num_observations(); ++z) {
    for (auto const& entry : store.live_entries(z)) {
      entry_nodes.push_back(intern(entry));
    }
  }
  for (uint32_t id = 0; id < nodes.size(); ++id) {
    Bitset support = nodes[id];
    if (support.is_subset_of(spec.reach)) {
      continue;  // lifted REACH, absorbing for this purpose
    }
    for (uint32_t action : shield_allowed(pomdp, store, support)) {
      for (auto const& successor : support_update(pomdp, support, action)) {
        uint32_t succ_id = intern(successor);  // may grow the node tables
        forward[id].push_back(succ_id);
      }
    }
  }
  // Backward reachability from lifted-REACH supports.
  std::vector<bool> productive(nodes.size(), false);
  bool changed = true;
  while (changed) {
    changed = false;
    for (uint32_t id = 0; id < nodes.size(); ++id) {
      if (productive[id]) {
        continue;
      }
      if (nodes[id].is_subset_of(spec.reach)) {
        productive[id] = true;
        changed = true;
        continue;
      }
      for (uint32_t succ : forward[id]) {
        if (productive[succ]) {
          productive[id] = true;
          changed = true;
          break;
        }
      }
    }
  }
  for (uint32_t id : entry_nodes) {
    if (!productive[id]) {
      return false;
    }
  }
  return true;
}

}  // namespace pomdp_shield
