#pragma once

#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include "pomdp_shield/pomdp.hpp"
#include "pomdp_shield/winning_region.hpp"

namespace pomdp_shield {

// Weight-free view of an MDP; enough for the qualitative analyses used here. Serves
// both the POMDP treated as fully observable and the explicit belief-support MDP.
struct MdpGraph {
  struct ActionRow {
    uint32_t action;
    std::vector<uint32_t> succ;
  };

  std::vector<std::vector<ActionRow>> nodes;

  uint32_t num_nodes() const { return static_cast<uint32_t>(nodes.size()); }

  static MdpGraph from_pomdp(Pomdp const& pomdp) {
    MdpGraph graph;
    graph.nodes.resize(pomdp.num_states());
    for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
      for (auto const& row : pomdp.rows[s]) {
        ActionRow arow;
        arow.action = row.action;
        arow.succ.reserve(row.entries.size());
        for (auto const& entry : row.entries) {
          arow.succ.push_back(entry.successor);
        }
        graph.nodes[s].push_back(std::move(arow));
      }
    }
    return graph;
  }
};

// Greatest set X disjoint from avoid such that every node of X has an action whose
// successors all stay in X: the nodes from which some policy surely avoids avoid.
inline Bitset mdp_safe_states(MdpGraph const& graph, Bitset const& avoid) {
  Bitset safe = avoid.complement();
  bool changed = true;
  while (changed) {
    changed = false;
    for (uint32_t n : safe) {
      bool has_safe_action = false;
      for (auto const& row : graph.nodes[n]) {
        bool inside = true;
        for (uint32_t succ : row.succ) {
          if (!safe.get(succ)) {
            inside = false;
            break;
          }
        }
        if (inside) {
          has_safe_action = true;
          break;
        }
      }
      if (!has_safe_action) {
        safe.set(n, false);
        changed = true;
      }
    }
  }
  return safe;
}

enum class PolicyQuantifier { exists, for_all };

namespace detail {

// Least fixpoint of "target or some action with all successors in candidate and at
// least one successor already marked".
inline Bitset almost_sure_reach_exists(MdpGraph const& graph, Bitset const& target) {
  Bitset candidate(graph.num_nodes(), true);
  while (true) {
    Bitset marked = target & candidate;
    bool grew = true;
    while (grew) {
      grew = false;
      for (uint32_t n = 0; n < graph.num_nodes(); ++n) {
        if (marked.get(n) || !candidate.get(n)) {
          continue;
        }
        for (auto const& row : graph.nodes[n]) {
          bool inside = true;
          bool touches = false;
          for (uint32_t succ : row.succ) {
            if (!candidate.get(succ)) {
              inside = false;
              break;
            }
            if (marked.get(succ)) {
              touches = true;
            }
          }
          if (inside && touches) {
            marked.set(n);
            grew = true;
            break;
          }
        }
      }
    }
    if (marked == candidate) {
      return candidate;
    }
    candidate = marked;
  }
}

// Nodes from which every policy reaches target almost-surely: the complement of the
// nodes that can, before touching target, reach the set from which target is surely
// avoidable.
inline Bitset almost_sure_reach_for_all(MdpGraph const& graph, Bitset const& target) {
  Bitset can_avoid = mdp_safe_states(graph, target);
  Bitset bad = can_avoid;
  bool grew = true;
  while (grew) {
    grew = false;
    for (uint32_t n = 0; n < graph.num_nodes(); ++n) {
      if (bad.get(n) || target.get(n)) {
        continue;
      }
      for (auto const& row : graph.nodes[n]) {
        for (uint32_t succ : row.succ) {
          if (bad.get(succ)) {
            bad.set(n);
            grew = true;
            break;
          }
        }
        if (bad.get(n)) {
          break;
        }
      }
    }
  }
  return bad.complement();
}

}  // namespace detail

inline Bitset mdp_almost_sure_reach(MdpGraph const& graph, Bitset const& target,
                                    PolicyQuantifier quantifier) {
  return quantifier == PolicyQuantifier::exists ? detail::almost_sure_reach_exists(graph, target)
                                                : detail::almost_sure_reach_for_all(graph, target);
}

// Explicit fragment of the belief-support MDP: deduplicated supports closed under
// support_update, with the lifted specification evaluated per node.
struct ExplicitBeliefSupportMdp {
  std::vector<Bitset> supports;
  std::unordered_map<Bitset, uint32_t, BitsetHash> index;
  MdpGraph graph;        // aligned with supports; action labels are POMDP action ids
  Bitset reach_lifted;   // over node ids
  Bitset avoid_lifted;   // over node ids

  uint32_t num_nodes() const { return static_cast<uint32_t>(supports.size()); }
};

inline ExplicitBeliefSupportMdp build_belief_support_mdp(Pomdp const& pomdp,
                                                         Specification const& spec,
                                                         std::vector<Bitset> const& seeds,
                                                         uint64_t node_cap = 1u << 20) {
  ExplicitBeliefSupportMdp mdp;
  std::deque<uint32_t> frontier;
  auto intern = [&](Bitset const& support) -> uint32_t {
    auto it = mdp.index.find(support);
    if (it != mdp.index.end()) {
      return it->second;
    }
    if (mdp.supports.size() >= node_cap) {
      throw BudgetExceeded("belief-support MDP exceeded node cap of " +
                           std::to_string(node_cap));
    }
    uint32_t id = static_cast<uint32_t>(mdp.supports.size());
    mdp.index.emplace(support, id);
    mdp.supports.push_back(support);
    mdp.graph.nodes.emplace_back();
    frontier.push_back(id);
    return id;
  };
  for (auto const& seed : seeds) {
    if (seed.any()) {
      intern(seed);
    }
  }
  while (!frontier.empty()) {
    uint32_t id = frontier.front();
    frontier.pop_front();
    Bitset support = mdp.supports[id];
    uint32_t z = observation_of_support(pomdp, support);
    for (uint32_t action : pomdp.enabled_actions_of_observation(z)) {
      MdpGraph::ActionRow row;
      row.action = action;
      for (auto const& successor : support_update(pomdp, support, action)) {
        uint32_t succ_id = intern(successor);  // may grow the tables
        row.succ.push_back(succ_id);
      }
      mdp.graph.nodes[id].push_back(std::move(row));
    }
  }
  LiftedSpecification lifted{&spec};
  mdp.reach_lifted = Bitset(mdp.num_nodes());
  mdp.avoid_lifted = Bitset(mdp.num_nodes());
  for (uint32_t id = 0; id < mdp.num_nodes(); ++id) {
    if (lifted.reach_lifted(mdp.supports[id])) {
      mdp.reach_lifted.set(id);
    }
    if (lifted.avoid_lifted(mdp.supports[id])) {
      mdp.avoid_lifted.set(id);
    }
  }
  return mdp;
}

// Every nonempty observation-uniform support. Throws BudgetExceeded if the total count
// passes the cap; feasible only while observations stay small.
inline std::vector<Bitset> enumerate_all_supports(Pomdp const& pomdp, uint64_t cap = 1u << 20) {
  uint64_t total = 0;
  std::vector<std::vector<uint32_t>> members(pomdp.num_observations());
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    members[pomdp.observation_of[s]].push_back(s);
  }
  for (auto const& group : members) {
    if (group.size() >= 40) {
      throw BudgetExceeded("observation with " + std::to_string(group.size()) +
                           " states is too large to enumerate");
    }
    total += (1ull << group.size()) - 1;
    if (total > cap) {
      throw BudgetExceeded("support enumeration exceeded cap of " + std::to_string(cap));
    }
  }
  std::vector<Bitset> result;
  result.reserve(total);
  for (auto const& group : members) {
    if (group.empty()) {
      continue;
    }
    for (uint64_t mask = 1; mask < (1ull << group.size()); ++mask) {
      Bitset support(pomdp.num_states());
      for (std::size_t i = 0; i < group.size(); ++i) {
        if (mask & (1ull << i)) {
          support.set(group[i]);
        }
      }
      result.push_back(std::move(support));
    }
  }
  return result;
}

// Ground-truth solver for the maximal winning region: enumerate the full belief-support
// MDP, keep the supports from which some policy surely avoids lifted AVOID, and within
// that substructure reaches lifted REACH almost-surely.
inline WinningRegionStore maximal_winning_region(Pomdp const& pomdp, Specification const& spec,
                                                 uint64_t node_cap = 1u << 20) {
  auto seeds = enumerate_all_supports(pomdp, node_cap);
  ExplicitBeliefSupportMdp mdp = build_belief_support_mdp(pomdp, spec, seeds, node_cap);
  Bitset safe = mdp_safe_states(mdp.graph, mdp.avoid_lifted);
  MdpGraph restricted;
  restricted.nodes.resize(mdp.num_nodes());
  for (uint32_t id : safe) {
    for (auto const& row : mdp.graph.nodes[id]) {
      bool inside = true;
      for (uint32_t succ : row.succ) {
        if (!safe.get(succ)) {
          inside = false;
          break;
        }
      }
      if (inside) {
        restricted.nodes[id].push_back(row);
      }
    }
  }
  Bitset winning =
      mdp_almost_sure_reach(restricted, mdp.reach_lifted & safe, PolicyQuantifier::exists) & safe;
  WinningRegionStore store(pomdp.num_observations(), pomdp.num_states());
  for (uint32_t id : winning) {
    store.insert(observation_of_support(pomdp, mdp.supports[id]), mdp.supports[id]);
  }
  return store;
}

// Graph-based preprocessing: grows the store without solver calls and stays sound.
// Alternates two steps until fixpoint:
//  - Supports of states from which every policy almost-surely reaches a state whose
//    full observation support is already covered. Any policy from such states stays
//    avoid-free, and once a covered observation is seen the tracked support is inside
//    a covered entry, so uniform play followed by that entry's policy wins.
//  - Full observation supports with an action whose every successor support is already
//    covered; the successor supports carry pairwise distinct observations, so their
//    entry policies compose.
inline WinningRegionStore winning_observations_fixpoint(Pomdp const& pomdp,
                                                        Specification const& spec,
                                                        WinningRegionStore win) {
  MdpGraph graph = MdpGraph::from_pomdp(pomdp);
  std::vector<Bitset> full_supports(pomdp.num_observations());
  for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
    full_supports[z] = pomdp.states_with_observation(z);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    Bitset covered_observation_states(pomdp.num_states());
    for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
      if (full_supports[z].any() && win.is_winning(z, full_supports[z])) {
        covered_observation_states |= full_supports[z];
      }
    }
    Bitset forced =
        mdp_almost_sure_reach(graph, covered_observation_states, PolicyQuantifier::for_all);
    for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
      Bitset restriction = forced & full_supports[z];
      if (restriction.any() && win.insert(z, restriction).added) {
        changed = true;
      }
    }
    for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
      if (full_supports[z].none() || win.is_winning(z, full_supports[z])) {
        continue;
      }
      for (uint32_t action : pomdp.enabled_actions_of_observation(z)) {
        bool all_covered = true;
        for (auto const& successor : support_update(pomdp, full_supports[z], action)) {
          if (!win.is_winning(pomdp, successor)) {
            all_covered = false;
            break;
          }
        }
        if (all_covered) {
          win.insert(z, full_supports[z]);
          changed = true;
          break;
        }
      }
    }
  }
  return win;
}

}  // namespace pomdp_shield
