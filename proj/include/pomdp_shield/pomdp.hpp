#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "pomdp_shield/bitset.hpp"
#include "pomdp_shield/rational.hpp"
#include "pomdp_shield/util.hpp"

namespace pomdp_shield {

// A belief support is an observation-uniform, nonempty set of states.
using BeliefSupport = Bitset;

struct TransitionEntry {
  uint32_t successor;
  Rational weight;

  bool operator==(TransitionEntry const&) const = default;
};

// One enabled action of one state. Entries are sorted by successor and carry positive
// weights summing to one.
struct TransitionRow {
  uint32_t action;
  std::vector<TransitionEntry> entries;

  bool operator==(TransitionRow const&) const = default;
};

// States, actions and observations are dense indices; names live in side tables.
// Invariants (checked by validate): every state has at least one enabled action,
// states sharing an observation share their enabled action set, rows are sorted by
// action, the initial support is nonempty and observation-uniform.
struct Pomdp {
  std::vector<std::string> action_names;
  std::vector<std::string> observation_names;
  std::vector<uint32_t> observation_of;        // per state
  std::vector<std::vector<TransitionRow>> rows;  // per state
  Bitset initial;

  uint32_t num_states() const { return static_cast<uint32_t>(rows.size()); }
  uint32_t num_actions() const { return static_cast<uint32_t>(action_names.size()); }
  uint32_t num_observations() const { return static_cast<uint32_t>(observation_names.size()); }

  uint32_t transition_count() const {
    uint32_t n = 0;
    for (auto const& state_rows : rows) {
      for (auto const& row : state_rows) {
        n += static_cast<uint32_t>(row.entries.size());
      }
    }
    return n;
  }

  TransitionRow const* row(uint32_t state, uint32_t action) const {
    for (auto const& r : rows[state]) {
      if (r.action == action) {
        return &r;
      }
    }
    return nullptr;
  }

  std::vector<uint32_t> enabled_actions(uint32_t state) const {
    std::vector<uint32_t> result;
    result.reserve(rows[state].size());
    for (auto const& r : rows[state]) {
      result.push_back(r.action);
    }
    return result;
  }

  // Enabled actions of an observation; well defined because all states of an
  // observation share their enabled set.
  std::vector<uint32_t> enabled_actions_of_observation(uint32_t observation) const {
    for (uint32_t s = 0; s < num_states(); ++s) {
      if (observation_of[s] == observation) {
        return enabled_actions(s);
      }
    }
    return {};
  }

  Bitset states_with_observation(uint32_t observation) const {
    Bitset result(num_states());
    for (uint32_t s = 0; s < num_states(); ++s) {
      if (observation_of[s] == observation) {
        result.set(s);
      }
    }
    return result;
  }

  bool operator==(Pomdp const&) const = default;
};

struct Specification {
  Bitset reach;
  Bitset avoid;

  bool operator==(Specification const&) const = default;
};

// The lifted specification over belief supports: reach asks for containment in REACH,
// avoid triggers on any overlap with AVOID.
struct LiftedSpecification {
  Specification const* spec;

  bool reach_lifted(BeliefSupport const& b) const { return b.any() && b.is_subset_of(spec->reach); }
  bool avoid_lifted(BeliefSupport const& b) const { return b.intersects(spec->avoid); }
};

inline uint32_t observation_of_support(Pomdp const& pomdp, BeliefSupport const& b) {
  uint32_t first = b.find_first();
  if (first == Bitset::npos) {
    throw ModelError("empty belief support has no observation");
  }
  return pomdp.observation_of[first];
}

// Structural model checks. Returns human-readable diagnostics; empty means valid.
// With require_absorbing set, REACH and AVOID states must be self-loops under every
// enabled action (the shape make_absorbing establishes).
inline std::vector<std::string> validate(Pomdp const& pomdp, Specification const& spec,
                                         bool require_absorbing = false) {
  std::vector<std::string> issues;
  uint32_t n = pomdp.num_states();
  if (n == 0) {
    issues.push_back("model has no states");
    return issues;
  }
  if (pomdp.observation_of.size() != n) {
    issues.push_back("observation map does not cover all states");
    return issues;
  }
  for (uint32_t s = 0; s < n; ++s) {
    if (pomdp.observation_of[s] >= pomdp.num_observations()) {
      issues.push_back("state " + std::to_string(s) + " has out-of-range observation");
    }
    if (pomdp.rows[s].empty()) {
      issues.push_back("state " + std::to_string(s) + " has no enabled action");
    }
    uint32_t prev_action = 0;
    bool first_row = true;
    for (auto const& row : pomdp.rows[s]) {
      if (row.action >= pomdp.num_actions()) {
        issues.push_back("state " + std::to_string(s) + " uses out-of-range action");
        continue;
      }
      if (!first_row && row.action <= prev_action) {
        issues.push_back("state " + std::to_string(s) + " rows not sorted by action");
      }
      first_row = false;
      prev_action = row.action;
      if (row.entries.empty()) {
        issues.push_back("state " + std::to_string(s) + " action " +
                         pomdp.action_names[row.action] + " has no successors");
        continue;
      }
      Rational sum(0);
      uint32_t prev_succ = 0;
      bool first_entry = true;
      for (auto const& entry : row.entries) {
        if (entry.successor >= n) {
          issues.push_back("state " + std::to_string(s) + " has out-of-range successor");
          continue;
        }
        if (!first_entry && entry.successor <= prev_succ) {
          issues.push_back("state " + std::to_string(s) + " action " +
                           pomdp.action_names[row.action] + " entries not sorted by successor");
        }
        first_entry = false;
        prev_succ = entry.successor;
        if (entry.weight <= Rational(0)) {
          issues.push_back("state " + std::to_string(s) + " has non-positive weight");
        }
        sum += entry.weight;
      }
      if (sum != Rational(1)) {
        issues.push_back("state " + std::to_string(s) + " action " +
                         pomdp.action_names[row.action] + " weights sum to " + to_string(sum));
      }
    }
  }
  // Enabled sets must agree within an observation.
  for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
    std::vector<uint32_t> reference;
    bool have_reference = false;
    for (uint32_t s = 0; s < n; ++s) {
      if (pomdp.observation_of[s] != z) {
        continue;
      }
      auto enabled = pomdp.enabled_actions(s);
      if (!have_reference) {
        reference = enabled;
        have_reference = true;
      } else if (enabled != reference) {
        issues.push_back("observation " + pomdp.observation_names[z] +
                         " has states with differing enabled actions");
      }
    }
  }
  if (pomdp.initial.size() != n) {
    issues.push_back("initial support has wrong width");
  } else if (pomdp.initial.none()) {
    issues.push_back("initial support is empty");
  } else {
    uint32_t z = pomdp.observation_of[pomdp.initial.find_first()];
    for (uint32_t s : pomdp.initial) {
      if (pomdp.observation_of[s] != z) {
        issues.push_back("initial support is not observation-uniform");
        break;
      }
    }
  }
  if (spec.reach.size() != n || spec.avoid.size() != n) {
    issues.push_back("specification has wrong width");
    return issues;
  }
  if (spec.reach.intersects(spec.avoid)) {
    issues.push_back("REACH and AVOID overlap");
  }
  if (require_absorbing) {
    Bitset special = spec.reach | spec.avoid;
    for (uint32_t s : special) {
      for (auto const& row : pomdp.rows[s]) {
        if (row.entries.size() != 1 || row.entries[0].successor != s) {
          issues.push_back("state " + std::to_string(s) + " in REACH/AVOID is not absorbing");
        }
      }
    }
  }
  return issues;
}

// Redirects every enabled action of a REACH or AVOID state to a self-loop. Keeps the
// enabled sets untouched so observation-uniformity of EnAct is preserved. Idempotent.
inline Pomdp make_absorbing(Pomdp pomdp, Specification const& spec) {
  Bitset special = spec.reach | spec.avoid;
  for (uint32_t s : special) {
    for (auto& row : pomdp.rows[s]) {
      row.entries = {TransitionEntry{s, Rational(1)}};
    }
  }
  return pomdp;
}

// All successor supports of playing action from support b, split by observation and
// ordered by observation index. This is the qualitative belief update.
inline std::vector<BeliefSupport> support_update(Pomdp const& pomdp, BeliefSupport const& b,
                                                 uint32_t action) {
  Bitset all_successors(pomdp.num_states());
  for (uint32_t s : b) {
    TransitionRow const* row = pomdp.row(s, action);
    if (row == nullptr) {
      throw ModelError("action " + pomdp.action_names[action] + " not enabled in support " +
                       b.to_string());
    }
    for (auto const& entry : row->entries) {
      all_successors.set(entry.successor);
    }
  }
  std::vector<uint32_t> seen_observations;
  std::vector<BeliefSupport> result;
  for (uint32_t s : all_successors) {
    uint32_t z = pomdp.observation_of[s];
    auto it = std::find(seen_observations.begin(), seen_observations.end(), z);
    if (it == seen_observations.end()) {
      seen_observations.push_back(z);
      result.emplace_back(pomdp.num_states());
      result.back().set(s);
    } else {
      result[static_cast<std::size_t>(it - seen_observations.begin())].set(s);
    }
  }
  // Canonical order: by observation index.
  std::vector<std::size_t> order(result.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    return seen_observations[a] < seen_observations[c];
  });
  std::vector<BeliefSupport> sorted;
  sorted.reserve(result.size());
  for (std::size_t i : order) {
    sorted.push_back(std::move(result[i]));
  }
  return sorted;
}

}  // namespace pomdp_shield
