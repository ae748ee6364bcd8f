#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pomdp_shield/formula.hpp"
#include "pomdp_shield/pomdp.hpp"
#include "pomdp_shield/solver.hpp"
#include "pomdp_shield/winning_region.hpp"

namespace pomdp_shield {

// Product of the POMDP with m memory cells: state (s, i) has index s*m + i, action
// (a, j) index a*m + j deterministically writes cell j, observation (z, i) index
// z*m + i. A memoryless policy on the product is an m-cell finite-memory policy on the
// original model.
inline Pomdp unfold_memory(Pomdp const& pomdp, uint32_t m, uint64_t state_limit = 1u << 20) {
  if (m == 0) {
    throw ModelError("memory unfolding needs at least one cell");
  }
  if (m == 1) {
    return pomdp;
  }
  uint64_t states = static_cast<uint64_t>(pomdp.num_states()) * m;
  if (states > state_limit) {
    throw ModelError("memory unfolding exceeds the state limit");
  }
  Pomdp out;
  for (uint32_t a = 0; a < pomdp.num_actions(); ++a) {
    for (uint32_t j = 0; j < m; ++j) {
      out.action_names.push_back(pomdp.action_names[a] + ".m" + std::to_string(j));
    }
  }
  for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
    for (uint32_t i = 0; i < m; ++i) {
      out.observation_names.push_back(pomdp.observation_names[z] + ".m" + std::to_string(i));
    }
  }
  out.observation_of.resize(states);
  out.rows.resize(states);
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    for (uint32_t i = 0; i < m; ++i) {
      uint32_t id = s * m + i;
      out.observation_of[id] = pomdp.observation_of[s] * m + i;
      for (auto const& row : pomdp.rows[s]) {
        for (uint32_t j = 0; j < m; ++j) {
          TransitionRow lifted;
          lifted.action = row.action * m + j;
          for (auto const& entry : row.entries) {
            lifted.entries.push_back(TransitionEntry{entry.successor * m + j, entry.weight});
          }
          out.rows[id].push_back(std::move(lifted));
        }
      }
      std::sort(out.rows[id].begin(), out.rows[id].end(),
                [](TransitionRow const& a, TransitionRow const& b) { return a.action < b.action; });
    }
  }
  out.initial = Bitset(static_cast<uint32_t>(states));
  for (uint32_t s : pomdp.initial.ones()) {
    out.initial.set(s * m);  // memory starts in cell 0
  }
  return out;
}

inline Specification unfold_specification(Specification const& spec, uint32_t m) {
  if (m == 1) {
    return spec;
  }
  uint64_t states = static_cast<uint64_t>(spec.reach.size()) * m;
  Specification out;
  out.reach = Bitset(static_cast<uint32_t>(states));
  out.avoid = Bitset(static_cast<uint32_t>(states));
  for (uint32_t s : spec.reach.ones()) {
    for (uint32_t i = 0; i < m; ++i) {
      out.reach.set(s * m + i);
    }
  }
  for (uint32_t s : spec.avoid.ones()) {
    for (uint32_t i = 0; i < m; ++i) {
      out.avoid.set(s * m + i);
    }
  }
  return out;
}

inline BeliefSupport lift_support_to_first_cell(BeliefSupport const& b, uint32_t m) {
  if (m == 1) {
    return b;
  }
  BeliefSupport out = Bitset(b.size() * m);
  for (uint32_t s : b.ones()) {
    out.set(s * m);
  }
  return out;
}

// A POMDP being extended with sink states and one jump action per found policy. The
// jump action moves every state of the recorded winning set to the accepting sink and
// every other state to the rejecting sink, so a memoryless search can compose the
// recorded policy. Sinks absorb under every action.
struct ShortcutExtension {
  Pomdp pomdp;
  Specification spec;
  uint32_t top = 0;
  uint32_t bottom = 0;
  uint32_t original_states = 0;
  uint32_t jumps = 0;
};

inline ShortcutExtension begin_shortcuts(Pomdp const& pomdp, Specification const& spec) {
  ShortcutExtension out;
  out.pomdp = pomdp;
  out.original_states = pomdp.num_states();
  out.top = pomdp.num_states();
  out.bottom = pomdp.num_states() + 1;
  auto fresh_observation = [&](std::string base) {
    while (std::find(out.pomdp.observation_names.begin(), out.pomdp.observation_names.end(),
                     base) != out.pomdp.observation_names.end()) {
      base += "_";
    }
    out.pomdp.observation_names.push_back(base);
    return static_cast<uint32_t>(out.pomdp.observation_names.size() - 1);
  };
  uint32_t top_obs = fresh_observation("sink_goal");
  uint32_t bottom_obs = fresh_observation("sink_dead");
  out.pomdp.observation_of.push_back(top_obs);
  out.pomdp.observation_of.push_back(bottom_obs);
  out.pomdp.rows.emplace_back();
  out.pomdp.rows.emplace_back();
  for (uint32_t sink : {out.top, out.bottom}) {
    for (uint32_t a = 0; a < out.pomdp.num_actions(); ++a) {
      out.pomdp.rows[sink].push_back(TransitionRow{a, {TransitionEntry{sink, Rational(1)}}});
    }
  }
  out.pomdp.initial = Bitset(out.pomdp.num_states());
  for (uint32_t s : pomdp.initial.ones()) {
    out.pomdp.initial.set(s);
  }
  out.spec.reach = Bitset(out.pomdp.num_states());
  out.spec.avoid = Bitset(out.pomdp.num_states());
  for (uint32_t s : spec.reach.ones()) {
    out.spec.reach.set(s);
  }
  for (uint32_t s : spec.avoid.ones()) {
    out.spec.avoid.set(s);
  }
  out.spec.reach.set(out.top);
  out.spec.avoid.set(out.bottom);
  return out;
}

inline void add_shortcut(ShortcutExtension& ext, BeliefSupport const& winning_states) {
  uint32_t action = ext.pomdp.num_actions();
  ext.pomdp.action_names.push_back("jump" + std::to_string(++ext.jumps));
  for (uint32_t s = 0; s < ext.pomdp.num_states(); ++s) {
    uint32_t target = s == ext.top || s == ext.bottom ? s
                      : s < winning_states.size() && winning_states.get(s) ? ext.top
                                                                           : ext.bottom;
    ext.pomdp.rows[s].push_back(TransitionRow{action, {TransitionEntry{target, Rational(1)}}});
  }
}

// Solver variables of one encoding instance. Names are index-based and unique within a
// session: A_z_a (action a chosen at observation z), C_s (state reached), R_s_j
// (bounded rank), r_s (real rank), U_z (progress), SW_z (switch to a recorded policy
// after the next action), SWI_z (switch immediately instead), D_s (state continues via
// a recorded policy), P_z (index of the recorded winning set used at z).
struct VariableBook {
  std::vector<std::vector<std::pair<uint32_t, VarId>>> action;  // [z] -> (action id, A)
  std::vector<VarId> reached;                                   // [s] C
  std::vector<std::vector<VarId>> rank_bool;                    // [s][j] R (one-shot)
  std::vector<VarId> rank_real;                                 // [s] r
  std::vector<VarId> progress;                                  // [z] U
  std::vector<VarId> switch_after;                              // [z] SW
  std::vector<VarId> switch_immediate;                          // [z] SWI
  std::vector<VarId> shortcut;                                  // [s] D
  std::vector<VarId> pick;                                      // [z] P
  uint32_t rank_bound = 0;

  static constexpr long long kPickCap = 1 << 20;

  static VariableBook for_oneshot(Pomdp const& pomdp, SolverSession& session, uint32_t k) {
    VariableBook book;
    book.declare_actions(pomdp, session);
    book.declare_reached(pomdp, session);
    book.rank_bound = k;
    book.rank_bool.resize(pomdp.num_states());
    for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
      for (uint32_t j = 0; j <= k; ++j) {
        book.rank_bool[s].push_back(session.declare_boolean(
            "R_" + std::to_string(s) + "_" + std::to_string(j)));
      }
    }
    return book;
  }

  // Variables for the region search without switch machinery (explicit jump actions).
  static VariableBook for_naive(Pomdp const& pomdp, SolverSession& session) {
    VariableBook book;
    book.declare_actions(pomdp, session);
    book.declare_reached(pomdp, session);
    book.declare_ranks(pomdp, session);
    book.declare_progress(pomdp, session);
    return book;
  }

  static VariableBook for_incremental(Pomdp const& pomdp, SolverSession& session,
                                      long long pick_cap = kPickCap) {
    VariableBook book;
    book.declare_actions(pomdp, session);
    book.declare_reached(pomdp, session);
    book.declare_ranks(pomdp, session);
    book.declare_progress(pomdp, session);
    for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
      book.switch_after.push_back(session.declare_boolean("SW_" + std::to_string(z)));
      book.switch_immediate.push_back(session.declare_boolean("SWI_" + std::to_string(z)));
      book.pick.push_back(
          session.declare_bounded_int("P_" + std::to_string(z), 0, pick_cap));
    }
    for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
      book.shortcut.push_back(session.declare_boolean("D_" + std::to_string(s)));
    }
    return book;
  }

  VarId action_var(uint32_t z, uint32_t action_id) const {
    for (auto const& [a, var] : action[z]) {
      if (a == action_id) {
        return var;
      }
    }
    throw ModelError("action is not enabled at this observation");
  }

 private:
  void declare_actions(Pomdp const& pomdp, SolverSession& session) {
    action.resize(pomdp.num_observations());
    for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
      for (uint32_t a : pomdp.enabled_actions_of_observation(z)) {
        action[z].emplace_back(
            a, session.declare_boolean("A_" + std::to_string(z) + "_" + std::to_string(a)));
      }
    }
  }

  void declare_reached(Pomdp const& pomdp, SolverSession& session) {
    for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
      reached.push_back(session.declare_boolean("C_" + std::to_string(s)));
    }
  }

  void declare_ranks(Pomdp const& pomdp, SolverSession& session) {
    for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
      rank_real.push_back(session.declare_rank("r_" + std::to_string(s)));
    }
  }

  void declare_progress(Pomdp const& pomdp, SolverSession& session) {
    for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
      progress.push_back(session.declare_boolean("U_" + std::to_string(z)));
    }
  }
};

namespace detail {

// At least one action per inhabited observation.
inline void emit_action_choice(Pomdp const& pomdp, VariableBook const& book,
                               std::vector<Formula>& out) {
  for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
    if (pomdp.states_with_observation(z).none()) {
      continue;
    }
    std::vector<Formula> any;
    for (auto const& [a, var] : book.action[z]) {
      any.push_back(Formula::bool_var(var));
    }
    out.push_back(Formula::disjunction(std::move(any)));
  }
}

}  // namespace detail

// Bounded-rank search for one memoryless policy winning from b_iota: the initial
// support is reached, some action is chosen everywhere, no AVOID state is reached, the
// reached set is closed under chosen actions, and every reached maybe-state has a path
// of length <= k to REACH witnessed by the rank variables. With k = |S| satisfiability
// is equivalent to the existence of a memoryless winning policy.
inline std::vector<Formula> encode_oneshot(Pomdp const& pomdp, Specification const& spec,
                                           BeliefSupport const& b_iota,
                                           VariableBook const& book) {
  uint32_t k = book.rank_bound;
  std::vector<Formula> out;
  for (uint32_t s : b_iota.ones()) {
    out.push_back(Formula::bool_var(book.reached[s]));
  }
  detail::emit_action_choice(pomdp, book, out);
  for (uint32_t s : spec.avoid.ones()) {
    out.push_back(Formula::negate(Formula::bool_var(book.reached[s])));
  }
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    for (auto const& row : pomdp.rows[s]) {
      std::vector<Formula> closed;
      for (auto const& entry : row.entries) {
        closed.push_back(Formula::bool_var(book.reached[entry.successor]));
      }
      out.push_back(Formula::implication(
          Formula::conjunction({Formula::bool_var(book.reached[s]),
                                Formula::bool_var(book.action_var(pomdp.observation_of[s],
                                                                  row.action))}),
          Formula::conjunction(std::move(closed))));
    }
  }
  auto maybe = [&](uint32_t s) { return !spec.reach.get(s) && !spec.avoid.get(s); };
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    if (maybe(s)) {
      out.push_back(Formula::implication(Formula::bool_var(book.reached[s]),
                                         Formula::bool_var(book.rank_bool[s][k])));
    }
    if (!spec.reach.get(s)) {
      out.push_back(Formula::negate(Formula::bool_var(book.rank_bool[s][0])));
    }
  }
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    if (!maybe(s)) {
      continue;
    }
    for (uint32_t j = 1; j <= k; ++j) {
      std::vector<Formula> witness;
      for (auto const& row : pomdp.rows[s]) {
        std::vector<Formula> successors;
        for (auto const& entry : row.entries) {
          successors.push_back(Formula::bool_var(book.rank_bool[entry.successor][j - 1]));
        }
        witness.push_back(Formula::conjunction(
            {Formula::bool_var(book.action_var(pomdp.observation_of[s], row.action)),
             Formula::disjunction(std::move(successors))}));
      }
      out.push_back(Formula::equivalence(Formula::bool_var(book.rank_bool[s][j]),
                                         Formula::disjunction(std::move(witness))));
    }
  }
  return out;
}

// Region-search core without switch machinery, for models whose recorded policies are
// explicit jump actions: action choice, AVOID exclusion, closure of the reached set
// under chosen actions, and strict rank descent along some chosen action.
inline std::vector<Formula> encode_naive(Pomdp const& pomdp, Specification const& spec,
                                         VariableBook const& book) {
  std::vector<Formula> out;
  detail::emit_action_choice(pomdp, book, out);
  for (uint32_t s : spec.avoid.ones()) {
    out.push_back(Formula::negate(Formula::bool_var(book.reached[s])));
  }
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    for (auto const& row : pomdp.rows[s]) {
      std::vector<Formula> closed;
      for (auto const& entry : row.entries) {
        closed.push_back(Formula::bool_var(book.reached[entry.successor]));
      }
      out.push_back(Formula::implication(
          Formula::conjunction({Formula::bool_var(book.reached[s]),
                                Formula::bool_var(book.action_var(pomdp.observation_of[s],
                                                                  row.action))}),
          Formula::conjunction(std::move(closed))));
    }
  }
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    if (spec.reach.get(s) || spec.avoid.get(s)) {
      continue;
    }
    std::vector<Formula> descent;
    for (auto const& row : pomdp.rows[s]) {
      std::vector<Formula> lower;
      for (auto const& entry : row.entries) {
        lower.push_back(Formula::rank_gt(book.rank_real[s], book.rank_real[entry.successor]));
      }
      descent.push_back(Formula::conjunction(
          {Formula::bool_var(book.action_var(pomdp.observation_of[s], row.action)),
           Formula::disjunction(std::move(lower))}));
    }
    out.push_back(Formula::implication(Formula::bool_var(book.reached[s]),
                                       Formula::disjunction(std::move(descent))));
  }
  return out;
}

// Win-independent core of the switching encoding. Reached states follow chosen actions
// while the observation does not switch; when it switches, either the states themselves
// continue via a recorded policy (immediate) or all successors of the next action do.
// Every continuing state needs a positive pick, and ranks must descend unless the
// observation switches.
inline std::vector<Formula> encode_fixed_core(Pomdp const& pomdp, Specification const& spec,
                                              VariableBook const& book) {
  std::vector<Formula> out;
  detail::emit_action_choice(pomdp, book, out);
  for (uint32_t s : spec.avoid.ones()) {
    out.push_back(Formula::negate(Formula::bool_var(book.reached[s])));
    out.push_back(Formula::negate(Formula::bool_var(book.shortcut[s])));
  }
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    uint32_t z = pomdp.observation_of[s];
    for (auto const& row : pomdp.rows[s]) {
      std::vector<Formula> closed;
      std::vector<Formula> continued;
      for (auto const& entry : row.entries) {
        closed.push_back(Formula::bool_var(book.reached[entry.successor]));
        continued.push_back(Formula::bool_var(book.shortcut[entry.successor]));
      }
      Formula step = Formula::conjunction(
          {Formula::bool_var(book.reached[s]), Formula::bool_var(book.action_var(z, row.action))});
      out.push_back(Formula::implication(
          Formula::conjunction({step, Formula::negate(Formula::bool_var(book.switch_after[z]))}),
          Formula::conjunction(std::move(closed))));
      out.push_back(Formula::implication(
          Formula::conjunction({step, Formula::bool_var(book.switch_after[z]),
                                Formula::negate(Formula::bool_var(book.switch_immediate[z]))}),
          Formula::conjunction(std::move(continued))));
    }
    out.push_back(Formula::implication(
        Formula::conjunction({Formula::bool_var(book.reached[s]),
                              Formula::bool_var(book.switch_after[z]),
                              Formula::bool_var(book.switch_immediate[z])}),
        Formula::bool_var(book.shortcut[s])));
    out.push_back(Formula::implication(Formula::bool_var(book.shortcut[s]),
                                       Formula::int_gt(book.pick[z], 0)));
  }
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    if (spec.reach.get(s) || spec.avoid.get(s)) {
      continue;
    }
    uint32_t z = pomdp.observation_of[s];
    std::vector<Formula> descent;
    for (auto const& row : pomdp.rows[s]) {
      std::vector<Formula> lower;
      for (auto const& entry : row.entries) {
        lower.push_back(Formula::rank_gt(book.rank_real[s], book.rank_real[entry.successor]));
      }
      descent.push_back(
          Formula::conjunction({Formula::bool_var(book.action_var(z, row.action)),
                                Formula::disjunction(std::move(lower))}));
    }
    descent.push_back(Formula::bool_var(book.switch_after[z]));
    out.push_back(Formula::implication(Formula::bool_var(book.reached[s]),
                                       Formula::disjunction(std::move(descent))));
  }
  return out;
}

// Per-entry exclusions: a state that continues via a recorded policy cannot use an
// entry it does not belong to. Entries are addressed by their stable 1-based index;
// constraints for indices below `first_index[z]` are assumed to be asserted already.
inline std::vector<Formula> encode_entry_constraints(Pomdp const& pomdp,
                                                     WinningRegionStore const& win,
                                                     VariableBook const& book,
                                                     std::vector<uint32_t> const& first_index) {
  std::vector<Formula> out;
  for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
    for (uint32_t i = first_index[z]; i <= win.entry_count(z); ++i) {
      Bitset const& support = win.entry(z, i).support;
      for (uint32_t s : pomdp.states_with_observation(z)) {
        if (!support.get(s)) {
          out.push_back(Formula::implication(
              Formula::bool_var(book.shortcut[s]),
              Formula::negate(Formula::int_eq(book.pick[z], static_cast<long long>(i)))));
        }
      }
    }
  }
  return out;
}

// Moving upper bound: picks range over the entries recorded so far. Tombstoned entries
// stay pickable; they are subsets of live entries and remain sound.
inline std::vector<Formula> encode_bounds(Pomdp const& pomdp, WinningRegionStore const& win,
                                          VariableBook const& book) {
  std::vector<Formula> out;
  for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
    out.push_back(
        Formula::int_le(book.pick[z], static_cast<long long>(win.entry_count(z))));
  }
  return out;
}

// Some observation must make progress: its reached states form a support not subsumed
// by any live recorded entry for that observation.
inline std::vector<Formula> encode_progress(Pomdp const& pomdp, WinningRegionStore const& win,
                                            VariableBook const& book) {
  std::vector<Formula> out;
  std::vector<Formula> any;
  for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
    any.push_back(Formula::bool_var(book.progress[z]));
    std::vector<BeliefSupport> live = win.live_entries(z);
    Formula definition;
    if (live.empty()) {
      std::vector<Formula> some;
      for (uint32_t s : pomdp.states_with_observation(z)) {
        some.push_back(Formula::bool_var(book.reached[s]));
      }
      definition = Formula::disjunction(std::move(some));
    } else {
      std::vector<Formula> per_entry;
      for (auto const& entry : live) {
        std::vector<Formula> outside;
        for (uint32_t s : pomdp.states_with_observation(z)) {
          if (!entry.get(s)) {
            outside.push_back(Formula::bool_var(book.reached[s]));
          }
        }
        per_entry.push_back(Formula::disjunction(std::move(outside)));
      }
      definition = Formula::conjunction(std::move(per_entry));
    }
    out.push_back(Formula::equivalence(Formula::bool_var(book.progress[z]), definition));
  }
  out.push_back(Formula::disjunction(std::move(any)));
  return out;
}

// Decoded satisfying assignment.
struct PolicyCandidate {
  std::vector<std::vector<uint32_t>> chosen_actions;  // [z] action ids with A true
  std::vector<bool> switch_after;                     // [z]
  std::vector<bool> switch_immediate;                 // [z]
  std::vector<bool> progressed;                       // [z]
  std::vector<long long> pick;                        // [z]
  Bitset reached;                                     // C
  Bitset shortcut;                                    // D
  std::vector<BeliefSupport> supports;                // [z] reached states at z
};

inline PolicyCandidate decode(Model const& model, VariableBook const& book,
                              Pomdp const& pomdp) {
  PolicyCandidate out;
  uint32_t n = pomdp.num_states();
  uint32_t nz = pomdp.num_observations();
  out.reached = Bitset(n);
  out.shortcut = Bitset(n);
  out.chosen_actions.resize(nz);
  out.supports.assign(nz, Bitset(n));
  for (uint32_t z = 0; z < nz; ++z) {
    for (auto const& [a, var] : book.action[z]) {
      if (model.bool_value(var)) {
        out.chosen_actions[z].push_back(a);
      }
    }
    out.switch_after.push_back(!book.switch_after.empty() &&
                               model.bool_value(book.switch_after[z]));
    out.switch_immediate.push_back(!book.switch_immediate.empty() &&
                                   model.bool_value(book.switch_immediate[z]));
    out.progressed.push_back(!book.progress.empty() && model.bool_value(book.progress[z]));
    out.pick.push_back(book.pick.empty() ? 0 : model.int_value(book.pick[z], 0));
  }
  for (uint32_t s = 0; s < n; ++s) {
    if (model.bool_value(book.reached[s])) {
      out.reached.set(s);
      out.supports[pomdp.observation_of[s]].set(s);
    }
    if (!book.shortcut.empty() && model.bool_value(book.shortcut[s])) {
      out.shortcut.set(s);
    }
  }
  return out;
}

}  // namespace pomdp_shield
