#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

#include <pomdp_shield/benchmarks.hpp>
#include <pomdp_shield/encoding.hpp>
#include <pomdp_shield/solver.hpp>

using namespace pomdp_shield;
using test_support::support_of;

TEST_CASE("memory unfolding") {
  auto model = make_cheese();
  CHECK_THROWS_AS(unfold_memory(model.pomdp, 0), ModelError);
  CHECK(unfold_memory(model.pomdp, 1).num_states() == 11);

  Pomdp two = unfold_memory(model.pomdp, 2);
  Specification two_spec = unfold_specification(model.spec, 2);
  CHECK(two.num_states() == 22);
  CHECK(two.num_observations() == 14);
  CHECK(two_spec.reach.count() == 2);
  CHECK(two_spec.avoid.count() == 4);
  // Cross-cell moves leave copied REACH/AVOID states non-absorbing; the driver
  // re-absorbs the unfolded model before encoding.
  CHECK(validate(two, two_spec).empty());
  CHECK(validate(make_absorbing(two, two_spec), two_spec, true).empty());
  CHECK(two.initial.count() == model.pomdp.initial.count());
  CHECK(two.initial == lift_support_to_first_cell(model.pomdp.initial, 2));

  CHECK_THROWS_AS(unfold_memory(model.pomdp, 100, 1000), ModelError);
}

TEST_CASE("jump shortcuts extend the model soundly") {
  auto model = make_cheese();
  ShortcutExtension ext = begin_shortcuts(model.pomdp, model.spec);
  CHECK(ext.pomdp.num_states() == 13);
  CHECK(ext.original_states == 11);
  CHECK(ext.spec.reach.get(ext.top));
  CHECK(ext.spec.avoid.get(ext.bottom));

  add_shortcut(ext, support_of(11, {0}));
  uint32_t jump = ext.pomdp.num_actions() - 1;
  CHECK(ext.pomdp.action_names[jump] == "jump1");
  auto successor = [&](uint32_t s) {
    for (auto const& row : ext.pomdp.rows[s]) {
      if (row.action == jump) {
        return row.entries[0].successor;
      }
    }
    return ~0u;
  };
  CHECK(successor(0) == ext.top);
  CHECK(successor(1) == ext.bottom);
  CHECK(successor(ext.top) == ext.top);
  CHECK(successor(ext.bottom) == ext.bottom);
  // Jump rows leave REACH/AVOID states only semantically absorbed (they route
  // to the sinks), so only the plain validation applies here.
  CHECK(validate(ext.pomdp, ext.spec).empty());
}

TEST_CASE("variable book shapes follow the model") {
  auto model = make_cheese();
  InternalSolver session;
  VariableBook book = VariableBook::for_oneshot(model.pomdp, session, 11);
  REQUIRE(book.action.size() == 7);
  CHECK(book.action[4].size() == 2);  // middle row: north and south
  CHECK(book.reached.size() == 11);
  REQUIRE(book.rank_bool.size() == 11);
  CHECK(book.rank_bool[0].size() == 12);  // ladder 0..k
  CHECK(book.rank_real.empty());

  InternalSolver session2;
  VariableBook inc = VariableBook::for_incremental(model.pomdp, session2);
  CHECK(inc.rank_bool.empty());
  CHECK(inc.rank_real.size() == 11);
  CHECK(inc.progress.size() == 7);
  CHECK(inc.switch_after.size() == 7);
  CHECK(inc.switch_immediate.size() == 7);
  CHECK(inc.shortcut.size() == 11);
  CHECK(inc.pick.size() == 7);
}

TEST_CASE("one-shot verdicts on the maze") {
  auto model = make_cheese();

  SECTION("a safe singleton is winning") {
    InternalSolver session;
    VariableBook book = VariableBook::for_oneshot(model.pomdp, session, 11);
    for (auto& f : encode_oneshot(model.pomdp, model.spec, support_of(11, {0}), book)) {
      session.assert_formula(std::move(f));
    }
    REQUIRE(session.check() == CheckResult::sat);
    PolicyCandidate candidate = decode(session.model(), book, model.pomdp);
    CHECK(candidate.reached.get(0));
    CHECK(candidate.reached.get(9));
    CHECK_FALSE(candidate.reached.get(8));
    CHECK_FALSE(candidate.reached.get(10));
    // Wherever a state is reached its observation carries a committed action.
    for (uint32_t s : candidate.reached) {
      CHECK_FALSE(candidate.chosen_actions[model.pomdp.observation_of[s]].empty());
    }
  }

  SECTION("the start pair defeats memoryless policies") {
    InternalSolver session;
    VariableBook book = VariableBook::for_oneshot(model.pomdp, session, 11);
    for (auto& f : encode_oneshot(model.pomdp, model.spec, model.pomdp.initial, book)) {
      session.assert_formula(std::move(f));
    }
    CHECK(session.check() == CheckResult::unsat);
  }

  SECTION("one memory cell repairs the start pair") {
    Pomdp two = unfold_memory(model.pomdp, 2);
    Specification two_spec = unfold_specification(model.spec, 2);
    InternalSolver session;
    VariableBook book = VariableBook::for_oneshot(two, session, two.num_states());
    for (auto& f : encode_oneshot(two, two_spec, two.initial, book)) {
      session.assert_formula(std::move(f));
    }
    CHECK(session.check() == CheckResult::sat);
  }
}

TEST_CASE("fixed-core encoding with an empty store matches one-shot") {
  // With no recorded entries the switch machinery is forced off, so the fixed
  // core plus bounds must accept exactly the supports the one-shot accepts.
  uint32_t agreements = 0;
  for (auto const& model : test_support::corpus(3300, 60)) {
    if (model.pomdp.num_states() > 6) {
      continue;
    }
    BeliefSupport b = model.pomdp.initial;

    InternalSolver oneshot_session;
    VariableBook oneshot_book =
        VariableBook::for_oneshot(model.pomdp, oneshot_session, model.pomdp.num_states());
    for (auto& f : encode_oneshot(model.pomdp, model.spec, b, oneshot_book)) {
      oneshot_session.assert_formula(std::move(f));
    }
    CheckResult direct = oneshot_session.check();

    InternalSolver fixed_session;
    VariableBook fixed_book = VariableBook::for_incremental(model.pomdp, fixed_session);
    WinningRegionStore empty(model.pomdp.num_observations(), model.pomdp.num_states());
    std::vector<uint32_t> first_index(model.pomdp.num_observations(), 1);
    for (auto& f : encode_fixed_core(model.pomdp, model.spec, fixed_book)) {
      fixed_session.assert_formula(std::move(f));
    }
    for (auto& f : encode_entry_constraints(model.pomdp, empty, fixed_book, first_index)) {
      fixed_session.assert_formula(std::move(f));
    }
    for (auto& f : encode_bounds(model.pomdp, empty, fixed_book)) {
      fixed_session.assert_formula(std::move(f));
    }
    for (uint32_t s : b) {
      fixed_session.assert_formula(Formula::bool_var(fixed_book.reached[s]));
    }
    CheckResult layered = fixed_session.check();

    REQUIRE(direct != CheckResult::unknown);
    INFO("initial support of a corpus model");
    CHECK(direct == layered);
    ++agreements;
  }
  CHECK(agreements >= 20);
}

TEST_CASE("progress demands something new") {
  auto model = make_cheese();
  InternalSolver session;
  VariableBook book = VariableBook::for_incremental(model.pomdp, session);
  WinningRegionStore store = maximal_winning_region(model.pomdp, model.spec);
  for (auto& f : encode_fixed_core(model.pomdp, model.spec, book)) {
    session.assert_formula(std::move(f));
  }
  std::vector<uint32_t> first_index(model.pomdp.num_observations(), 1);
  for (auto& f : encode_entry_constraints(model.pomdp, store, book, first_index)) {
    session.assert_formula(std::move(f));
  }
  for (auto& f : encode_bounds(model.pomdp, store, book)) {
    session.assert_formula(std::move(f));
  }
  // The region is already maximal: no candidate can exceed it anywhere.
  for (auto& f : encode_progress(model.pomdp, store, book)) {
    session.assert_formula(std::move(f));
  }
  CHECK(session.check() == CheckResult::unsat);
}
