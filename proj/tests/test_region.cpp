#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

#include <pomdp_shield/benchmarks.hpp>
#include <pomdp_shield/winning_region.hpp>

#include <sstream>

using namespace pomdp_shield;
using test_support::support_of;

TEST_CASE("store keeps an antichain per observation") {
  WinningRegionStore store(2, 8);
  auto first = store.insert(0, Bitset::of(8, {1, 3}));
  CHECK(first.added);
  CHECK(first.index == 1);

  // A subset of a live entry is already covered.
  auto sub = store.insert(0, Bitset::of(8, {1}));
  CHECK_FALSE(sub.added);
  CHECK(store.entry_count(0) == 1);

  // A superset tombstones what it swallows but keeps the slot addressable.
  auto super = store.insert(0, Bitset::of(8, {1, 3, 5}));
  CHECK(super.added);
  CHECK(super.index == 2);
  CHECK(store.entry_count(0) == 2);
  CHECK(store.tombstone_count() == 1);
  CHECK(store.live_count() == 1);
  CHECK(store.entry(0, 1).tombstoned);
  CHECK(store.entry(0, 1).support == Bitset::of(8, {1, 3}));
  CHECK(store.live_entries(0) == std::vector<Bitset>{Bitset::of(8, {1, 3, 5})});

  // Incomparable entries coexist.
  CHECK(store.insert(0, Bitset::of(8, {2})).added);
  CHECK(store.live_count() == 2);

  CHECK(store.has_live_entry(0));
  CHECK_FALSE(store.has_live_entry(1));
  CHECK_THROWS_AS(store.insert(1, Bitset(8)), ModelError);
}

TEST_CASE("winning test is subset containment") {
  WinningRegionStore store(1, 4);
  store.insert(0, Bitset::of(4, {0, 2}));
  CHECK(store.is_winning(0, Bitset::of(4, {0})));
  CHECK(store.is_winning(0, Bitset::of(4, {0, 2})));
  CHECK_FALSE(store.is_winning(0, Bitset::of(4, {0, 1})));
  CHECK_FALSE(store.is_winning(0, Bitset::of(4, {3})));
}

TEST_CASE("flatten and size estimate") {
  WinningRegionStore store(2, 6);
  store.insert(0, Bitset::of(6, {0, 1}));
  store.insert(1, Bitset::of(6, {4}));
  CHECK(store.flatten() == Bitset::of(6, {0, 1, 4}));
  CHECK(store.size_estimate() == 4.0);  // (2^2 - 1) + (2^1 - 1)
}

TEST_CASE("region equality is a per-observation antichain comparison") {
  WinningRegionStore a(1, 4);
  WinningRegionStore b(1, 4);
  a.insert(0, Bitset::of(4, {0}));
  a.insert(0, Bitset::of(4, {1}));
  b.insert(0, Bitset::of(4, {1}));
  b.insert(0, Bitset::of(4, {0}));
  CHECK(region_equals(a, b));
  b.insert(0, Bitset::of(4, {0, 1}));  // subsumes both
  CHECK_FALSE(region_equals(a, b));
  a.insert(0, Bitset::of(4, {0, 1}));
  CHECK(region_equals(a, b));  // tombstones do not count
}

TEST_CASE("reach seeding covers exactly the per-class restrictions") {
  auto model = make_cheese();
  WinningRegionStore store = WinningRegionStore::from_reach(model.pomdp, model.spec);
  CHECK(store.live_count() == 1);
  CHECK(store.live_entries(6) == std::vector<Bitset>{support_of(11, {9})});
}

TEST_CASE("region files round-trip through their text form") {
  auto model = make_cheese();
  WinningRegionStore oracle = maximal_winning_region(model.pomdp, model.spec);
  std::ostringstream out;
  save_region(out, model.pomdp, oracle);
  CHECK(out.str().find("win goal 9") != std::string::npos);
  std::istringstream in(out.str());
  WinningRegionStore loaded = load_region(in, model.pomdp);
  CHECK(region_equals(oracle, loaded));
}

TEST_CASE("region loading rejects foreign content") {
  auto model = make_cheese();
  auto expect_error = [&](std::string const& text) {
    std::istringstream in(text);
    CHECK_THROWS_AS(load_region(in, model.pomdp), ModelError);
  };
  expect_error("win nowhere 1\n");
  expect_error("win goal 3\n");   // state 3 does not carry the goal observation
  expect_error("win goal 99\n");  // out of range
  expect_error("win goal\n");     // empty entry
  expect_error("frobnicate goal 9\n");
}

TEST_CASE("shield allows exactly the region-preserving actions") {
  auto model = make_cheese();
  WinningRegionStore oracle = maximal_winning_region(model.pomdp, model.spec);
  uint32_t north = 0, south = 1, east = 2, west = 3;

  // From the start pair only north keeps the support inside the region.
  CHECK(shield_allowed(model.pomdp, oracle, model.pomdp.initial) ==
        std::vector<uint32_t>{north});
  // The corridor pair {1,3} may move east or west: both split into covered cells.
  CHECK(shield_allowed(model.pomdp, oracle, support_of(11, {1, 3})) ==
        std::vector<uint32_t>{east, west});
  // Under the full middle-row support, south drags 5 and 7 into the traps.
  CHECK(shield_allowed(model.pomdp, oracle, support_of(11, {5, 6, 7})) ==
        std::vector<uint32_t>{north});
  (void)south;

  Shield shield{&model.pomdp, &model.spec, &oracle, false};
  CHECK(shield.allowed(model.pomdp.initial) == std::vector<uint32_t>{north});
}

TEST_CASE("audits pass on the ground-truth region") {
  auto model = make_cheese();
  WinningRegionStore oracle = maximal_winning_region(model.pomdp, model.spec);
  CHECK(is_deadlock_free(model.pomdp, oracle));
  CHECK(is_productive(model.pomdp, model.spec, oracle));
}

TEST_CASE("audits reject a hand-broken region") {
  auto model = make_cheese();
  // The start pair alone has no action whose whole successor bundle stays
  // covered, so a store holding only it deadlocks immediately.
  WinningRegionStore broken(model.pomdp.num_observations(), 11);
  broken.insert(4, support_of(11, {5, 7}));
  CHECK_FALSE(is_deadlock_free(model.pomdp, broken));

  // The absorbed trap pair covers itself: deadlock-free but unproductive.
  WinningRegionStore trapped(model.pomdp.num_observations(), 11);
  trapped.insert(5, support_of(11, {8, 10}));
  CHECK(is_deadlock_free(model.pomdp, trapped));
  CHECK_FALSE(is_productive(model.pomdp, model.spec, trapped));

  // A self-sustaining loop away from REACH is deadlock-free yet unproductive.
  WinningRegionStore loop(model.pomdp.num_observations(), 11);
  loop.insert(0, support_of(11, {0}));
  loop.insert(4, support_of(11, {5}));
  CHECK(is_deadlock_free(model.pomdp, loop));
  CHECK_FALSE(is_productive(model.pomdp, model.spec, loop));
}

TEST_CASE("productivity respects the node cap") {
  auto model = make_cheese();
  WinningRegionStore oracle = maximal_winning_region(model.pomdp, model.spec);
  CHECK_THROWS_AS(is_productive(model.pomdp, model.spec, oracle, 2), BudgetExceeded);
}
