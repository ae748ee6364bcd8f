#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

#include <pomdp_shield/benchmarks.hpp>
#include <pomdp_shield/explicit_format.hpp>

#include <fstream>
#include <sstream>

using namespace pomdp_shield;

namespace {

std::string const kTiny =
    "# two-room chain\n"
    "states 3\n"
    "actions a b\n"
    "observations x y\n"
    "obs 0 x\n"
    "obs 1 x\n"
    "obs 2 y\n"
    "tr 0 a 1:1/1\n"
    "tr 0 b 0:1/2 2:1/2\n"
    "tr 1 a 0:1/1\n"
    "tr 1 b 2:1/1\n"
    "tr 2 a 2:1/1\n"
    "init 0 1\n"
    "reach 2\n"
    "avoid\n";

std::string read_file(std::string const& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("parsing a small model") {
  ExplicitModel model = parse_explicit_string(kTiny);
  CHECK(model.pomdp.num_states() == 3);
  CHECK(model.pomdp.num_actions() == 2);
  CHECK(model.pomdp.num_observations() == 2);
  CHECK(model.pomdp.action_names == std::vector<std::string>{"a", "b"});
  CHECK(model.pomdp.observation_of == std::vector<uint32_t>{0, 0, 1});
  CHECK(model.pomdp.initial == Bitset::of(3, {0, 1}));
  CHECK(model.spec.reach == Bitset::of(3, {2}));
  CHECK(model.spec.avoid.none());
  REQUIRE(model.pomdp.rows[0].size() == 2);
  CHECK(model.pomdp.rows[0][1].entries[1].weight == Rational(1, 2));
}

TEST_CASE("parsing normalizes targets to self-loops") {
  std::string text = kTiny;
  auto pos = text.find("tr 2 a 2:1/1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 12, "tr 2 a 0:1/1");
  ExplicitModel model = parse_explicit_string(text);
  REQUIRE(model.pomdp.rows[2].size() == 1);
  CHECK(model.pomdp.rows[2][0].entries[0].successor == 2);
  CHECK(validate(model.pomdp, model.spec, true).empty());
}

TEST_CASE("parse errors carry line numbers") {
  auto expect_error = [](std::string const& text, std::string const& needle) {
    try {
      parse_explicit_string(text);
      FAIL("expected a parse error mentioning '" << needle << "'");
    } catch (ModelError const& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error("actions a\n", "missing states");
  expect_error("states 1\nstates 1\n", "duplicate states");
  expect_error("states 1\nactions a a\n", "duplicate action");
  expect_error("states 1\nactions a\nobservations x\nobs 0 z\n", "unknown observation");
  expect_error("states 1\nactions a\nobservations x\nobs 0 x\nobs 0 x\n", "duplicate obs");
  expect_error("states 1\nactions a\nobservations x\nobs 0 x\ntr 0 q 0:1/1\n", "unknown action");
  expect_error("states 1\nactions a\nobservations x\nobs 0 x\ntr 0 a 0:1/1\ntr 0 a 0:1/1\n",
               "duplicate tr row");
  expect_error("states 1\nactions a\nobservations x\nobs 0 x\ntr 0 a 0:1/1 0:1/1\n",
               "duplicate successor");
  expect_error("states 1\nactions a\nobservations x\nobs 0 x\ntr 0 a zero\n", "malformed");
  expect_error("states 1\nactions a\nobservations x\nobs 0 x\ntr 5 a 0:1/1\n", "out of range");
  expect_error("states 1\nactions a\nobservations x\nobs 0 x\nfoo\n", "unknown directive");
}

TEST_CASE("semantic defects are rejected after parsing") {
  // Weights that do not sum to one survive the grammar but fail validation.
  std::string text = kTiny;
  auto pos = text.find("0:1/2 2:1/2");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 11, "0:1/3 2:1/2");
  CHECK_THROWS_AS(parse_explicit_string(text), ModelError);
}

TEST_CASE("emit and reparse is a fixpoint") {
  auto check_roundtrip = [](ExplicitModel const& model) {
    std::string once = emit_explicit_string(model);
    ExplicitModel reparsed = parse_explicit_string(once);
    CHECK(emit_explicit_string(reparsed) == once);
    CHECK(reparsed.pomdp.num_states() == model.pomdp.num_states());
    CHECK(reparsed.spec.reach == model.spec.reach);
    CHECK(reparsed.spec.avoid == model.spec.avoid);
    CHECK(reparsed.pomdp.initial == model.pomdp.initial);
  };
  check_roundtrip(parse_explicit_string(kTiny));
  check_roundtrip(make_cheese());
  check_roundtrip(make_obstacle(4));
  check_roundtrip(make_refuel(4, 4));
  for (auto const& model : test_support::corpus(1400, 20)) {
    check_roundtrip(model);
  }
}

TEST_CASE("comments and blank lines are ignored") {
  ExplicitModel a = parse_explicit_string(kTiny);
  ExplicitModel b = parse_explicit_string("\n\n# header\n" + kTiny + "\n# trailer\n\n");
  CHECK(emit_explicit_string(a) == emit_explicit_string(b));
}

TEST_CASE("maze golden file parses to the frozen shape") {
  ExplicitModel model = parse_explicit_string(read_file(std::string(TEST_GOLDEN_DIR) +
                                                        "/cheese.pomdp"));
  CHECK(model.pomdp.num_states() == 11);
  CHECK(model.pomdp.num_actions() == 4);
  CHECK(model.pomdp.num_observations() == 7);
  CHECK(model.pomdp.initial == Bitset::of(11, {5, 7}));
  CHECK(model.spec.reach == Bitset::of(11, {9}));
  CHECK(model.spec.avoid == Bitset::of(11, {8, 10}));
  // The generator reproduces the stored bytes exactly.
  CHECK(emit_explicit_string(make_cheese()) ==
        read_file(std::string(TEST_GOLDEN_DIR) + "/cheese.pomdp"));
}

TEST_CASE("obstacle golden file matches the generator") {
  CHECK(emit_explicit_string(make_obstacle(6)) ==
        read_file(std::string(TEST_GOLDEN_DIR) + "/obstacle6.pomdp"));
}
