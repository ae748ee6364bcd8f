#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

#include <pomdp_shield/benchmarks.hpp>
#include <pomdp_shield/jani.hpp>

#include <fstream>
#include <sstream>

using namespace pomdp_shield;

namespace {

std::string read_file(std::string const& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("maze export is byte-stable") {
  auto model = make_cheese();
  std::ostringstream out;
  write_jani(out, export_jani(model.pomdp, model.spec, {}));
  CHECK(out.str() == read_file(std::string(TEST_GOLDEN_DIR) + "/cheese.jani"));
}

TEST_CASE("document structure carries the two-step encoding") {
  auto model = make_cheese();
  Json doc = export_jani(model.pomdp, model.spec, {});
  CHECK(doc.at("name") == "belief_support");
  CHECK(doc.at("type") == "mdp");

  // One action per model action plus the dummy completing the half-step.
  auto const& actions = doc.at("actions");
  REQUIRE(actions.size() == 5);
  CHECK(actions.at(4).at("name") == "alpha_bot");

  // Parametric by default.
  auto const& constant = doc.at("constants").at(0);
  CHECK(constant.at("name") == "p");
  CHECK_FALSE(constant.contains("value"));

  // One boolean per state plus the two bookkeeping registers.
  CHECK(doc.at("variables").size() == 13);

  // Initial valuation marks exactly the initial support.
  uint32_t marked = 0;
  for (auto const& variable : doc.at("variables")) {
    std::string name = variable.at("name").get<std::string>();
    if (name.rfind("belsup_", 0) == 0 && variable.at("initial-value").get<bool>()) {
      ++marked;
    }
  }
  CHECK(marked == model.pomdp.initial.count());

  CHECK(doc.at("properties").at(0).at("name") == "max-reach-avoid");
  CHECK(doc.at("automata").size() == 1);
}

TEST_CASE("pinning the parameter emits a constant value") {
  auto model = make_cheese();
  JaniOptions options;
  options.pin_p = Rational(1, 7);
  options.model_name = "maze";
  Json doc = export_jani(model.pomdp, model.spec, options);
  CHECK(doc.at("name") == "maze");
  auto const& constant = doc.at("constants").at(0);
  REQUIRE(constant.contains("value"));
  CHECK(constant.at("value").at("left") == 1);
  CHECK(constant.at("value").at("right") == 7);
}

TEST_CASE("replaying the maze document rebuilds its support graph") {
  auto model = make_cheese();
  Json doc = export_jani(model.pomdp, model.spec, {});
  auto mdp = build_belief_support_mdp(model.pomdp, model.spec, {model.pomdp.initial});
  std::string why;
  bool match = test_support::jani_matches_mdp(doc, model.pomdp, mdp, &why);
  INFO(why);
  CHECK(match);
}

TEST_CASE("replaying corpus documents rebuilds their support graphs") {
  uint32_t compared = 0;
  for (auto const& model : test_support::corpus(6100, 40)) {
    if (model.pomdp.num_states() > 6) {
      continue;
    }
    Json doc = export_jani(model.pomdp, model.spec, {});
    auto mdp = build_belief_support_mdp(model.pomdp, model.spec, {model.pomdp.initial});
    std::string why;
    bool match = test_support::jani_matches_mdp(doc, model.pomdp, mdp, &why);
    INFO(why);
    CHECK(match);
    ++compared;
  }
  CHECK(compared >= 15);
}

TEST_CASE("pinned documents replay identically") {
  auto model = make_obstacle(4);
  JaniOptions options;
  options.pin_p = Rational(1, model.pomdp.num_observations());
  Json doc = export_jani(model.pomdp, model.spec, options);
  auto mdp = build_belief_support_mdp(model.pomdp, model.spec, {model.pomdp.initial});
  std::string why;
  bool match = test_support::jani_matches_mdp(doc, model.pomdp, mdp, &why);
  INFO(why);
  CHECK(match);
}
