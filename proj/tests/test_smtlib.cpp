#include <catch2/catch_amalgamated.hpp>

#include <pomdp_shield/benchmarks.hpp>
#include <pomdp_shield/driver.hpp>
#include <pomdp_shield/smtlib.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace pomdp_shield;

namespace {

std::string mock_command() {
  return "python3 " + std::string(TEST_SOURCE_DIR) + "/mock_smt_solver.py";
}

void set_plan(char const* plan) { setenv("MOCK_SMT_PLAN", plan, 1); }

}  // namespace

TEST_CASE("external solver protocol happy path") {
  set_plan("sat");
  SmtLibSolver solver(mock_command());
  VarId p = solver.declare_boolean("p");
  VarId x = solver.declare_bounded_int("x", 0, 4);
  VarId r = solver.declare_rank("r");
  solver.assert_formula(Formula::bool_var(p));
  REQUIRE(solver.check() == CheckResult::sat);
  // The stub answers with sort-appropriate constants.
  CHECK(solver.model().bool_value(p));
  CHECK(solver.model().int_value(x, 0) == 0);
  CHECK(solver.model().rank_value(r) == Rational(1, 2));
}

TEST_CASE("external solver verdicts pass through") {
  set_plan("unsat,unknown");
  SmtLibSolver solver(mock_command());
  VarId p = solver.declare_boolean("p");
  solver.assert_formula(Formula::bool_var(p));
  CHECK(solver.check() == CheckResult::unsat);
  CHECK(solver.check() == CheckResult::unknown);
}

TEST_CASE("nonsense replies are refused") {
  set_plan("garbage");
  SmtLibSolver solver(mock_command());
  solver.assert_formula(Formula::constant(true));
  CHECK_THROWS_AS(solver.check(), ModelError);
}

TEST_CASE("a stalling solver is killed at the deadline") {
  set_plan("sleep");
  SmtLibSolver solver(mock_command());
  VarId p = solver.declare_boolean("p");
  solver.assert_formula(Formula::bool_var(p));
  auto start = std::chrono::steady_clock::now();
  solver.set_deadline(start + std::chrono::milliseconds(200));
  CHECK(solver.check() == CheckResult::unknown);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
  // The child is gone; later checks degrade to unknown instead of hanging.
  CHECK(solver.check() == CheckResult::unknown);
}

TEST_CASE("a missing solver binary fails loudly") {
  CHECK_THROWS_AS(SmtLibSolver("/no/such/solver/binary"), ModelError);
}

TEST_CASE("transcript records the conversation") {
  set_plan("unsat,sat");
  std::string path = std::string(TEST_BINARY_DIR) + "/transcript.smt2";
  {
    SmtLibSolver solver(mock_command(), path);
    VarId p = solver.declare_boolean("p");
    solver.push();
    solver.assert_formula(Formula::negate(Formula::bool_var(p)));
    CHECK(solver.check({Formula::bool_var(p)}) == CheckResult::unsat);
    solver.pop();
    CHECK(solver.check() == CheckResult::sat);
  }
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  CHECK(text.find("(set-logic QF_LIRA)") != std::string::npos);
  CHECK(text.find("(declare-const p Bool)") != std::string::npos);
  CHECK(text.find("(push 1)") != std::string::npos);
  CHECK(text.find("(check-sat-assuming (p))") != std::string::npos);
  CHECK(text.find("(pop 1)") != std::string::npos);
  CHECK(text.find(";; unsat") != std::string::npos);
}

TEST_CASE("solver selection prefers the explicit command") {
  SolverOptions options;
  CHECK(dynamic_cast<InternalSolver*>(make_solver(options).get()) != nullptr);

  set_plan("sat");
  options.smt_command = mock_command();
  CHECK(dynamic_cast<SmtLibSolver*>(make_solver(options).get()) != nullptr);

  options.smt_command.reset();
  setenv("POMDP_SHIELD_SMT_CMD", mock_command().c_str(), 1);
  CHECK(dynamic_cast<SmtLibSolver*>(make_solver(options).get()) != nullptr);
  unsetenv("POMDP_SHIELD_SMT_CMD");
}

TEST_CASE("driver runs against an external solver") {
  // A stub that always answers unsat leaves the search empty-handed: the maze
  // start is reported not winning even though the internal solver proves it.
  set_plan("unsat");
  auto model = make_cheese();
  DriverConfig config;
  config.mode = SearchMode::oneshot;
  config.goal = SearchGoal::initial;
  config.solver.smt_command = mock_command();
  DriverResult result = run(model.pomdp, model.spec, config);
  CHECK(result.status == SearchStatus::not_winning);
  CHECK(result.solver_calls >= 1);
}
