#include <atomic>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pomdp_shield/benchmarks.hpp"
#include "pomdp_shield/driver.hpp"
#include "pomdp_shield/explicit_format.hpp"
#include "pomdp_shield/graph.hpp"
#include "pomdp_shield/jani.hpp"
#include "pomdp_shield/simulate.hpp"
#include "pomdp_shield/winning_region.hpp"

namespace {

using namespace pomdp_shield;

ExplicitModel load_model(std::string const& path) {
  if (path == "-") {
    return parse_explicit(std::cin);
  }
  std::ifstream in(path);
  if (!in) {
    throw ModelError("cannot open model file '" + path + "'");
  }
  return parse_explicit(in);
}

// Writes through a stream chosen by path: "-" means stdout.
template <typename Fn>
void with_output(std::string const& path, Fn&& fn) {
  if (path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) {
    throw ModelError("cannot open output file '" + path + "'");
  }
  fn(out);
}

std::optional<Bitset> support_from_states(std::vector<uint32_t> const& states, uint32_t n) {
  if (states.empty()) {
    return std::nullopt;
  }
  Bitset support(n);
  for (uint32_t s : states) {
    if (s >= n) {
      throw ModelError("state " + std::to_string(s) + " out of range");
    }
    support.set(s);
  }
  return support;
}

int run_gen(BenchmarkParams const& params, std::string const& out_path) {
  ExplicitModel model = generate(params);
  with_output(out_path, [&](std::ostream& out) { emit_explicit(out, model); });
  return 0;
}

struct SolveArgs {
  std::string model_path;
  std::string mode = "incremental";
  std::string goal = "fixpoint";
  std::vector<uint32_t> init_states;
  uint32_t memory = 1;
  uint32_t rank_bound = 0;
  uint32_t refresh_period = 50;
  double tombstone_factor = 2.0;
  uint64_t unfold_limit = 1u << 20;
  int64_t check_timeout_ms = 0;
  int64_t budget_ms = 0;
  bool no_preprocess = false;
  bool progress = false;
  std::string region_out;
  std::string smt_cmd;
  std::string transcript;
};

int run_solve(SolveArgs const& args) {
  ExplicitModel model = load_model(args.model_path);
  DriverConfig config;
  if (args.mode == "oneshot") {
    config.mode = SearchMode::oneshot;
  } else if (args.mode == "naive-explicit") {
    config.mode = SearchMode::naive_explicit;
  } else if (args.mode == "naive-incremental") {
    config.mode = SearchMode::naive_incremental;
  } else {
    config.mode = SearchMode::incremental;
  }
  config.goal = args.goal == "initial" ? SearchGoal::initial : SearchGoal::fixpoint;
  config.memory = args.memory;
  config.rank_bound = args.rank_bound;
  config.refresh_period = args.refresh_period;
  config.tombstone_factor = args.tombstone_factor;
  config.unfold_limit = args.unfold_limit;
  if (args.check_timeout_ms > 0) {
    config.check_timeout = std::chrono::milliseconds(args.check_timeout_ms);
  }
  if (args.budget_ms > 0) {
    config.global_budget = std::chrono::milliseconds(args.budget_ms);
  }
  config.initial_support =
      support_from_states(args.init_states, model.pomdp.num_states());
  if (!args.smt_cmd.empty()) {
    config.solver.smt_command = args.smt_cmd;
  }
  config.solver.transcript_path = args.transcript;
  if (args.no_preprocess) {
    config.graph_preprocessing = false;
  }
  if (args.progress) {
    config.progress = &std::cerr;
  }

  DriverResult result = run(model.pomdp, model.spec, config);
  std::cout << to_string(result.status) << "\n";
  std::cerr << "iterations=" << result.iterations << " solver_calls=" << result.solver_calls
            << " live_entries=" << result.region.live_count()
            << " size_estimate=" << result.region.size_estimate()
            << " elapsed_ms=" << result.elapsed.count() << "\n";
  if (!args.region_out.empty()) {
    with_output(args.region_out,
                [&](std::ostream& out) { save_region(out, model.pomdp, result.region); });
  }
  switch (result.status) {
    case SearchStatus::not_winning:
      return 1;
    case SearchStatus::budget_exceeded:
      return 3;
    default:
      return 0;
  }
}

WinningRegionStore load_region_file(std::string const& path, Pomdp const& pomdp) {
  std::ifstream in(path);
  if (!in) {
    throw ModelError("cannot open region file '" + path + "'");
  }
  return load_region(in, pomdp);
}

int run_check_region(std::string const& model_path, std::string const& region_path,
                     uint64_t cap) {
  ExplicitModel model = load_model(model_path);
  WinningRegionStore store = load_region_file(region_path, model.pomdp);
  bool failed = false;

  bool deadlock_free = is_deadlock_free(model.pomdp, store);
  std::cout << "deadlock-free: " << (deadlock_free ? "pass" : "FAIL") << "\n";
  failed |= !deadlock_free;

  try {
    bool productive = is_productive(model.pomdp, model.spec, store, cap);
    std::cout << "productive: " << (productive ? "pass" : "FAIL") << "\n";
    failed |= !productive;
  } catch (BudgetExceeded const&) {
    std::cout << "productive: skipped (node cap)\n";
  }

  try {
    WinningRegionStore oracle = maximal_winning_region(model.pomdp, model.spec, cap);
    bool sound = true;
    for (uint32_t z = 0; z < store.num_observations(); ++z) {
      for (auto const& support : store.live_entries(z)) {
        sound &= oracle.is_winning(z, support);
      }
    }
    std::cout << "oracle-sound: " << (sound ? "pass" : "FAIL") << "\n";
    failed |= !sound;
    std::cout << "oracle-complete: " << (region_equals(store, oracle) ? "yes" : "no") << "\n";
  } catch (BudgetExceeded const&) {
    std::cout << "oracle-sound: skipped (node cap)\n";
  }

  return failed ? 1 : 0;
}

struct SimulateArgs {
  std::string model_path;
  std::string region_path;
  uint64_t runs = 1;
  uint64_t seed = 0;
  uint64_t max_steps = 10000;
  int64_t start_state = -1;
  std::vector<uint32_t> init_states;
  bool unshielded = false;
  uint32_t jobs = 1;
};

int run_simulate(SimulateArgs const& args) {
  ExplicitModel model = load_model(args.model_path);
  std::optional<WinningRegionStore> store;
  if (!args.unshielded) {
    if (args.region_path.empty()) {
      throw ModelError("shielded simulation needs --region (or pass --unshielded)");
    }
    store = load_region_file(args.region_path, model.pomdp);
  }
  Shield shield{&model.pomdp, &model.spec, store ? &*store : nullptr, false};

  SimulateOptions base;
  base.start_support = support_from_states(args.init_states, model.pomdp.num_states());
  if (args.start_state >= 0) {
    base.start_state = static_cast<uint32_t>(args.start_state);
  }
  base.max_steps = args.max_steps;

  std::vector<Trace> traces(args.runs);
  uint32_t jobs = std::max(1u, args.jobs);
  std::atomic<uint64_t> next{0};
  auto worker = [&]() {
    for (uint64_t i = next.fetch_add(1); i < args.runs; i = next.fetch_add(1)) {
      SimulateOptions options = base;
      options.seed = args.seed + i;
      traces[i] = simulate(model.pomdp, model.spec, store ? &shield : nullptr, options);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (uint32_t j = 0; j < jobs; ++j) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }

  SimulationStats stats = evaluate(traces);
  nlohmann::ordered_json report;
  report["runs"] = stats.runs;
  report["violations"] = stats.violations;
  report["reached"] = stats.reached;
  report["step_limited"] = stats.step_limited;
  report["reach_rate"] = stats.reach_rate;
  report["mean_steps_to_reach"] = stats.mean_steps_to_reach;
  report["max_steps_to_reach"] = stats.max_steps_to_reach;
  std::cout << report.dump() << "\n";
  return 0;
}

int run_export_jani(std::string const& model_path, std::string const& out_path, bool pin_p,
                    std::string const& name) {
  ExplicitModel model = load_model(model_path);
  JaniOptions options;
  if (!name.empty()) {
    options.model_name = name;
  }
  if (pin_p) {
    options.pin_p = Rational(1, static_cast<long long>(model.pomdp.num_observations()));
  }
  auto doc = export_jani(model.pomdp, model.spec, options);
  with_output(out_path, [&](std::ostream& out) { write_jani(out, doc); });
  return 0;
}

int run_oracle(std::string const& model_path, std::string const& out_path, uint64_t cap) {
  ExplicitModel model = load_model(model_path);
  WinningRegionStore store = maximal_winning_region(model.pomdp, model.spec, cap);
  with_output(out_path,
              [&](std::ostream& out) { save_region(out, model.pomdp, store); });
  std::cerr << "live_entries=" << store.live_count()
            << " size_estimate=" << store.size_estimate() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Almost-sure reach-avoid winning regions and shields for POMDPs"};
  app.require_subcommand(1);

  BenchmarkParams gen_params;
  std::string gen_out = "-";
  auto* gen = app.add_subcommand("gen", "Generate a benchmark model");
  gen->add_option("--family", gen_params.family, "Model family")
      ->required()
      ->check(CLI::IsMember(
          {"cheese", "obstacle", "refuel", "rocks", "evade", "intercept", "avoid"}));
  gen->add_option("-N,--grid", gen_params.n, "Grid size");
  gen->add_option("-E,--energy", gen_params.e, "Battery capacity (refuel)");
  gen->add_option("-R,--radius", gen_params.r, "View radius (evade/intercept/avoid)");
  gen->add_option("-o,--output", gen_out, "Output path ('-' = stdout)");

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "Compute a winning region");
  solve->add_option("model", solve_args.model_path, "Explicit model file")->required();
  solve->add_option("--mode", solve_args.mode, "Search mode")
      ->check(CLI::IsMember({"oneshot", "naive-explicit", "naive-incremental", "incremental"}));
  solve->add_option("--goal", solve_args.goal, "Stop at fixpoint or once initial is winning")
      ->check(CLI::IsMember({"fixpoint", "initial"}));
  solve->add_option("--init", solve_args.init_states, "Override the initial belief support");
  solve->add_option("-m,--memory", solve_args.memory, "Memory unfolding (oneshot)");
  solve->add_option("-k,--rank-bound", solve_args.rank_bound, "Rank bound (oneshot, 0 = |S|)");
  solve->add_option("--refresh-period", solve_args.refresh_period,
                    "Incremental session refresh period");
  solve->add_option("--tombstone-factor", solve_args.tombstone_factor,
                    "Refresh when tombstones exceed factor * live entries");
  solve->add_option("--unfold-limit", solve_args.unfold_limit, "Memory unfolding state cap");
  solve->add_option("--check-timeout", solve_args.check_timeout_ms,
                    "Per-check solver deadline (ms)");
  solve->add_option("--budget", solve_args.budget_ms, "Global time budget (ms)");
  solve->add_flag("--no-preprocess", solve_args.no_preprocess,
                  "Disable graph preprocessing between iterations");
  solve->add_flag("--progress", solve_args.progress, "JSON progress lines on stderr");
  solve->add_option("-o,--region-out", solve_args.region_out, "Write the region file here");
  solve->add_option("--smt-cmd", solve_args.smt_cmd,
                    "External SMT-LIB solver command (default: in-process backend)");
  solve->add_option("--transcript", solve_args.transcript, "SMT-LIB transcript path");

  std::string check_model;
  std::string check_region;
  uint64_t check_cap = 1u << 20;
  auto* check = app.add_subcommand("check-region", "Audit a region file against its model");
  check->add_option("model", check_model, "Explicit model file")->required();
  check->add_option("region", check_region, "Region file")->required();
  check->add_option("--cap", check_cap, "Node cap for the productivity/oracle checks");

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("shield-simulate", "Run seeded episodes, optionally shielded");
  sim->add_option("model", sim_args.model_path, "Explicit model file")->required();
  sim->add_option("--region", sim_args.region_path, "Region file backing the shield");
  sim->add_option("--runs", sim_args.runs, "Number of episodes");
  sim->add_option("--seed", sim_args.seed, "Base seed; episode i uses seed+i");
  sim->add_option("--max-steps", sim_args.max_steps, "Step limit per episode");
  sim->add_option("--start-state", sim_args.start_state, "Fix the hidden start state");
  sim->add_option("--init", sim_args.init_states, "Override the start belief support");
  sim->add_flag("--unshielded", sim_args.unshielded, "Offer every enabled action");
  sim->add_option("--jobs", sim_args.jobs, "Worker threads");

  std::string jani_model;
  std::string jani_out = "-";
  std::string jani_name;
  bool jani_pin = false;
  auto* jani = app.add_subcommand("export-jani", "Export the belief-support MDP as JANI");
  jani->add_option("model", jani_model, "Explicit model file")->required();
  jani->add_option("-o,--output", jani_out, "Output path ('-' = stdout)");
  jani->add_option("--name", jani_name, "JANI model name");
  jani->add_flag("--pin-p", jani_pin, "Pin the branching constant p to 1/|observations|");

  std::string oracle_model;
  std::string oracle_out = "-";
  uint64_t oracle_cap = 1u << 20;
  auto* oracle = app.add_subcommand("oracle", "Maximal winning region by explicit enumeration");
  oracle->add_option("model", oracle_model, "Explicit model file")->required();
  oracle->add_option("-o,--output", oracle_out, "Region output path ('-' = stdout)");
  oracle->add_option("--cap", oracle_cap, "Belief-support node cap");

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      return run_gen(gen_params, gen_out);
    }
    if (solve->parsed()) {
      return run_solve(solve_args);
    }
    if (check->parsed()) {
      return run_check_region(check_model, check_region, check_cap);
    }
    if (sim->parsed()) {
      return run_simulate(sim_args);
    }
    if (jani->parsed()) {
      return run_export_jani(jani_model, jani_out, jani_pin, jani_name);
    }
    if (oracle->parsed()) {
      return run_oracle(oracle_model, oracle_out, oracle_cap);
    }
  } catch (BudgetExceeded const& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return 3;
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
