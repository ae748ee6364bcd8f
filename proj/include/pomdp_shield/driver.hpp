#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "encoding.hpp"
#include "graph.hpp"
#include "smtlib.hpp"
#include "winning_region.hpp"

namespace pomdp_shield {

enum class SearchMode { oneshot, naive_explicit, naive_incremental, incremental };
enum class SearchGoal { fixpoint, initial };
enum class SearchStatus { fixpoint, winning, not_winning, budget_exceeded };

inline char const* to_string(SearchStatus status) {
  switch (status) {
    case SearchStatus::fixpoint:
      return "fixpoint";
    case SearchStatus::winning:
      return "winning";
    case SearchStatus::not_winning:
      return "not-winning";
    case SearchStatus::budget_exceeded:
      return "budget-exceeded";
  }
  return "unknown";
}

struct DriverConfig {
  SearchMode mode = SearchMode::incremental;
  SearchGoal goal = SearchGoal::fixpoint;
  uint32_t memory = 1;      // unfolding cells, one-shot only
  uint32_t rank_bound = 0;  // one-shot path bound; 0 picks the state count
  uint32_t refresh_period = 50;
  double tombstone_factor = 2.0;
  uint64_t unfold_limit = 1u << 20;
  std::optional<std::chrono::milliseconds> check_timeout;
  std::optional<std::chrono::milliseconds> global_budget;
  std::optional<BeliefSupport> initial_support;  // defaults to the model's initial set
  SolverOptions solver;
  std::ostream* progress = nullptr;
  bool graph_preprocessing = true;
  std::function<void(uint64_t, WinningRegionStore const&)> on_iteration;
};

struct DriverResult {
  WinningRegionStore region;
  SearchStatus status = SearchStatus::fixpoint;
  uint64_t iterations = 0;
  uint64_t solver_calls = 0;
  std::chrono::milliseconds elapsed{0};
  bool initial_winning = false;
  std::vector<PolicyCandidate> policies;
};

// Closes the specification under graph reasoning on the absorbing model: states that
// cannot surely stay clear of AVOID are lost under any policy, and states from which
// every policy almost-surely reaches REACH (with the lost states made absorbing) are
// won outright. The winning supports are exactly preserved.
inline Specification extend_specification(Pomdp const& absorbed, Specification const& spec) {
  MdpGraph graph = MdpGraph::from_pomdp(absorbed);
  Specification out;
  out.avoid = mdp_safe_states(graph, spec.avoid).complement();
  Pomdp closed = make_absorbing(absorbed, Specification{spec.reach, out.avoid});
  out.reach = mdp_almost_sure_reach(MdpGraph::from_pomdp(closed), spec.reach,
                                    PolicyQuantifier::for_all);
  return out;
}

namespace detail {

inline void require_uniform_support(Pomdp const& pomdp, BeliefSupport const& b,
                                    char const* what) {
  if (b.size() != pomdp.num_states()) {
    throw ModelError(std::string(what) + " is sized for a different model");
  }
  if (b.none()) {
    throw ModelError(std::string(what) + " is empty");
  }
  uint32_t z = pomdp.observation_of[b.find_first()];
  for (uint32_t s : b) {
    if (pomdp.observation_of[s] != z) {
      throw ModelError(std::string(what) + " mixes observations");
    }
  }
}

// Shared bookkeeping of one driver run: wall clock, budget, solver call count, and the
// JSON progress stream.
struct DriverClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::optional<std::chrono::steady_clock::time_point> global_end;
  std::optional<std::chrono::milliseconds> per_check;
  uint64_t calls = 0;

  explicit DriverClock(DriverConfig const& config) : per_check(config.check_timeout) {
    if (config.global_budget) {
      global_end = start + *config.global_budget;
    }
  }

  bool out_of_time() const {
    return global_end && std::chrono::steady_clock::now() >= *global_end;
  }

  std::chrono::milliseconds elapsed() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
  }

  CheckResult check(SolverSession& session, std::vector<Formula> const& assumptions = {}) {
    std::optional<std::chrono::steady_clock::time_point> deadline = global_end;
    if (per_check) {
      auto local = std::chrono::steady_clock::now() + *per_check;
      deadline = deadline ? std::min(*deadline, local) : local;
    }
    session.set_deadline(deadline);
    ++calls;
    return session.check(assumptions);
  }
};

inline void emit_progress(DriverConfig const& config, DriverClock const& clock,
                          uint64_t iteration, WinningRegionStore const& store) {
  if (config.progress == nullptr) {
    return;
  }
  *config.progress << "{\"iteration\":" << iteration << ",\"solver_calls\":" << clock.calls
                   << ",\"live_entries\":" << store.live_count()
                   << ",\"size_estimate\":" << store.size_estimate()
                   << ",\"elapsed_ms\":" << clock.elapsed().count() << "}\n";
}

inline uint32_t inserted_supports(WinningRegionStore& store, PolicyCandidate const& candidate) {
  uint32_t added = 0;
  for (uint32_t z = 0; z < candidate.supports.size(); ++z) {
    if (candidate.supports[z].any() && store.insert(z, candidate.supports[z]).added) {
      ++added;
    }
  }
  return added;
}

}  // namespace detail

// Single bounded-rank query: is the initial support winning with a policy that commits
// to one action per observation of the memory-unfolded model, reaching REACH within
// rank_bound steps? Sound and, at rank bound |S|, complete for that policy class.
inline DriverResult run_oneshot(Pomdp const& pomdp, Specification const& spec,
                                DriverConfig const& config) {
  auto issues = validate(pomdp, spec);
  if (!issues.empty()) {
    throw ModelError(issues.front());
  }
  BeliefSupport init = config.initial_support ? *config.initial_support : pomdp.initial;
  detail::require_uniform_support(pomdp, init, "initial support");

  uint32_t m = config.memory == 0 ? 1 : config.memory;
  Pomdp model = make_absorbing(unfold_memory(pomdp, m, config.unfold_limit),
                               unfold_specification(spec, m));
  Specification target = unfold_specification(spec, m);
  bool widened = false;
  if (config.graph_preprocessing) {
    Specification extended = extend_specification(model, target);
    widened = !(extended.reach == target.reach) || !(extended.avoid == target.avoid);
    target = extended;
    model = make_absorbing(model, target);
  }
  BeliefSupport lifted = lift_support_to_first_cell(init, m);

  detail::DriverClock clock(config);
  DriverResult result;
  result.iterations = 1;
  result.region = WinningRegionStore::from_reach(pomdp, spec);

  uint32_t k = config.rank_bound == 0 ? model.num_states() : config.rank_bound;
  auto session = make_solver(config.solver);
  VariableBook book = VariableBook::for_oneshot(model, *session, k);
  for (auto const& f : encode_oneshot(model, target, lifted, book)) {
    session->assert_formula(f);
  }
  CheckResult verdict = clock.check(*session);
  if (verdict == CheckResult::sat) {
    result.status = SearchStatus::winning;
    result.initial_winning = true;
    PolicyCandidate candidate = decode(session->model(), book, model);
    result.policies.push_back(candidate);
    // A certificate against a widened specification proves the initial support
    // winning but not that the decoded supports win for the bare one, so the
    // published region then keeps only the always-sound seed entries.
    if (!widened) {
      if (m == 1) {
        detail::inserted_supports(result.region, candidate);
      } else {
        result.region.insert(observation_of_support(pomdp, init), init);
      }
    }
  } else if (verdict == CheckResult::unsat) {
    result.status = SearchStatus::not_winning;
  } else {
    result.status = SearchStatus::budget_exceeded;
  }
  result.solver_calls = clock.calls;
  result.elapsed = clock.elapsed();
  if (config.on_iteration) {
    config.on_iteration(result.iterations, result.region);
  }
  detail::emit_progress(config, clock, result.iterations, result.region);
  return result;
}

// Region search that records found policies as explicit jump actions on an extended
// model with accepting and rejecting sinks. Every iteration re-encodes the grown model
// in a fresh session.
inline DriverResult run_naive_explicit(Pomdp const& pomdp, Specification const& spec,
                                       DriverConfig const& config) {
  auto issues = validate(pomdp, spec);
  if (!issues.empty()) {
    throw ModelError(issues.front());
  }
  BeliefSupport init = config.initial_support ? *config.initial_support : pomdp.initial;
  detail::require_uniform_support(pomdp, init, "initial support");

  ShortcutExtension ext = begin_shortcuts(make_absorbing(pomdp, spec), spec);
  BeliefSupport init_ext(ext.pomdp.num_states());
  for (uint32_t s : init) {
    init_ext.set(s);
  }
  WinningRegionStore store = WinningRegionStore::from_reach(ext.pomdp, ext.spec);

  detail::DriverClock clock(config);
  DriverResult result;
  bool initial_winning = false;

  auto projected = [&]() {
    WinningRegionStore out(pomdp.num_observations(), pomdp.num_states());
    for (uint32_t z = 0; z < pomdp.num_observations(); ++z) {
      for (Bitset const& entry : store.live_entries(z)) {
        Bitset cut(pomdp.num_states());
        for (uint32_t s : entry) {
          cut.set(s);
        }
        out.insert(z, cut);
      }
    }
    return out;
  };
  auto finalize = [&](SearchStatus status) {
    result.status = status;
    result.region = projected();
    result.initial_winning = initial_winning || result.region.is_winning(pomdp, init);
    // The fixpoint region is complete, so a start support it misses is lost for sure.
    if (status == SearchStatus::fixpoint && config.goal == SearchGoal::initial &&
        !result.initial_winning) {
      result.status = SearchStatus::not_winning;
    }
    result.solver_calls = clock.calls;
    result.elapsed = clock.elapsed();
    return result;
  };
  auto record = [&](PolicyCandidate const& candidate) {
    detail::inserted_supports(store, candidate);
    Bitset covered(ext.original_states);
    for (uint32_t s : candidate.reached) {
      if (s < ext.original_states) {
        covered.set(s);
      }
    }
    add_shortcut(ext, covered);
    result.policies.push_back(candidate);
  };

  while (true) {
    if (clock.out_of_time()) {
      return finalize(SearchStatus::budget_exceeded);
    }
    ++result.iterations;
    if (!initial_winning && store.is_winning(ext.pomdp, init_ext)) {
      initial_winning = true;
    }
    if (!initial_winning) {
      auto session = make_solver(config.solver);
      VariableBook book = VariableBook::for_naive(ext.pomdp, *session);
      for (auto const& f : encode_naive(ext.pomdp, ext.spec, book)) {
        session->assert_formula(f);
      }
      for (uint32_t s : init_ext) {
        session->assert_formula(Formula::bool_var(book.reached[s]));
      }
      CheckResult verdict = clock.check(*session);
      if (verdict == CheckResult::unknown) {
        return finalize(SearchStatus::budget_exceeded);
      }
      if (verdict == CheckResult::sat) {
        record(decode(session->model(), book, ext.pomdp));
        initial_winning = true;
      }
    }
    if (initial_winning && config.goal == SearchGoal::initial) {
      if (config.on_iteration) {
        config.on_iteration(result.iterations, projected());
      }
      return finalize(SearchStatus::winning);
    }

    auto session = make_solver(config.solver);
    VariableBook book = VariableBook::for_naive(ext.pomdp, *session);
    for (auto const& f : encode_naive(ext.pomdp, ext.spec, book)) {
      session->assert_formula(f);
    }
    for (auto const& f : encode_progress(ext.pomdp, store, book)) {
      session->assert_formula(f);
    }
    CheckResult verdict = clock.check(*session);
    if (verdict == CheckResult::unknown) {
      return finalize(SearchStatus::budget_exceeded);
    }
    if (verdict == CheckResult::sat) {
      record(decode(session->model(), book, ext.pomdp));
    }
    WinningRegionStore snapshot = projected();
    if (config.on_iteration) {
      config.on_iteration(result.iterations, snapshot);
    }
    detail::emit_progress(config, clock, result.iterations, snapshot);
    if (verdict == CheckResult::unsat) {
      return finalize(SearchStatus::fixpoint);
    }
  }
}

// Region search with the switching encoding, re-encoded from scratch in a fresh
// session every iteration. The baseline the single-session driver is measured against.
inline DriverResult run_naive_incremental(Pomdp const& pomdp, Specification const& spec,
                                          DriverConfig const& config) {
  auto issues = validate(pomdp, spec);
  if (!issues.empty()) {
    throw ModelError(issues.front());
  }
  BeliefSupport init = config.initial_support ? *config.initial_support : pomdp.initial;
  detail::require_uniform_support(pomdp, init, "initial support");

  Pomdp model = make_absorbing(pomdp, spec);
  WinningRegionStore store = WinningRegionStore::from_reach(model, spec);

  detail::DriverClock clock(config);
  DriverResult result;
  bool initial_winning = false;
  std::vector<uint32_t> from_start(model.num_observations(), 1);

  auto finalize = [&](SearchStatus status) {
    result.status = status;
    result.initial_winning = initial_winning || store.is_winning(model, init);
    if (status == SearchStatus::fixpoint && config.goal == SearchGoal::initial &&
        !result.initial_winning) {
      result.status = SearchStatus::not_winning;
    }
    result.region = std::move(store);
    result.solver_calls = clock.calls;
    result.elapsed = clock.elapsed();
    return result;
  };
  auto encode_all = [&](SolverSession& session, VariableBook const& book) {
    for (auto const& f : encode_fixed_core(model, spec, book)) {
      session.assert_formula(f);
    }
    for (auto const& f : encode_entry_constraints(model, store, book, from_start)) {
      session.assert_formula(f);
    }
    for (auto const& f : encode_bounds(model, store, book)) {
      session.assert_formula(f);
    }
  };

  while (true) {
    if (clock.out_of_time()) {
      return finalize(SearchStatus::budget_exceeded);
    }
    ++result.iterations;
    if (!initial_winning && store.is_winning(model, init)) {
      initial_winning = true;
    }
    if (!initial_winning) {
      auto session = make_solver(config.solver);
      VariableBook book = VariableBook::for_incremental(model, *session);
      encode_all(*session, book);
      for (uint32_t s : init) {
        session->assert_formula(Formula::bool_var(book.reached[s]));
      }
      CheckResult verdict = clock.check(*session);
      if (verdict == CheckResult::unknown) {
        return finalize(SearchStatus::budget_exceeded);
      }
      if (verdict == CheckResult::sat) {
        PolicyCandidate candidate = decode(session->model(), book, model);
        detail::inserted_supports(store, candidate);
        result.policies.push_back(candidate);
        initial_winning = true;
      }
    }
    if (initial_winning && config.goal == SearchGoal::initial) {
      if (config.on_iteration) {
        config.on_iteration(result.iterations, store);
      }
      return finalize(SearchStatus::winning);
    }

    auto session = make_solver(config.solver);
    VariableBook book = VariableBook::for_incremental(model, *session);
    encode_all(*session, book);
    for (auto const& f : encode_progress(model, store, book)) {
      session->assert_formula(f);
    }
    CheckResult verdict = clock.check(*session);
    if (verdict == CheckResult::unknown) {
      return finalize(SearchStatus::budget_exceeded);
    }
    if (verdict == CheckResult::sat) {
      PolicyCandidate candidate = decode(session->model(), book, model);
      detail::inserted_supports(store, candidate);
      result.policies.push_back(candidate);
    }
    if (config.on_iteration) {
      config.on_iteration(result.iterations, store);
    }
    detail::emit_progress(config, clock, result.iterations, store);
    if (verdict == CheckResult::unsat) {
      return finalize(SearchStatus::fixpoint);
    }
  }
}

// Single-session region search. The win-independent core and the per-entry exclusions
// live at the base level; the moving pick bounds and the progress constraint live in a
// scope that is popped and re-pushed whenever the store grows. Chosen actions of
// progressing observations are pinned as assumptions for the next check, and the
// session is rebuilt periodically so popped scopes do not accumulate.
inline DriverResult run_incremental(Pomdp const& pomdp, Specification const& spec,
                                    DriverConfig const& config) {
  auto issues = validate(pomdp, spec);
  if (!issues.empty()) {
    throw ModelError(issues.front());
  }
  BeliefSupport init = config.initial_support ? *config.initial_support : pomdp.initial;
  detail::require_uniform_support(pomdp, init, "initial support");

  Pomdp model = make_absorbing(pomdp, spec);
  WinningRegionStore store = WinningRegionStore::from_reach(model, spec);
  if (config.graph_preprocessing) {
    store = winning_observations_fixpoint(model, spec, std::move(store));
  }

  detail::DriverClock clock(config);
  DriverResult result;
  bool initial_winning = false;

  std::unique_ptr<SolverSession> session;
  VariableBook book;
  std::vector<uint32_t> next_entry(model.num_observations(), 1);
  std::vector<std::pair<uint32_t, uint32_t>> pins;  // (observation, action)
  uint64_t since_refresh = 0;

  // Every recorded entry, tombstoned or not, keeps its exclusion constraints; indices
  // stay valid across rebuilds.
  auto sync_entries = [&]() {
    for (auto const& f : encode_entry_constraints(model, store, book, next_entry)) {
      session->assert_formula(f);
    }
    for (uint32_t z = 0; z < model.num_observations(); ++z) {
      next_entry[z] = store.entry_count(z) + 1;
    }
  };
  auto rebuild = [&]() {
    session = make_solver(config.solver);
    book = VariableBook::for_incremental(model, *session);
    for (auto const& f : encode_fixed_core(model, spec, book)) {
      session->assert_formula(f);
    }
    std::fill(next_entry.begin(), next_entry.end(), 1u);
    sync_entries();
    since_refresh = 0;
  };
  auto finalize = [&](SearchStatus status) {
    result.status = status;
    result.initial_winning = initial_winning || store.is_winning(model, init);
    if (status == SearchStatus::fixpoint && config.goal == SearchGoal::initial &&
        !result.initial_winning) {
      result.status = SearchStatus::not_winning;
    }
    result.region = std::move(store);
    result.solver_calls = clock.calls;
    result.elapsed = clock.elapsed();
    return result;
  };
  auto absorb = [&](PolicyCandidate const& candidate) {
    result.policies.push_back(candidate);
    detail::inserted_supports(store, candidate);
    if (config.graph_preprocessing) {
      store = winning_observations_fixpoint(model, spec, std::move(store));
    }
    sync_entries();
  };

  rebuild();
  while (true) {
    if (clock.out_of_time()) {
      return finalize(SearchStatus::budget_exceeded);
    }
    ++result.iterations;
    ++since_refresh;
    if (since_refresh > config.refresh_period ||
        store.tombstone_count() >
            config.tombstone_factor * std::max<uint32_t>(1, store.live_count())) {
      rebuild();
    }

    if (!initial_winning && store.is_winning(model, init)) {
      initial_winning = true;
    }
    if (!initial_winning) {
      session->push();
      for (auto const& f : encode_bounds(model, store, book)) {
        session->assert_formula(f);
      }
      for (uint32_t s : init) {
        session->assert_formula(Formula::bool_var(book.reached[s]));
      }
      CheckResult verdict = clock.check(*session);
      std::optional<PolicyCandidate> candidate;
      if (verdict == CheckResult::sat) {
        candidate = decode(session->model(), book, model);
      }
      session->pop();
      if (verdict == CheckResult::unknown) {
        return finalize(SearchStatus::budget_exceeded);
      }
      if (candidate) {
        absorb(*candidate);
        initial_winning = true;
      }
    }
    if (initial_winning && config.goal == SearchGoal::initial) {
      if (config.on_iteration) {
        config.on_iteration(result.iterations, store);
      }
      return finalize(SearchStatus::winning);
    }

    session->push();
    for (auto const& f : encode_bounds(model, store, book)) {
      session->assert_formula(f);
    }
    for (auto const& f : encode_progress(model, store, book)) {
      session->assert_formula(f);
    }
    bool grew = false;
    while (true) {
      std::vector<Formula> assumptions;
      assumptions.reserve(pins.size());
      for (auto const& [z, a] : pins) {
        assumptions.push_back(Formula::bool_var(book.action_var(z, a)));
      }
      CheckResult verdict = clock.check(*session, assumptions);
      if (verdict == CheckResult::unknown) {
        session->pop();
        return finalize(SearchStatus::budget_exceeded);
      }
      if (verdict == CheckResult::unsat) {
        if (!pins.empty()) {
          // The pinned actions ran dry; retry the same scope unconstrained.
          pins.clear();
          continue;
        }
        session->pop();
        if (config.on_iteration) {
          config.on_iteration(result.iterations, store);
        }
        detail::emit_progress(config, clock, result.iterations, store);
        return finalize(SearchStatus::fixpoint);
      }
      PolicyCandidate candidate = decode(session->model(), book, model);
      session->pop();
      absorb(candidate);
      pins.clear();
      for (uint32_t z = 0; z < model.num_observations(); ++z) {
        if (candidate.progressed[z]) {
          for (uint32_t a : candidate.chosen_actions[z]) {
            pins.emplace_back(z, a);
          }
        }
      }
      grew = true;
      break;
    }
    (void)grew;
    if (config.on_iteration) {
      config.on_iteration(result.iterations, store);
    }
    detail::emit_progress(config, clock, result.iterations, store);
  }
}

inline DriverResult run(Pomdp const& pomdp, Specification const& spec,
                        DriverConfig const& config) {
  switch (config.mode) {
    case SearchMode::oneshot:
      return run_oneshot(pomdp, spec, config);
    case SearchMode::naive_explicit:
      return run_naive_explicit(pomdp, spec, config);
    case SearchMode::naive_incremental:
      return run_naive_incremental(pomdp, spec, config);
    case SearchMode::incremental:
      return run_incremental(pomdp, spec, config);
  }
  throw ModelError("unknown search mode");
}

}  // namespace pomdp_shield
