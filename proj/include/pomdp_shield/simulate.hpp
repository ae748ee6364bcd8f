#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pomdp.hpp"
#include "winning_region.hpp"

namespace pomdp_shield {

enum class AgentKind { uniform_random, fixed_policy };
enum class TraceOutcome { reached, avoid_violation, step_limit };

inline char const* to_string(TraceOutcome outcome) {
  switch (outcome) {
    case TraceOutcome::reached:
      return "reached";
    case TraceOutcome::avoid_violation:
      return "avoided-violation";
    case TraceOutcome::step_limit:
      return "step-limit";
  }
  return "unknown";
}

struct TraceStep {
  uint32_t state = 0;
  uint32_t observation = 0;
  BeliefSupport support;
  std::vector<uint32_t> offered;
  uint32_t chosen = 0;
};

struct Trace {
  uint64_t seed = 0;
  std::vector<TraceStep> steps;
  TraceOutcome outcome = TraceOutcome::step_limit;
  uint64_t avoid_visits = 0;
};

struct SimulateOptions {
  std::optional<BeliefSupport> start_support;  // defaults to the model's initial set
  std::optional<uint32_t> start_state;         // defaults to a uniform sample
  AgentKind agent = AgentKind::uniform_random;
  uint64_t seed = 0;
  uint64_t max_steps = 10000;
};

namespace detail {

// 53-bit mantissa draw in [0, 1).
inline double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline uint32_t sample_successor(TransitionRow const& row, std::mt19937_64& rng) {
  double draw = unit_double(rng);
  double total = 0.0;
  for (auto const& entry : row.entries) {
    total += to_double(entry.weight);
  }
  double mark = draw * total;
  double acc = 0.0;
  for (auto const& entry : row.entries) {
    acc += to_double(entry.weight);
    if (mark < acc) {
      return entry.successor;
    }
  }
  return row.entries.back().successor;
}

}  // namespace detail

// One episode with qualitative belief tracking. The agent picks among the offered
// actions (the shield's allowed set when present, all enabled ones otherwise); the
// environment samples the successor state; the support follows the observation-
// restricted update. Ends when the support sits inside REACH, the sampled state enters
// AVOID, or the step limit runs out.
inline Trace simulate(Pomdp const& pomdp, Specification const& spec, Shield const* shield,
                      SimulateOptions const& options) {
  BeliefSupport support = options.start_support ? *options.start_support : pomdp.initial;
  if (support.none()) {
    throw ModelError("simulation needs a nonempty start support");
  }
  uint32_t z = observation_of_support(pomdp, support);
  for (uint32_t s : support) {
    if (pomdp.observation_of[s] != z) {
      throw ModelError("start support mixes observations");
    }
  }
  if (shield != nullptr && !shield->region->is_winning(pomdp, support)) {
    throw ModelError("shield undefined: start support is not winning");
  }

  std::mt19937_64 rng(options.seed);
  Trace trace;
  trace.seed = options.seed;

  uint32_t state;
  if (options.start_state) {
    state = *options.start_state;
    if (state >= pomdp.num_states() || !support.get(state)) {
      throw ModelError("start state lies outside the start support");
    }
  } else {
    auto members = support.to_indices();
    state = members[rng() % members.size()];
  }

  while (true) {
    if (support.is_subset_of(spec.reach)) {
      trace.outcome = TraceOutcome::reached;
      return trace;
    }
    if (trace.steps.size() >= options.max_steps) {
      trace.outcome = TraceOutcome::step_limit;
      return trace;
    }
    if (!support.get(state)) {
      throw ModelError("simulated state escaped the tracked support");
    }

    TraceStep step;
    step.state = state;
    step.observation = pomdp.observation_of[state];
    step.support = support;
    step.offered = shield != nullptr
                       ? shield->allowed(support)
                       : pomdp.enabled_actions_of_observation(step.observation);
    if (step.offered.empty()) {
      throw ModelError("no action offered at " + support.to_string());
    }
    step.chosen = options.agent == AgentKind::uniform_random
                      ? step.offered[rng() % step.offered.size()]
                      : step.offered.front();

    TransitionRow const* row = pomdp.row(state, step.chosen);
    if (row == nullptr || row->entries.empty()) {
      throw ModelError("chosen action has no transition row");
    }
    uint32_t next = detail::sample_successor(*row, rng);
    BeliefSupport next_support;
    for (auto const& candidate : support_update(pomdp, support, step.chosen)) {
      if (candidate.get(next)) {
        next_support = candidate;
        break;
      }
    }
    if (next_support.none()) {
      throw ModelError("successor state missing from every updated support");
    }

    trace.steps.push_back(std::move(step));
    state = next;
    support = std::move(next_support);
    if (spec.avoid.get(state)) {
      trace.avoid_visits += 1;
      trace.outcome = TraceOutcome::avoid_violation;
      return trace;
    }
  }
}

struct SimulationStats {
  uint64_t runs = 0;
  uint64_t violations = 0;
  uint64_t reached = 0;
  uint64_t step_limited = 0;
  double reach_rate = 0.0;
  double mean_steps_to_reach = 0.0;
  uint64_t max_steps_to_reach = 0;
};

inline SimulationStats evaluate(std::vector<Trace> const& traces) {
  SimulationStats stats;
  stats.runs = traces.size();
  uint64_t total_steps = 0;
  for (auto const& trace : traces) {
    switch (trace.outcome) {
      case TraceOutcome::reached:
        stats.reached += 1;
        total_steps += trace.steps.size();
        stats.max_steps_to_reach = std::max<uint64_t>(stats.max_steps_to_reach,
                                                      trace.steps.size());
        break;
      case TraceOutcome::avoid_violation:
        stats.violations += 1;
        break;
      case TraceOutcome::step_limit:
        stats.step_limited += 1;
        break;
    }
  }
  if (stats.runs > 0) {
    stats.reach_rate = static_cast<double>(stats.reached) / static_cast<double>(stats.runs);
  }
  if (stats.reached > 0) {
    stats.mean_steps_to_reach =
        static_cast<double>(total_steps) / static_cast<double>(stats.reached);
  }
  return stats;
}

}  // namespace pomdp_shield
