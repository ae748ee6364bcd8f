#pragma once

// Shared fixtures for the suite: a seeded random-model corpus, a brute-force
// policy-enumeration oracle for tiny belief-support MDPs, and a reference
// interpreter that replays exported JANI documents edge by edge.

#include <pomdp_shield/benchmarks.hpp>
#include <pomdp_shield/driver.hpp>
#include <pomdp_shield/explicit_format.hpp>
#include <pomdp_shield/graph.hpp>
#include <pomdp_shield/jani.hpp>
#include <pomdp_shield/pomdp.hpp>
#include <pomdp_shield/winning_region.hpp>

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace test_support {

using namespace pomdp_shield;

inline BeliefSupport support_of(uint32_t num_states, std::initializer_list<uint32_t> states) {
  BeliefSupport b(num_states);
  for (uint32_t s : states) {
    b.set(s);
  }
  return b;
}

// Seeded generator for small well-formed models: at most 8 states, 3 actions and
// 4 observations, enabled sets chosen per observation, exact rational weights,
// disjoint REACH/AVOID, observation-uniform initial support. The result is already
// absorbing and passes validate(). REACH is a union of whole observation classes:
// with a visible goal the belief support collapses into REACH the moment the state
// enters it, which makes the belief-support abstraction exact. A hidden goal breaks
// that: a state-level certificate can reach REACH almost surely while the support
// keeps dead weight forever and never meets lifted REACH, so solver regions and the
// support-MDP oracle would legitimately disagree.
inline ExplicitModel random_model(uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](uint32_t lo, uint32_t hi) {
    return lo + static_cast<uint32_t>(rng() % (hi - lo + 1));
  };

  ExplicitModel model;
  Pomdp& pomdp = model.pomdp;
  uint32_t num_states = pick(2, 8);
  uint32_t num_actions = pick(1, 3);
  uint32_t num_obs = pick(1, std::min<uint32_t>(4, num_states));

  for (uint32_t a = 0; a < num_actions; ++a) {
    pomdp.action_names.push_back("act" + std::to_string(a));
  }
  for (uint32_t z = 0; z < num_obs; ++z) {
    pomdp.observation_names.push_back("obs" + std::to_string(z));
  }
  // The first num_obs states pin one state per class so every observation occurs.
  pomdp.observation_of.resize(num_states);
  for (uint32_t s = 0; s < num_states; ++s) {
    pomdp.observation_of[s] = s < num_obs ? s : pick(0, num_obs - 1);
  }

  std::vector<std::vector<uint32_t>> enabled(num_obs);
  for (uint32_t z = 0; z < num_obs; ++z) {
    for (uint32_t a = 0; a < num_actions; ++a) {
      if (rng() % 2 == 0) {
        enabled[z].push_back(a);
      }
    }
    if (enabled[z].empty()) {
      enabled[z].push_back(pick(0, num_actions - 1));
    }
  }

  // Transition rows are drawn at the class level first: every state of a class
  // moves to the same target classes with the same class probabilities, and only
  // the concrete successors inside each target class vary per state. Class-uniform
  // branching makes each observation branch fire with a belief-independent constant
  // probability, so the support process is exactly the finite support-MDP chain and
  // the abstraction is exact. Without it, conditional mass can pile onto a
  // sub-support that never leaves a branch, the real exit probability decays to
  // zero, and the support MDP certifies wins the true process loses with positive
  // probability.
  std::vector<std::vector<uint32_t>> class_members(num_obs);
  for (uint32_t s = 0; s < num_states; ++s) {
    class_members[pomdp.observation_of[s]].push_back(s);
  }
  pomdp.rows.resize(num_states);
  for (uint32_t z = 0; z < num_obs; ++z) {
    for (uint32_t a : enabled[z]) {
      uint32_t fanout = pick(1, std::min<uint32_t>(3, num_obs));
      std::set<uint32_t> target_classes;
      while (target_classes.size() < fanout) {
        target_classes.insert(pick(0, num_obs - 1));
      }
      long long total = 0;
      std::vector<long long> weights;
      for (std::size_t i = 0; i < target_classes.size(); ++i) {
        weights.push_back(static_cast<long long>(pick(1, 4)));
        total += weights.back();
      }
      for (uint32_t s : class_members[z]) {
        std::vector<TransitionEntry> entries;
        std::size_t i = 0;
        for (uint32_t zt : target_classes) {
          Rational branch(weights[i++], total);
          auto const& pool = class_members[zt];
          uint32_t first = pool[pick(0, static_cast<uint32_t>(pool.size()) - 1)];
          uint32_t second = pool[pick(0, static_cast<uint32_t>(pool.size()) - 1)];
          if (first != second && rng() % 2 == 0) {
            long long u = pick(1, 3);
            long long v = pick(1, 3);
            entries.push_back(TransitionEntry{first, branch * Rational(u, u + v)});
            entries.push_back(TransitionEntry{second, branch * Rational(v, u + v)});
          } else {
            entries.push_back(TransitionEntry{first, branch});
          }
        }
        std::sort(entries.begin(), entries.end(),
                  [](TransitionEntry const& lhs, TransitionEntry const& rhs) {
                    return lhs.successor < rhs.successor;
                  });
        pomdp.rows[s].push_back(TransitionRow{a, std::move(entries)});
      }
    }
  }

  model.spec.reach = Bitset(num_states);
  model.spec.avoid = Bitset(num_states);
  // The goal observation is a least-populated class so REACH stays small and most
  // models keep genuinely uncertain starts; larger goals appear occasionally.
  std::vector<uint32_t> class_size(num_obs, 0);
  for (uint32_t s = 0; s < num_states; ++s) {
    ++class_size[pomdp.observation_of[s]];
  }
  uint32_t goal_obs = static_cast<uint32_t>(
      std::min_element(class_size.begin(), class_size.end()) - class_size.begin());
  std::vector<bool> reach_class(num_obs, false);
  reach_class[goal_obs] = true;
  for (uint32_t z = 0; z < num_obs; ++z) {
    if (z != goal_obs && num_obs > 2 && rng() % 4 == 0) {
      reach_class[z] = true;
    }
  }
  for (uint32_t s = 0; s < num_states; ++s) {
    if (reach_class[pomdp.observation_of[s]]) {
      model.spec.reach.set(s);
    } else if (rng() % 6 == 0) {
      model.spec.avoid.set(s);
    }
  }

  uint32_t init_obs = pick(0, num_obs - 1);
  pomdp.initial = Bitset(num_states);
  for (uint32_t s = 0; s < num_states; ++s) {
    if (pomdp.observation_of[s] == init_obs && rng() % 2 == 0) {
      pomdp.initial.set(s);
    }
  }
  if (pomdp.initial.none()) {
    for (uint32_t s = 0; s < num_states; ++s) {
      if (pomdp.observation_of[s] == init_obs) {
        pomdp.initial.set(s);
        break;
      }
    }
  }

  pomdp = make_absorbing(std::move(pomdp), model.spec);
  auto issues = validate(pomdp, model.spec, true);
  if (!issues.empty()) {
    throw ModelError("random model " + std::to_string(seed) + ": " + issues.front());
  }
  return model;
}

inline std::vector<ExplicitModel> corpus(uint64_t base_seed, std::size_t count) {
  std::vector<ExplicitModel> models;
  models.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    models.push_back(random_model(base_seed + i));
  }
  return models;
}

// Nodes of an explicit MDP that some deterministic memoryless policy wins from:
// the induced chain never meets avoid_lifted and reaches reach_lifted almost
// surely. Enumerates every policy outright, so callers must keep the graph tiny.
inline Bitset policy_enumeration_winning(ExplicitBeliefSupportMdp const& mdp) {
  uint32_t n = mdp.num_nodes();
  Bitset winning(n);
  std::vector<uint32_t> choice(n, 0);
  for (;;) {
    // Chain successor sets under the current policy.
    std::vector<std::vector<uint32_t> const*> succ(n, nullptr);
    for (uint32_t v = 0; v < n; ++v) {
      succ[v] = &mdp.graph.nodes[v][choice[v]].succ;
    }
    // can_reach: backward closure of the reach nodes inside the chain.
    Bitset can_reach = mdp.reach_lifted;
    bool grew = true;
    while (grew) {
      grew = false;
      for (uint32_t v = 0; v < n; ++v) {
        if (can_reach.get(v)) {
          continue;
        }
        for (uint32_t w : *succ[v]) {
          if (can_reach.get(w)) {
            can_reach.set(v);
            grew = true;
            break;
          }
        }
      }
    }
    // A node wins when everything it can reach stays out of avoid and keeps a
    // path to the target: in a finite chain that pins the reach probability to 1.
    for (uint32_t start = 0; start < n; ++start) {
      if (winning.get(start)) {
        continue;
      }
      Bitset seen(n);
      seen.set(start);
      std::deque<uint32_t> frontier{start};
      bool good = true;
      while (good && !frontier.empty()) {
        uint32_t v = frontier.front();
        frontier.pop_front();
        if (mdp.avoid_lifted.get(v) || !can_reach.get(v)) {
          good = false;
          break;
        }
        for (uint32_t w : *succ[v]) {
          if (!seen.get(w)) {
            seen.set(w);
            frontier.push_back(w);
          }
        }
      }
      if (good) {
        winning.set(start);
      }
    }
    // Mixed-radix increment over per-node action choices.
    uint32_t v = 0;
    for (; v < n; ++v) {
      if (++choice[v] < mdp.graph.nodes[v].size()) {
        break;
      }
      choice[v] = 0;
    }
    if (v == n) {
      break;
    }
  }
  return winning;
}

// ---------------------------------------------------------------------------
// Reference JANI interpreter. Replays the exported document: evaluates guards
// and assignments over (belsup, newobs, lact), contracts every alpha_bot
// half-step, and rebuilds the reachable belief-support MDP for comparison.

namespace jani_replay {

using Json = nlohmann::ordered_json;

struct State {
  Bitset belsup;
  long long newobs = -1;
  long long lact = -1;
};

struct Value {
  bool is_bool = false;
  bool b = false;
  long long i = 0;
};

inline Value eval(Json const& expr, State const& state) {
  Value out;
  if (expr.is_boolean()) {
    out.is_bool = true;
    out.b = expr.get<bool>();
    return out;
  }
  if (expr.is_number()) {
    out.i = expr.get<long long>();
    return out;
  }
  if (expr.is_string()) {
    std::string name = expr.get<std::string>();
    if (name == "newobs") {
      out.i = state.newobs;
      return out;
    }
    if (name == "lact") {
      out.i = state.lact;
      return out;
    }
    if (name.rfind("belsup_", 0) == 0) {
      out.is_bool = true;
      out.b = state.belsup.get(static_cast<uint32_t>(std::stoul(name.substr(7))));
      return out;
    }
    throw ModelError("jani replay: unknown identifier " + name);
  }
  std::string op = expr.at("op").get<std::string>();
  if (op == "∧") {
    out.is_bool = true;
    out.b = eval(expr.at("left"), state).b && eval(expr.at("right"), state).b;
    return out;
  }
  if (op == "∨") {
    out.is_bool = true;
    out.b = eval(expr.at("left"), state).b || eval(expr.at("right"), state).b;
    return out;
  }
  if (op == "¬") {
    out.is_bool = true;
    out.b = !eval(expr.at("exp"), state).b;
    return out;
  }
  if (op == "=") {
    out.is_bool = true;
    out.b = eval(expr.at("left"), state).i == eval(expr.at("right"), state).i;
    return out;
  }
  if (op == "≥") {
    out.is_bool = true;
    out.b = eval(expr.at("left"), state).i >= eval(expr.at("right"), state).i;
    return out;
  }
  throw ModelError("jani replay: unsupported operator " + op);
}

// Whether a probability expression is positive. The branch weight is either a
// literal, the parameter p (positive by assumption), or ite(cond, p, 0).
inline bool positive_probability(Json const& expr, State const& state) {
  if (expr.is_number()) {
    return expr.get<double>() > 0.0;
  }
  if (expr.is_string()) {
    return true;  // the parameter p
  }
  if (expr.is_object() && expr.contains("op") && expr.at("op") == "ite") {
    Json const& cond = expr.at("if");
    bool taken = cond.is_boolean() ? cond.get<bool>() : eval(cond, state).b;
    return positive_probability(taken ? expr.at("then") : expr.at("else"), state);
  }
  if (expr.is_object() && expr.contains("op") && expr.at("op") == "/") {
    return expr.at("left").get<double>() > 0.0;
  }
  throw ModelError("jani replay: unsupported probability expression");
}

inline State apply_assignments(Json const& assignments, State const& state,
                               uint32_t num_states) {
  State next = state;
  next.belsup = Bitset(num_states);
  bool belsup_written = false;
  for (auto const& assignment : assignments) {
    std::string ref = assignment.at("ref").get<std::string>();
    Json const& value = assignment.at("value");
    if (ref == "newobs") {
      next.newobs = eval(value, state).i;
    } else if (ref == "lact") {
      next.lact = eval(value, state).i;
    } else if (ref.rfind("belsup_", 0) == 0) {
      belsup_written = true;
      if (eval(value, state).b) {
        next.belsup.set(static_cast<uint32_t>(std::stoul(ref.substr(7))));
      }
    } else {
      throw ModelError("jani replay: assignment to unknown variable " + ref);
    }
  }
  if (!belsup_written) {
    next.belsup = state.belsup;
  }
  return next;
}

struct Graph {
  std::vector<Bitset> supports;
  // Per node: action name -> sorted successor node ids.
  std::vector<std::map<std::string, std::vector<uint32_t>>> moves;
};

// Executes the document from its initial valuation. Every enabled non-alpha_bot
// edge fires, each positive-probability branch is completed with the unique
// enabled alpha_bot edge, and the resulting stable-state graph is returned.
inline Graph replay(Json const& doc) {
  Json const& automaton = doc.at("automata").at(0);
  Json const& edges = automaton.at("edges");

  uint32_t num_states = 0;
  State initial;
  initial.belsup = Bitset(0);
  std::vector<std::pair<uint32_t, bool>> initial_bits;
  for (auto const& variable : doc.at("variables")) {
    std::string name = variable.at("name").get<std::string>();
    if (name.rfind("belsup_", 0) == 0) {
      initial_bits.emplace_back(static_cast<uint32_t>(std::stoul(name.substr(7))),
                                variable.at("initial-value").get<bool>());
      ++num_states;
    } else if (name == "newobs") {
      initial.newobs = variable.at("initial-value").get<long long>();
    } else if (name == "lact") {
      initial.lact = variable.at("initial-value").get<long long>();
    }
  }
  initial.belsup = Bitset(num_states);
  for (auto const& [bit, set] : initial_bits) {
    if (set) {
      initial.belsup.set(bit);
    }
  }

  Graph graph;
  std::unordered_map<Bitset, uint32_t, BitsetHash> index;
  std::deque<uint32_t> frontier;
  auto intern = [&](Bitset const& support) {
    auto it = index.find(support);
    if (it != index.end()) {
      return it->second;
    }
    uint32_t id = static_cast<uint32_t>(graph.supports.size());
    index.emplace(support, id);
    graph.supports.push_back(support);
    graph.moves.emplace_back();
    frontier.push_back(id);
    return id;
  };
  intern(initial.belsup);

  while (!frontier.empty()) {
    uint32_t id = frontier.front();
    frontier.pop_front();
    State state;
    state.belsup = graph.supports[id];
    for (auto const& edge : edges) {
      std::string action = edge.at("action").get<std::string>();
      if (action == "alpha_bot" || !eval(edge.at("guard").at("exp"), state).b) {
        continue;
      }
      std::vector<uint32_t> successors;
      for (auto const& destination : edge.at("destinations")) {
        if (!positive_probability(destination.at("probability").at("exp"), state)) {
          continue;
        }
        State mid = apply_assignments(destination.at("assignments"), state, num_states);
        if (mid.newobs < 0) {
          throw ModelError("jani replay: action branch did not set newobs");
        }
        // Complete the half-step with the unique enabled alpha_bot edge.
        bool completed = false;
        for (auto const& closer : edges) {
          if (closer.at("action").get<std::string>() != "alpha_bot" ||
              !eval(closer.at("guard").at("exp"), mid).b) {
            continue;
          }
          Json const& landing = closer.at("destinations").at(0);
          State next = apply_assignments(landing.at("assignments"), mid, num_states);
          if (next.newobs != -1 || next.belsup.none()) {
            throw ModelError("jani replay: alpha_bot produced an unstable state");
          }
          successors.push_back(intern(next.belsup));
          completed = true;
          break;
        }
        if (!completed) {
          throw ModelError("jani replay: no alpha_bot edge enabled after a branch");
        }
      }
      std::sort(successors.begin(), successors.end());
      successors.erase(std::unique(successors.begin(), successors.end()), successors.end());
      auto& slot = graph.moves[id][action];
      if (!slot.empty() && slot != successors) {
        throw ModelError("jani replay: conflicting edges for one action");
      }
      slot = std::move(successors);
    }
  }
  return graph;
}

}  // namespace jani_replay

// Structural equality between the replayed JANI graph and the directly built
// belief-support MDP: same supports, and per support the same action names with
// the same successor supports.
inline bool jani_matches_mdp(nlohmann::ordered_json const& doc, Pomdp const& pomdp,
                             ExplicitBeliefSupportMdp const& mdp, std::string* what = nullptr) {
  auto fail = [&](std::string message) {
    if (what != nullptr) {
      *what = std::move(message);
    }
    return false;
  };
  jani_replay::Graph replayed = jani_replay::replay(doc);
  if (replayed.supports.size() != mdp.supports.size()) {
    return fail("node counts differ: " + std::to_string(replayed.supports.size()) + " vs " +
                std::to_string(mdp.supports.size()));
  }
  std::vector<uint32_t> to_mdp(replayed.supports.size());
  for (uint32_t id = 0; id < replayed.supports.size(); ++id) {
    auto it = mdp.index.find(replayed.supports[id]);
    if (it == mdp.index.end()) {
      return fail("support " + std::to_string(id) + " missing from the direct build");
    }
    to_mdp[id] = it->second;
  }
  for (uint32_t id = 0; id < replayed.supports.size(); ++id) {
    uint32_t node = to_mdp[id];
    std::map<std::string, std::vector<uint32_t>> expected;
    for (auto const& row : mdp.graph.nodes[node]) {
      std::vector<uint32_t> succ;
      for (uint32_t w : row.succ) {
        succ.push_back(w);
      }
      std::sort(succ.begin(), succ.end());
      expected[pomdp.action_names[row.action]] = std::move(succ);
    }
    std::map<std::string, std::vector<uint32_t>> actual;
    for (auto const& [action, succ] : replayed.moves[id]) {
      std::vector<uint32_t> mapped;
      for (uint32_t w : succ) {
        mapped.push_back(to_mdp[w]);
      }
      std::sort(mapped.begin(), mapped.end());
      actual[action] = std::move(mapped);
    }
    if (expected != actual) {
      return fail("moves differ at node " + std::to_string(node));
    }
  }
  return true;
}

inline DriverResult run_mode(ExplicitModel const& model, SearchMode mode,
                             SearchGoal goal = SearchGoal::fixpoint) {
  DriverConfig config;
  config.mode = mode;
  config.goal = goal;
  return run(model.pomdp, model.spec, config);
}

inline std::vector<SearchMode> const kAllModes = {
    SearchMode::oneshot, SearchMode::naive_explicit, SearchMode::naive_incremental,
    SearchMode::incremental};

// The modes that grow a region to the fixpoint; the one-shot only answers for
// the initial support.
inline std::vector<SearchMode> const kRegionModes = {
    SearchMode::naive_explicit, SearchMode::naive_incremental, SearchMode::incremental};

}  // namespace test_support
