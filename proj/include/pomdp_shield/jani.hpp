#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pomdp.hpp"
#include "rational.hpp"

namespace pomdp_shield {

using Json = nlohmann::ordered_json;

struct JaniOptions {
  std::optional<Rational> pin_p;  // parametric when unset
  std::string model_name = "belief_support";
};

namespace detail {

inline Json jani_fold(char const* op, std::vector<Json> terms, bool empty_value) {
  if (terms.empty()) {
    return Json(empty_value);
  }
  Json out = std::move(terms.front());
  for (std::size_t i = 1; i < terms.size(); ++i) {
    out = Json{{"op", op}, {"left", std::move(out)}, {"right", std::move(terms[i])}};
  }
  return out;
}

inline Json jani_eq(std::string const& var, long long value) {
  return Json{{"op", "="}, {"left", var}, {"right", value}};
}

inline std::string belsup_name(uint32_t s) { return "belsup_" + std::to_string(s); }

}  // namespace detail

// Symbolic belief-support MDP. Each support step is split in two: a nondeterministic
// step per (observation, enabled action) that draws the next observation into newobs
// and remembers the action in lact, and one dummy step that rebuilds the support bits
// from the remembered pair. Probabilities are the single constant p; only the branch
// structure matters for qualitative queries.
inline Json export_jani(Pomdp const& pomdp, Specification const& spec,
                        JaniOptions const& options = {}) {
  uint32_t n = pomdp.num_states();
  uint32_t nz = pomdp.num_observations();

  std::string dummy = "alpha_bot";
  while (std::find(pomdp.action_names.begin(), pomdp.action_names.end(), dummy) !=
         pomdp.action_names.end()) {
    dummy += "_";
  }

  Json doc;
  doc["jani-version"] = 1;
  doc["name"] = options.model_name;
  doc["type"] = "mdp";
  doc["metadata"] = Json{{"description", "two-step symbolic belief-support abstraction"}};

  Json actions = Json::array();
  for (auto const& name : pomdp.action_names) {
    actions.push_back(Json{{"name", name}});
  }
  actions.push_back(Json{{"name", dummy}});
  doc["actions"] = std::move(actions);

  Json constant = Json{{"name", "p"}, {"type", "real"}};
  if (options.pin_p) {
    constant["value"] = Json{{"op", "/"},
                             {"left", static_cast<long long>(options.pin_p->numerator())},
                             {"right", static_cast<long long>(options.pin_p->denominator())}};
  }
  doc["constants"] = Json::array({std::move(constant)});

  Json variables = Json::array();
  for (uint32_t s = 0; s < n; ++s) {
    variables.push_back(Json{{"name", detail::belsup_name(s)},
                             {"type", "bool"},
                             {"initial-value", pomdp.initial.get(s)}});
  }
  auto bounded = [](long long lo, long long hi) {
    return Json{{"kind", "bounded"}, {"base", "int"}, {"lower-bound", lo}, {"upper-bound", hi}};
  };
  variables.push_back(Json{{"name", "newobs"},
                           {"type", bounded(-1, static_cast<long long>(nz) - 1)},
                           {"initial-value", -1}});
  variables.push_back(Json{{"name", "lact"},
                           {"type", bounded(-1, static_cast<long long>(pomdp.num_actions()) - 1)},
                           {"initial-value", -1}});
  doc["variables"] = std::move(variables);

  // Lifted specification: stay clear of every AVOID bit until the support sits inside
  // REACH.
  std::vector<Json> safe_terms;
  for (uint32_t s : spec.avoid) {
    safe_terms.push_back(Json{{"op", "¬"}, {"exp", detail::belsup_name(s)}});
  }
  std::vector<Json> goal_terms;
  for (uint32_t s = 0; s < n; ++s) {
    if (!spec.reach.get(s)) {
      goal_terms.push_back(Json{{"op", "¬"}, {"exp", detail::belsup_name(s)}});
    }
  }
  std::vector<Json> goal_any;
  for (uint32_t s : spec.reach) {
    goal_any.push_back(Json(detail::belsup_name(s)));
  }
  goal_terms.push_back(detail::jani_fold("∨", std::move(goal_any), false));
  Json until = Json{{"op", "U"},
                    {"left", detail::jani_fold("∧", std::move(safe_terms), true)},
                    {"right", detail::jani_fold("∧", std::move(goal_terms), true)}};
  doc["properties"] = Json::array(
      {Json{{"name", "max-reach-avoid"},
            {"expression", Json{{"op", "filter"},
                                {"fun", "max"},
                                {"values", Json{{"op", "Pmax"}, {"exp", std::move(until)}}},
                                {"states", Json{{"op", "initial"}}}}}}});

  Json edges = Json::array();
  for (uint32_t z = 0; z < nz; ++z) {
    Bitset members = pomdp.states_with_observation(z);
    if (members.none()) {
      continue;
    }
    std::vector<Json> here;
    for (uint32_t s : members) {
      here.push_back(Json(detail::belsup_name(s)));
    }
    Json guard = Json{{"op", "∧"},
                      {"left", detail::jani_eq("newobs", -1)},
                      {"right", detail::jani_fold("∨", std::move(here), false)}};
    for (uint32_t action : pomdp.enabled_actions_of_observation(z)) {
      Json destinations = Json::array();
      for (uint32_t next_obs = 0; next_obs < nz; ++next_obs) {
        std::vector<Json> sources;
        for (uint32_t s = 0; s < n; ++s) {
          TransitionRow const* row = pomdp.row(s, action);
          if (row == nullptr) {
            continue;
          }
          bool leads = false;
          for (auto const& entry : row->entries) {
            if (pomdp.observation_of[entry.successor] == next_obs) {
              leads = true;
              break;
            }
          }
          if (leads) {
            sources.push_back(Json(detail::belsup_name(s)));
          }
        }
        Json probability = Json{{"op", "ite"},
                                {"if", detail::jani_fold("∨", std::move(sources), false)},
                                {"then", "p"},
                                {"else", 0}};
        destinations.push_back(
            Json{{"location", "l"},
                 {"probability", Json{{"exp", std::move(probability)}}},
                 {"assignments",
                  Json::array({Json{{"ref", "newobs"}, {"value", static_cast<long long>(next_obs)}},
                               Json{{"ref", "lact"}, {"value", static_cast<long long>(action)}}})}});
      }
      edges.push_back(Json{{"location", "l"},
                           {"action", pomdp.action_names[action]},
                           {"guard", Json{{"exp", guard}}},
                           {"destinations", std::move(destinations)}});
    }
  }

  // One synchronous update: belsup(s') holds iff its observation was drawn and some
  // currently set state reaches s' under the remembered action.
  Json updates = Json::array();
  for (uint32_t s2 = 0; s2 < n; ++s2) {
    std::vector<Json> feeds;
    for (uint32_t s = 0; s < n; ++s) {
      for (auto const& row : pomdp.rows[s]) {
        bool hits = false;
        for (auto const& entry : row.entries) {
          if (entry.successor == s2) {
            hits = true;
            break;
          }
        }
        if (hits) {
          feeds.push_back(Json{{"op", "∧"},
                               {"left", detail::belsup_name(s)},
                               {"right", detail::jani_eq("lact", row.action)}});
        }
      }
    }
    Json value = Json{
        {"op", "∧"},
        {"left", detail::jani_eq("newobs", pomdp.observation_of[s2])},
        {"right", detail::jani_fold("∨", std::move(feeds), false)}};
    updates.push_back(Json{{"ref", detail::belsup_name(s2)}, {"value", std::move(value)}});
  }
  updates.push_back(Json{{"ref", "newobs"}, {"value", -1}});
  updates.push_back(Json{{"ref", "lact"}, {"value", -1}});
  edges.push_back(
      Json{{"location", "l"},
           {"action", dummy},
           {"guard", Json{{"exp", Json{{"op", "≥"}, {"left", "newobs"}, {"right", 0}}}}},
           {"destinations", Json::array({Json{{"location", "l"},
                                              {"probability", Json{{"exp", 1}}},
                                              {"assignments", std::move(updates)}}})}});

  doc["automata"] = Json::array({Json{{"name", options.model_name},
                                      {"locations", Json::array({Json{{"name", "l"}}})},
                                      {"initial-locations", Json::array({"l"})},
                                      {"edges", std::move(edges)}}});
  doc["system"] = Json{{"elements", Json::array({Json{{"automaton", options.model_name}}})}};
  return doc;
}

inline void write_jani(std::ostream& out, Json const& doc) { out << doc.dump(2) << "\n"; }

}  // namespace pomdp_shield
