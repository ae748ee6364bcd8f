#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pomdp_shield/pomdp.hpp"

namespace pomdp_shield {

struct ExplicitModel {
  Pomdp pomdp;
  Specification spec;
};

// Text format, one directive per line, '#' starts a comment:
//   states N
//   actions a1 a2 ...
//   observations o1 o2 ...
//   obs <state> <observation>
//   tr <state> <action> <succ>:<num>/<den> ...
//   init s1 s2 ...
//   reach s1 ...
//   avoid s1 ...
// States are dense 0-based indices; actions and observations are referenced by name.
inline ExplicitModel parse_explicit(std::istream& in) {
  ExplicitModel model;
  Pomdp& pomdp = model.pomdp;
  std::map<std::string, uint32_t> action_index;
  std::map<std::string, uint32_t> observation_index;
  long long num_states = -1;
  std::vector<bool> has_observation;
  std::vector<uint32_t> init_states;
  std::vector<uint32_t> reach_states;
  std::vector<uint32_t> avoid_states;
  bool saw_init = false;
  bool saw_reach = false;
  bool saw_avoid = false;

  auto parse_state = [&](std::string const& token, uint32_t line_no) -> uint32_t {
    for (char c : token) {
      if (c < '0' || c > '9') {
        throw ModelError("line " + std::to_string(line_no) + ": malformed state index '" + token +
                         "'");
      }
    }
    long long value = std::stoll(token);
    if (num_states < 0 || value >= num_states) {
      throw ModelError("line " + std::to_string(line_no) + ": state index out of range: " + token);
    }
    return static_cast<uint32_t>(value);
  };

  std::string line;
  uint32_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    std::istringstream tokens(line);
    std::string keyword;
    if (!(tokens >> keyword)) {
      continue;
    }
    if (keyword == "states") {
      if (num_states >= 0) {
        throw ModelError("line " + std::to_string(line_no) + ": duplicate states line");
      }
      if (!(tokens >> num_states) || num_states <= 0) {
        throw ModelError("line " + std::to_string(line_no) + ": malformed states line");
      }
      pomdp.rows.resize(static_cast<std::size_t>(num_states));
      pomdp.observation_of.resize(static_cast<std::size_t>(num_states), 0);
      has_observation.resize(static_cast<std::size_t>(num_states), false);
    } else if (keyword == "actions") {
      std::string name;
      while (tokens >> name) {
        if (!action_index.emplace(name, pomdp.num_actions()).second) {
          throw ModelError("line " + std::to_string(line_no) + ": duplicate action " + name);
        }
        pomdp.action_names.push_back(name);
      }
      if (pomdp.action_names.empty()) {
        throw ModelError("line " + std::to_string(line_no) + ": empty actions line");
      }
    } else if (keyword == "observations") {
      std::string name;
      while (tokens >> name) {
        if (!observation_index.emplace(name, pomdp.num_observations()).second) {
          throw ModelError("line " + std::to_string(line_no) + ": duplicate observation " + name);
        }
        pomdp.observation_names.push_back(name);
      }
    } else if (keyword == "obs") {
      std::string state_token;
      std::string obs_name;
      if (!(tokens >> state_token >> obs_name)) {
        throw ModelError("line " + std::to_string(line_no) + ": malformed obs line");
      }
      uint32_t s = parse_state(state_token, line_no);
      auto it = observation_index.find(obs_name);
      if (it == observation_index.end()) {
        throw ModelError("line " + std::to_string(line_no) + ": unknown observation " + obs_name);
      }
      if (has_observation[s]) {
        throw ModelError("line " + std::to_string(line_no) + ": duplicate obs for state " +
                         state_token);
      }
      pomdp.observation_of[s] = it->second;
      has_observation[s] = true;
    } else if (keyword == "tr") {
      std::string state_token;
      std::string action_name;
      if (!(tokens >> state_token >> action_name)) {
        throw ModelError("line " + std::to_string(line_no) + ": malformed tr line");
      }
      uint32_t s = parse_state(state_token, line_no);
      auto it = action_index.find(action_name);
      if (it == action_index.end()) {
        throw ModelError("line " + std::to_string(line_no) + ": unknown action " + action_name);
      }
      TransitionRow row;
      row.action = it->second;
      std::string pair;
      while (tokens >> pair) {
        std::size_t colon = pair.find(':');
        if (colon == std::string::npos) {
          throw ModelError("line " + std::to_string(line_no) + ": malformed successor '" + pair +
                           "'");
        }
        uint32_t succ = parse_state(pair.substr(0, colon), line_no);
        Rational weight = parse_rational(pair.substr(colon + 1));
        row.entries.push_back(TransitionEntry{succ, weight});
      }
      if (row.entries.empty()) {
        throw ModelError("line " + std::to_string(line_no) + ": tr line without successors");
      }
      std::sort(row.entries.begin(), row.entries.end(),
                [](TransitionEntry const& a, TransitionEntry const& b) {
                  return a.successor < b.successor;
                });
      for (std::size_t i = 1; i < row.entries.size(); ++i) {
        if (row.entries[i].successor == row.entries[i - 1].successor) {
          throw ModelError("line " + std::to_string(line_no) + ": duplicate successor");
        }
      }
      for (auto const& existing : pomdp.rows[s]) {
        if (existing.action == row.action) {
          throw ModelError("line " + std::to_string(line_no) + ": duplicate tr row");
        }
      }
      pomdp.rows[s].push_back(std::move(row));
    } else if (keyword == "init" || keyword == "reach" || keyword == "avoid") {
      std::vector<uint32_t>* target = keyword == "init"    ? &init_states
                                      : keyword == "reach" ? &reach_states
                                                           : &avoid_states;
      bool* seen = keyword == "init" ? &saw_init : keyword == "reach" ? &saw_reach : &saw_avoid;
      if (*seen) {
        throw ModelError("line " + std::to_string(line_no) + ": duplicate " + keyword + " line");
      }
      *seen = true;
      std::string state_token;
      while (tokens >> state_token) {
        target->push_back(parse_state(state_token, line_no));
      }
    } else {
      throw ModelError("line " + std::to_string(line_no) + ": unknown directive '" + keyword +
                       "'");
    }
  }
  if (num_states < 0) {
    throw ModelError("missing states line");
  }
  if (!saw_init) {
    throw ModelError("missing init line");
  }
  for (uint32_t s = 0; s < static_cast<uint32_t>(num_states); ++s) {
    if (!has_observation[s]) {
      throw ModelError("state " + std::to_string(s) + " has no observation");
    }
    std::sort(pomdp.rows[s].begin(), pomdp.rows[s].end(),
              [](TransitionRow const& a, TransitionRow const& b) { return a.action < b.action; });
  }
  uint32_t n = static_cast<uint32_t>(num_states);
  pomdp.initial = Bitset(n);
  for (uint32_t s : init_states) {
    pomdp.initial.set(s);
  }
  model.spec.reach = Bitset(n);
  for (uint32_t s : reach_states) {
    model.spec.reach.set(s);
  }
  model.spec.avoid = Bitset(n);
  for (uint32_t s : avoid_states) {
    model.spec.avoid.set(s);
  }
  auto issues = validate(pomdp, model.spec, false);
  if (!issues.empty()) {
    throw ModelError("invalid model: " + issues.front());
  }
  pomdp = make_absorbing(std::move(pomdp), model.spec);
  return model;
}

inline void emit_explicit(std::ostream& out, ExplicitModel const& model) {
  Pomdp const& pomdp = model.pomdp;
  out << "states " << pomdp.num_states() << "\n";
  out << "actions";
  for (auto const& name : pomdp.action_names) {
    out << " " << name;
  }
  out << "\n";
  out << "observations";
  for (auto const& name : pomdp.observation_names) {
    out << " " << name;
  }
  out << "\n";
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    out << "obs " << s << " " << pomdp.observation_names[pomdp.observation_of[s]] << "\n";
  }
  for (uint32_t s = 0; s < pomdp.num_states(); ++s) {
    for (auto const& row : pomdp.rows[s]) {
      out << "tr " << s << " " << pomdp.action_names[row.action];
      for (auto const& entry : row.entries) {
        out << " " << entry.successor << ":" << to_string(entry.weight);
      }
      out << "\n";
    }
  }
  auto emit_set = [&](char const* keyword, Bitset const& set) {
    out << keyword;
    for (uint32_t s : set) {
      out << " " << s;
    }
    out << "\n";
  };
  emit_set("init", pomdp.initial);
  emit_set("reach", model.spec.reach);
  emit_set("avoid", model.spec.avoid);
}

inline std::string emit_explicit_string(ExplicitModel const& model) {
  std::ostringstream out;
  emit_explicit(out, model);
  return out.str();
}

inline ExplicitModel parse_explicit_string(std::string const& text) {
  std::istringstream in(text);
  return parse_explicit(in);
}

}  // namespace pomdp_shield
