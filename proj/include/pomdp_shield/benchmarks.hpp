#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "pomdp_shield/explicit_format.hpp"
#include "pomdp_shield/pomdp.hpp"
#include "pomdp_shield/util.hpp"

namespace pomdp_shield {

// Family selector for the built-in gridworld generators. N is the grid size,
// E the battery capacity (refuel only), R the view radius (evade/intercept/avoid).
struct BenchmarkParams {
  std::string family;
  uint32_t n = 0;
  uint32_t e = 0;
  uint32_t r = 0;
};

namespace detail {

// Appends one transition row, normalizing to the Pomdp invariants: entries are
// merged per successor and sorted; rows stay sorted because every generator
// emits actions in increasing id order.
inline void add_row(Pomdp& pomdp, uint32_t state, uint32_t action,
                    std::vector<TransitionEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](TransitionEntry const& a, TransitionEntry const& b) {
              return a.successor < b.successor;
            });
  std::vector<TransitionEntry> merged;
  for (auto const& entry : entries) {
    if (!merged.empty() && merged.back().successor == entry.successor) {
      merged.back().weight += entry.weight;
    } else {
      merged.push_back(entry);
    }
  }
  pomdp.rows[state].push_back(TransitionRow{action, std::move(merged)});
}

inline void finish(ExplicitModel& model) {
  model.pomdp = make_absorbing(std::move(model.pomdp), model.spec);
  auto issues = validate(model.pomdp, model.spec, true);
  if (!issues.empty()) {
    throw ModelError("generator produced an invalid model: " + issues.front());
  }
}

struct Grid {
  uint32_t n;
  uint32_t cells() const { return n * n; }
  uint32_t id(uint32_t x, uint32_t y) const { return y * n + x; }
  uint32_t x(uint32_t c) const { return c % n; }
  uint32_t y(uint32_t c) const { return c / n; }

  // Directions in global action order north, south, east, west; y grows north.
  bool step(uint32_t c, uint32_t dir, uint32_t& out) const {
    uint32_t cx = x(c);
    uint32_t cy = y(c);
    switch (dir) {
      case 0: if (cy + 1 >= n) return false; out = id(cx, cy + 1); return true;
      case 1: if (cy == 0) return false; out = id(cx, cy - 1); return true;
      case 2: if (cx + 1 >= n) return false; out = id(cx + 1, cy); return true;
      default: if (cx == 0) return false; out = id(cx - 1, cy); return true;
    }
  }

  uint32_t chebyshev(uint32_t a, uint32_t b) const {
    uint32_t dx = x(a) > x(b) ? x(a) - x(b) : x(b) - x(a);
    uint32_t dy = y(a) > y(b) ? y(a) - y(b) : y(b) - y(a);
    return std::max(dx, dy);
  }
};

}  // namespace detail

// The 11-cell maze: a top corridor of five cells, three alcoves hanging below
// cells 1, 3, 5 of that corridor, and three dead ends below the alcoves. The
// middle dead end holds the goal, its neighbors are traps. States are the
// figure's cells shifted to 0-based ids. An observation is what the agent can
// sense locally: the set of open directions, plus whether it stands on the
// goal (which splits the otherwise identical dead-end row). The agent starts
// in one of the two outer alcoves without knowing which.
inline ExplicitModel make_cheese() {
  ExplicitModel model;
  Pomdp& pomdp = model.pomdp;
  pomdp.action_names = {"north", "south", "east", "west"};
  pomdp.observation_names = {"open-es", "open-ew", "open-esw", "open-sw",
                             "open-ns", "open-n", "goal"};
  pomdp.observation_of = {0, 1, 2, 1, 3, 4, 4, 4, 5, 6, 5};
  pomdp.rows.resize(11);
  // Per state: list of (direction, neighbor) in action order n,s,e,w.
  std::vector<std::vector<std::pair<uint32_t, uint32_t>>> moves = {
      {{1, 5}, {2, 1}},          // 0: top-left corner
      {{2, 2}, {3, 0}},          // 1
      {{1, 6}, {2, 3}, {3, 1}},  // 2: top middle, alcove below
      {{2, 4}, {3, 2}},          // 3
      {{1, 7}, {3, 3}},          // 4: top-right corner
      {{0, 0}, {1, 8}},          // 5: left alcove
      {{0, 2}, {1, 9}},          // 6: middle alcove
      {{0, 4}, {1, 10}},         // 7: right alcove
      {{0, 5}},                  // 8: dead end (trap)
      {{0, 6}},                  // 9: dead end (goal)
      {{0, 7}},                  // 10: dead end (trap)
  };
  for (uint32_t s = 0; s < 11; ++s) {
    for (auto [dir, succ] : moves[s]) {
      detail::add_row(pomdp, s, dir, {TransitionEntry{succ, Rational(1)}});
    }
  }
  pomdp.initial = Bitset::of(11, {5, 7});
  model.spec.reach = Bitset::of(11, {9});
  model.spec.avoid = Bitset::of(11, {8, 10});
  detail::finish(model);
  return model;
}

// Localization gridworld: a robot is dropped uniformly onto one of the free
// cells of an N x N grid and must reach the exit in the far corner without
// touching a static trap. Traps fill the bottom floor(N/2) rows of every
// column except the exit column, which leaves the top row and exit column as
// safe corridors from any free cell. The robot senses only the cell type, so
// after the drop it knows merely "free cell"; observations: start, neutral,
// trap, exit.
inline ExplicitModel make_obstacle(uint32_t n) {
  if (n < 2) {
    throw ModelError("obstacle requires N >= 2");
  }
  ExplicitModel model;
  Pomdp& pomdp = model.pomdp;
  detail::Grid grid{n};
  uint32_t start = grid.cells();
  pomdp.action_names = {"north", "south", "east", "west"};
  pomdp.observation_names = {"start", "neutral", "trap", "exit"};
  uint32_t exit_cell = grid.id(n - 1, n - 1);
  auto is_trap = [&](uint32_t c) {
    return grid.x(c) + 1 < n && grid.y(c) < n / 2;
  };
  pomdp.observation_of.resize(start + 1, 1);
  pomdp.observation_of[start] = 0;
  pomdp.observation_of[exit_cell] = 3;
  std::vector<TransitionEntry> drop;
  for (uint32_t c = 0; c < grid.cells(); ++c) {
    if (is_trap(c)) {
      pomdp.observation_of[c] = 2;
    } else if (c != exit_cell) {
      drop.push_back(TransitionEntry{c, Rational(1)});
    }
  }
  for (auto& entry : drop) {
    entry.weight = Rational(1, static_cast<long long>(drop.size()));
  }
  pomdp.rows.resize(start + 1);
  for (uint32_t c = 0; c < grid.cells(); ++c) {
    for (uint32_t dir = 0; dir < 4; ++dir) {
      uint32_t succ = c;
      grid.step(c, dir, succ);
      detail::add_row(pomdp, c, dir, {TransitionEntry{succ, Rational(1)}});
    }
  }
  for (uint32_t dir = 0; dir < 4; ++dir) {
    detail::add_row(pomdp, start, dir, drop);
  }
  pomdp.initial = Bitset::of(start + 1, {start});
  model.spec.reach = Bitset::of(start + 1, {exit_cell});
  model.spec.avoid = Bitset(start + 1);
  for (uint32_t c = 0; c < grid.cells(); ++c) {
    if (is_trap(c)) {
      model.spec.avoid.set(c);
    }
  }
  detail::finish(model);
  return model;
}

// Rover with a battery: states are (cell, energy in 1..E) plus one "empty"
// sink. Every move costs one unit; entering one of the three recharge
// stations refills to E; moving with one unit left strands the rover. Five
// sandy cells make departures slip (stay in place, still paying energy) with
// probability 1/4. Position is observable except that the stations are
// indistinguishable from each other; energy is hidden. Goal: reach the far
// corner before running empty.
inline ExplicitModel make_refuel(uint32_t n, uint32_t e) {
  if (n < 2 || e < 2) {
    throw ModelError("refuel requires N >= 2 and E >= 2");
  }
  ExplicitModel model;
  Pomdp& pomdp = model.pomdp;
  detail::Grid grid{n};
  uint32_t levels = e;
  uint32_t sink = grid.cells() * levels;
  auto state_of = [&](uint32_t cell, uint32_t energy) {
    return cell * levels + (energy - 1);
  };
  uint32_t goal = grid.id(n - 1, n - 1);
  std::vector<uint32_t> stations = {grid.id(0, 0), grid.id(n / 2, n / 2),
                                    grid.id(0, n - 1)};
  auto is_station = [&](uint32_t c) {
    return std::find(stations.begin(), stations.end(), c) != stations.end();
  };
  // Cells on the two-leg route (0,0) -> center station -> goal keep clean
  // dynamics; sandy cells are the first five interior cells off that route.
  auto on_route = [&](uint32_t c) {
    uint32_t cx = grid.x(c);
    uint32_t cy = grid.y(c);
    uint32_t mid = n / 2;
    return (cy == 0 && cx <= mid) || (cx == mid && cy <= mid) ||
           (cy == mid && cx >= mid) || (cx == n - 1 && cy >= mid);
  };
  std::vector<uint32_t> sandy;
  for (uint32_t c = 0; c < grid.cells() && sandy.size() < 5; ++c) {
    bool interior = grid.x(c) > 0 && grid.x(c) + 1 < n && grid.y(c) > 0 &&
                    grid.y(c) + 1 < n;
    if (interior && !on_route(c) && !is_station(c) && c != goal) {
      sandy.push_back(c);
    }
  }
  auto is_sandy = [&](uint32_t c) {
    return std::find(sandy.begin(), sandy.end(), c) != sandy.end();
  };

  pomdp.action_names = {"north", "south", "east", "west"};
  for (uint32_t c = 0; c < grid.cells(); ++c) {
    if (is_station(c)) {
      continue;
    }
    pomdp.observation_names.push_back("c" + std::to_string(grid.x(c)) + "_" +
                                      std::to_string(grid.y(c)));
  }
  uint32_t station_obs = static_cast<uint32_t>(pomdp.observation_names.size());
  pomdp.observation_names.push_back("station");
  uint32_t empty_obs = station_obs + 1;
  pomdp.observation_names.push_back("empty");

  pomdp.observation_of.resize(sink + 1);
  pomdp.observation_of[sink] = empty_obs;
  uint32_t next_obs = 0;
  for (uint32_t c = 0; c < grid.cells(); ++c) {
    uint32_t z = is_station(c) ? station_obs : next_obs++;
    for (uint32_t energy = 1; energy <= levels; ++energy) {
      pomdp.observation_of[state_of(c, energy)] = z;
    }
  }

  pomdp.rows.resize(sink + 1);
  for (uint32_t c = 0; c < grid.cells(); ++c) {
    for (uint32_t energy = 1; energy <= levels; ++energy) {
      uint32_t s = state_of(c, energy);
      for (uint32_t dir = 0; dir < 4; ++dir) {
        if (energy == 1) {
          detail::add_row(pomdp, s, dir, {TransitionEntry{sink, Rational(1)}});
          continue;
        }
        uint32_t target = c;
        grid.step(c, dir, target);
        uint32_t arrived = is_station(target) ? state_of(target, levels)
                                              : state_of(target, energy - 1);
        if (is_sandy(c) && target != c) {
          detail::add_row(pomdp, s, dir,
                          {TransitionEntry{arrived, Rational(3, 4)},
                           TransitionEntry{state_of(c, energy - 1), Rational(1, 4)}});
        } else {
          detail::add_row(pomdp, s, dir, {TransitionEntry{arrived, Rational(1)}});
        }
      }
    }
  }
  for (uint32_t dir = 0; dir < 4; ++dir) {
    detail::add_row(pomdp, sink, dir, {TransitionEntry{sink, Rational(1)}});
  }

  pomdp.initial = Bitset::of(sink + 1, {state_of(grid.id(0, 0), levels)});
  model.spec.reach = Bitset(sink + 1);
  for (uint32_t energy = 1; energy <= levels; ++energy) {
    model.spec.reach.set(state_of(goal, energy));
  }
  model.spec.avoid = Bitset::of(sink + 1, {sink});
  detail::finish(model);
  return model;
}

// Sample-collection rover: two rocks of hidden quality sit on an N x N grid;
// a lab lies just east of the far corner, and a wreck sink models drill
// damage. Per-rock status is good-unsampled, bad-unsampled, or sampled; a
// carry bit records whether a good sample is aboard (set by sampling a good
// rock). Sampling an unsampled rock at its cell latches with 4/5; drilling
// anywhere else wrecks the rover with 9/10. Moves slip: stay 1/10, and where
// two cells in the same direction stay on the grid, overshoot 1/10. The rover
// sees its cell and which rocks are sampled, but neither quality nor cargo;
// it wins by docking at the lab with a good sample. Initially at least one
// rock is good.
inline ExplicitModel make_rocks(uint32_t n) {
  if (n < 2) {
    throw ModelError("rocks requires N >= 2");
  }
  ExplicitModel model;
  Pomdp& pomdp = model.pomdp;
  detail::Grid grid{n};
  uint32_t rock1 = grid.id(1, n - 1);
  uint32_t rock2 = grid.id(n - 1, 1);
  // Per-rock status codes: 0 good-unsampled, 1 bad-unsampled, 2 sampled.
  constexpr uint32_t kCombos = 3 * 3 * 2;
  uint32_t lab_base = grid.cells() * kCombos;
  uint32_t wreck = lab_base + kCombos;
  auto state_of = [&](uint32_t pos, uint32_t st1, uint32_t st2, uint32_t carry) {
    uint32_t base = pos == grid.cells() ? lab_base : pos * kCombos;
    return base + ((st1 * 3) + st2) * 2 + carry;
  };
  uint32_t lab_pos = grid.cells();

  pomdp.action_names = {"north", "south", "east", "west", "sample"};
  for (uint32_t c = 0; c < grid.cells(); ++c) {
    for (uint32_t f1 = 0; f1 < 2; ++f1) {
      for (uint32_t f2 = 0; f2 < 2; ++f2) {
        pomdp.observation_names.push_back(
            "c" + std::to_string(grid.x(c)) + "_" + std::to_string(grid.y(c)) +
            "_f" + std::to_string(f1) + std::to_string(f2));
      }
    }
  }
  uint32_t lab_obs = static_cast<uint32_t>(pomdp.observation_names.size());
  pomdp.observation_names.push_back("lab");
  uint32_t wreck_obs = lab_obs + 1;
  pomdp.observation_names.push_back("wreck");

  pomdp.observation_of.resize(wreck + 1);
  pomdp.observation_of[wreck] = wreck_obs;
  for (uint32_t st1 = 0; st1 < 3; ++st1) {
    for (uint32_t st2 = 0; st2 < 3; ++st2) {
      for (uint32_t carry = 0; carry < 2; ++carry) {
        uint32_t flags = (st1 == 2 ? 2u : 0u) + (st2 == 2 ? 1u : 0u);
        for (uint32_t c = 0; c < grid.cells(); ++c) {
          pomdp.observation_of[state_of(c, st1, st2, carry)] = c * 4 + flags;
        }
        pomdp.observation_of[state_of(lab_pos, st1, st2, carry)] = lab_obs;
      }
    }
  }

  pomdp.rows.resize(wreck + 1);
  for (uint32_t st1 = 0; st1 < 3; ++st1) {
    for (uint32_t st2 = 0; st2 < 3; ++st2) {
      for (uint32_t carry = 0; carry < 2; ++carry) {
        for (uint32_t c = 0; c < grid.cells(); ++c) {
          uint32_t s = state_of(c, st1, st2, carry);
          uint32_t stay = s;
          for (uint32_t dir = 0; dir < 4; ++dir) {
            uint32_t t1 = c;
            bool exits = c == grid.id(n - 1, n - 1) && dir == 2;
            if (!exits && !grid.step(c, dir, t1)) {
              detail::add_row(pomdp, s, dir, {TransitionEntry{stay, Rational(1)}});
              continue;
            }
            uint32_t first = exits ? state_of(lab_pos, st1, st2, carry)
                                   : state_of(t1, st1, st2, carry);
            uint32_t t2 = t1;
            if (!exits && grid.step(t1, dir, t2)) {
              detail::add_row(pomdp, s, dir,
                              {TransitionEntry{first, Rational(4, 5)},
                               TransitionEntry{stay, Rational(1, 10)},
                               TransitionEntry{state_of(t2, st1, st2, carry),
                                               Rational(1, 10)}});
            } else {
              detail::add_row(pomdp, s, dir,
                              {TransitionEntry{first, Rational(9, 10)},
                               TransitionEntry{stay, Rational(1, 10)}});
            }
          }
          bool fresh_rock = (c == rock1 && st1 < 2) || (c == rock2 && st2 < 2);
          if (fresh_rock) {
            uint32_t n1 = c == rock1 ? 2 : st1;
            uint32_t n2 = c == rock2 ? 2 : st2;
            uint32_t good = (c == rock1 && st1 == 0) || (c == rock2 && st2 == 0);
            uint32_t latched = state_of(c, n1, n2, good ? 1 : carry);
            detail::add_row(pomdp, s, 4,
                            {TransitionEntry{latched, Rational(4, 5)},
                             TransitionEntry{stay, Rational(1, 5)}});
          } else {
            detail::add_row(pomdp, s, 4,
                            {TransitionEntry{wreck, Rational(9, 10)},
                             TransitionEntry{stay, Rational(1, 10)}});
          }
        }
        uint32_t dock = state_of(lab_pos, st1, st2, carry);
        for (uint32_t action = 0; action < 5; ++action) {
          detail::add_row(pomdp, dock, action, {TransitionEntry{dock, Rational(1)}});
        }
      }
    }
  }
  for (uint32_t action = 0; action < 5; ++action) {
    detail::add_row(pomdp, wreck, action, {TransitionEntry{wreck, Rational(1)}});
  }

  pomdp.initial = Bitset::of(wreck + 1, {state_of(0, 0, 0, 0), state_of(0, 0, 1, 0),
                                         state_of(0, 1, 0, 0)});
  model.spec.reach = Bitset(wreck + 1);
  for (uint32_t st1 = 0; st1 < 3; ++st1) {
    for (uint32_t st2 = 0; st2 < 3; ++st2) {
      model.spec.reach.set(state_of(lab_pos, st1, st2, 1));
    }
  }
  model.spec.avoid = Bitset::of(wreck + 1, {wreck});
  detail::finish(model);
  return model;
}

namespace detail {

// Shared scaffold for the two-agent families: the controlled agent and one
// other entity on an N x N grid, the entity visible only within Chebyshev
// distance R. State (a, b) is agent and entity cell; terminals are whatever
// the caller marks REACH/AVOID.
struct PursuitBuilder {
  Grid grid;
  uint32_t radius;
  Pomdp pomdp;

  PursuitBuilder(uint32_t n, uint32_t r) : grid{n}, radius(r) {
    uint32_t cells = grid.cells();
    pomdp.action_names = {"north", "south", "east", "west", "wait"};
    pomdp.observation_of.resize(cells * cells);
    for (uint32_t a = 0; a < cells; ++a) {
      for (uint32_t b = 0; b < cells; ++b) {
        std::string name = "a" + std::to_string(a);
        if (grid.chebyshev(a, b) <= radius) {
          name += "_see" + std::to_string(b);
        } else {
          name += "_far";
        }
        uint32_t z = observation(name);
        pomdp.observation_of[state_of(a, b)] = z;
      }
    }
    pomdp.rows.resize(cells * cells);
  }

  uint32_t state_of(uint32_t a, uint32_t b) const { return a * grid.cells() + b; }

  uint32_t observation(std::string const& name) {
    for (uint32_t z = 0; z < pomdp.observation_names.size(); ++z) {
      if (pomdp.observation_names[z] == name) {
        return z;
      }
    }
    pomdp.observation_names.push_back(name);
    return static_cast<uint32_t>(pomdp.observation_names.size() - 1);
  }

  uint32_t agent_target(uint32_t a, uint32_t dir) const {
    uint32_t target = a;
    if (dir < 4) {
      grid.step(a, dir, target);
    }
    return target;
  }

  // entity_moves(b) returns the successor distribution of the other entity.
  template <typename EntityMoves>
  void build_rows(EntityMoves&& entity_moves) {
    for (uint32_t a = 0; a < grid.cells(); ++a) {
      for (uint32_t b = 0; b < grid.cells(); ++b) {
        uint32_t s = state_of(a, b);
        for (uint32_t dir = 0; dir < 5; ++dir) {
          uint32_t a2 = agent_target(a, dir);
          std::vector<TransitionEntry> entries;
          for (auto const& [b2, weight] : entity_moves(b)) {
            entries.push_back(TransitionEntry{state_of(a2, b2), weight});
          }
          add_row(pomdp, s, dir, std::move(entries));
        }
      }
    }
  }
};

}  // namespace detail

// Evade: reach the far corner while never sharing a cell with an intruder
// that random-walks (uniform over staying and every open direction) and is
// visible only within radius R. The agent starts in the near corner; the
// intruder starts anywhere out of sight.
inline ExplicitModel make_evade(uint32_t n, uint32_t r) {
  if (n < 2) {
    throw ModelError("evade requires N >= 2");
  }
  detail::PursuitBuilder builder(n, r);
  detail::Grid grid = builder.grid;
  builder.build_rows([&](uint32_t b) {
    std::vector<std::pair<uint32_t, Rational>> out;
    std::vector<uint32_t> targets = {b};
    for (uint32_t dir = 0; dir < 4; ++dir) {
      uint32_t t = b;
      if (grid.step(b, dir, t)) {
        targets.push_back(t);
      }
    }
    Rational weight(1, static_cast<long long>(targets.size()));
    for (uint32_t t : targets) {
      out.emplace_back(t, weight);
    }
    return out;
  });

  ExplicitModel model;
  model.pomdp = std::move(builder.pomdp);
  uint32_t cells = grid.cells();
  uint32_t agent_start = grid.id(0, 0);
  uint32_t goal = grid.id(n - 1, n - 1);
  model.pomdp.initial = Bitset(cells * cells);
  for (uint32_t b = 0; b < cells; ++b) {
    if (grid.chebyshev(agent_start, b) > r) {
      model.pomdp.initial.set(builder.state_of(agent_start, b));
    }
  }
  if (model.pomdp.initial.none()) {
    throw ModelError("evade: no out-of-sight intruder cell; lower R or raise N");
  }
  model.spec.reach = Bitset(cells * cells);
  model.spec.avoid = Bitset(cells * cells);
  for (uint32_t b = 0; b < cells; ++b) {
    if (b != goal) {
      model.spec.reach.set(builder.state_of(goal, b));
    }
  }
  for (uint32_t c = 0; c < cells; ++c) {
    model.spec.avoid.set(builder.state_of(c, c));
  }
  detail::finish(model);
  return model;
}

// Intercept: catch an intruder that marches deterministically toward the
// near-corner exit (first west, then south) before it arrives. The agent
// starts on the exit cell; catching means sharing a cell, losing means the
// intruder reaching the exit un-caught.
inline ExplicitModel make_intercept(uint32_t n, uint32_t r) {
  if (n < 2) {
    throw ModelError("intercept requires N >= 2");
  }
  detail::PursuitBuilder builder(n, r);
  detail::Grid grid = builder.grid;
  uint32_t exit_cell = grid.id(0, 0);
  builder.build_rows([&](uint32_t b) {
    std::vector<std::pair<uint32_t, Rational>> out;
    uint32_t next = b;
    if (grid.x(b) > 0) {
      next = grid.id(grid.x(b) - 1, grid.y(b));
    } else if (grid.y(b) > 0) {
      next = grid.id(0, grid.y(b) - 1);
    }
    out.emplace_back(next, Rational(1));
    return out;
  });

  ExplicitModel model;
  model.pomdp = std::move(builder.pomdp);
  uint32_t cells = grid.cells();
  model.pomdp.initial = Bitset(cells * cells);
  for (uint32_t b = 0; b < cells; ++b) {
    if (grid.chebyshev(exit_cell, b) > r) {
      model.pomdp.initial.set(builder.state_of(exit_cell, b));
    }
  }
  if (model.pomdp.initial.none()) {
    throw ModelError("intercept: no out-of-sight intruder cell; lower R or raise N");
  }
  model.spec.reach = Bitset(cells * cells);
  model.spec.avoid = Bitset(cells * cells);
  for (uint32_t c = 0; c < cells; ++c) {
    model.spec.reach.set(builder.state_of(c, c));
  }
  for (uint32_t a = 0; a < cells; ++a) {
    if (a != exit_cell) {
      model.spec.avoid.set(builder.state_of(a, exit_cell));
    }
  }
  detail::finish(model);
  return model;
}

// Avoid: reach the far corner while keeping off the cell of a patroller that
// cycles the grid border clockwise, visible only within radius R. The
// patroller's phase is initially unknown. States pair the agent cell with a
// border cell.
inline ExplicitModel make_avoid(uint32_t n, uint32_t r) {
  if (n < 3) {
    throw ModelError("avoid requires N >= 3");
  }
  detail::Grid grid{n};
  std::vector<uint32_t> route;
  for (uint32_t x = 0; x + 1 < n; ++x) route.push_back(grid.id(x, 0));
  for (uint32_t y = 0; y + 1 < n; ++y) route.push_back(grid.id(n - 1, y));
  for (uint32_t x = n - 1; x > 0; --x) route.push_back(grid.id(x, n - 1));
  for (uint32_t y = n - 1; y > 0; --y) route.push_back(grid.id(0, y));
  std::vector<uint32_t> next_on_route(grid.cells(), 0);
  for (uint32_t i = 0; i < route.size(); ++i) {
    next_on_route[route[i]] = route[(i + 1) % route.size()];
  }

  ExplicitModel model;
  Pomdp& pomdp = model.pomdp;
  pomdp.action_names = {"north", "south", "east", "west", "wait"};
  uint32_t phases = static_cast<uint32_t>(route.size());
  auto state_of = [&](uint32_t a, uint32_t phase) { return a * phases + phase; };
  uint32_t total = grid.cells() * phases;
  pomdp.observation_of.resize(total);
  auto observation = [&](std::string const& name) {
    for (uint32_t z = 0; z < pomdp.observation_names.size(); ++z) {
      if (pomdp.observation_names[z] == name) {
        return z;
      }
    }
    pomdp.observation_names.push_back(name);
    return static_cast<uint32_t>(pomdp.observation_names.size() - 1);
  };
  for (uint32_t a = 0; a < grid.cells(); ++a) {
    for (uint32_t i = 0; i < phases; ++i) {
      std::string name = "a" + std::to_string(a);
      if (grid.chebyshev(a, route[i]) <= r) {
        name += "_see" + std::to_string(route[i]);
      } else {
        name += "_far";
      }
      pomdp.observation_of[state_of(a, i)] = observation(name);
    }
  }
  pomdp.rows.resize(total);
  for (uint32_t a = 0; a < grid.cells(); ++a) {
    for (uint32_t i = 0; i < phases; ++i) {
      uint32_t s = state_of(a, i);
      for (uint32_t dir = 0; dir < 5; ++dir) {
        uint32_t a2 = a;
        if (dir < 4) {
          grid.step(a, dir, a2);
        }
        detail::add_row(pomdp, s, dir,
                        {TransitionEntry{state_of(a2, (i + 1) % phases), Rational(1)}});
      }
    }
  }

  uint32_t agent_start = grid.id(1, 1);
  uint32_t goal = grid.id(n - 1, n - 1);
  pomdp.initial = Bitset(total);
  for (uint32_t i = 0; i < phases; ++i) {
    if (grid.chebyshev(agent_start, route[i]) > r) {
      pomdp.initial.set(state_of(agent_start, i));
    }
  }
  if (pomdp.initial.none()) {
    throw ModelError("avoid: the whole patrol route is visible; lower R or raise N");
  }
  model.spec.reach = Bitset(total);
  model.spec.avoid = Bitset(total);
  for (uint32_t i = 0; i < phases; ++i) {
    model.spec.reach.set(state_of(goal, i));
  }
  for (uint32_t i = 0; i < phases; ++i) {
    for (uint32_t a = 0; a < grid.cells(); ++a) {
      if (a == route[i] && a != goal) {
        model.spec.avoid.set(state_of(a, i));
      }
    }
  }
  detail::finish(model);
  return model;
}

inline ExplicitModel generate(BenchmarkParams const& params) {
  auto need = [&](uint32_t value, char const* what) {
    if (value == 0) {
      throw ModelError(params.family + " requires parameter " + what);
    }
    return value;
  };
  if (params.family == "cheese") {
    return make_cheese();
  }
  if (params.family == "obstacle") {
    return make_obstacle(need(params.n, "N"));
  }
  if (params.family == "refuel") {
    return make_refuel(need(params.n, "N"), need(params.e, "E"));
  }
  if (params.family == "rocks") {
    return make_rocks(need(params.n, "N"));
  }
  if (params.family == "evade") {
    return make_evade(need(params.n, "N"), need(params.r, "R"));
  }
  if (params.family == "intercept") {
    return make_intercept(need(params.n, "N"), need(params.r, "R"));
  }
  if (params.family == "avoid") {
    return make_avoid(need(params.n, "N"), need(params.r, "R"));
  }
  throw ModelError("unknown benchmark family '" + params.family + "'");
}

}  // namespace pomdp_shield
