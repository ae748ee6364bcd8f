#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pomdp_shield/formula.hpp"
#include "pomdp_shield/sat_core.hpp"
#include "pomdp_shield/util.hpp"

namespace pomdp_shield {

enum class CheckResult { sat, unsat, unknown };

inline char const* to_string(CheckResult r) {
  switch (r) {
    case CheckResult::sat:
      return "sat";
    case CheckResult::unsat:
      return "unsat";
    case CheckResult::unknown:
      return "unknown";
  }
  return "?";
}

// Incremental solver session over boolean, bounded-integer and rank (strictly ordered
// real) variables. Declarations and assertions are scoped by push/pop; popped variables
// stay allocated but are marked dead so VarIds remain stable. Every sat result is
// replayed through the reference evaluator against all active assertions; a violation
// means a solver bug and throws rather than returning a bogus region.
class SolverSession {
 public:
  virtual ~SolverSession() = default;

  VarId declare_boolean(std::string name) { return declare(VarSort::boolean, std::move(name), 0, 0); }

  VarId declare_rank(std::string name) { return declare(VarSort::rank, std::move(name), 0, 0); }

  VarId declare_bounded_int(std::string name, long long lo, long long hi) {
    if (lo > hi) {
      throw ModelError("empty integer domain for " + name);
    }
    return declare(VarSort::bounded_int, std::move(name), lo, hi);
  }

  void assert_formula(Formula f) {
    assertions_.emplace_back(f, depth());
    on_assert(f);
  }

  void push() {
    marks_.push_back({declarations_.size(), assertions_.size()});
    on_push();
  }

  void pop() {
    if (marks_.empty()) {
      throw ModelError("pop without matching push");
    }
    auto mark = marks_.back();
    marks_.pop_back();
    for (std::size_t v = mark.declarations; v < declarations_.size(); ++v) {
      declarations_[v].alive = false;
      alive_names_.erase(declarations_[v].name);
    }
    assertions_.resize(mark.assertions);
    on_pop();
  }

  uint32_t depth() const { return static_cast<uint32_t>(marks_.size()); }

  // Assumptions must be boolean literals: a bool_var or its negation.
  CheckResult check(std::vector<Formula> const& assumptions = {}) {
    for (auto const& a : assumptions) {
      literal_parts(a);  // validates the shape
    }
    ++checks_;
    model_valid_ = false;
    CheckResult result = do_check(assumptions);
    if (result == CheckResult::sat) {
      model_ = Model{};
      extract_model(model_);
      verify_model(assumptions);
      model_valid_ = true;
    }
    return result;
  }

  Model const& model() const {
    if (!model_valid_) {
      throw ModelError("no model available");
    }
    return model_;
  }

  std::vector<VarInfo> const& declarations() const { return declarations_; }
  VarInfo const& info(VarId v) const { return declarations_.at(v); }

  void set_deadline(std::optional<std::chrono::steady_clock::time_point> deadline) {
    deadline_ = deadline;
  }

  uint64_t check_count() const { return checks_; }

  static std::pair<VarId, bool> literal_parts(Formula const& f) {
    if (f.kind() == Formula::Kind::bool_var) {
      return {f.node().var, false};
    }
    if (f.kind() == Formula::Kind::negation &&
        f.node().children[0].kind() == Formula::Kind::bool_var) {
      return {f.node().children[0].node().var, true};
    }
    throw ModelError("assumption is not a boolean literal");
  }

 protected:
  virtual void on_declare(VarId v) = 0;
  virtual void on_assert(Formula const& f) = 0;
  virtual void on_push() = 0;
  virtual void on_pop() = 0;
  virtual CheckResult do_check(std::vector<Formula> const& assumptions) = 0;
  virtual void extract_model(Model& out) = 0;

  bool deadline_passed() const {
    return deadline_ && std::chrono::steady_clock::now() >= *deadline_;
  }

  std::optional<std::chrono::steady_clock::time_point> deadline_;
  std::vector<VarInfo> declarations_;

 private:
  struct ScopeMark {
    std::size_t declarations;
    std::size_t assertions;
  };

  VarId declare(VarSort sort, std::string name, long long lo, long long hi) {
    if (!alive_names_.insert(name).second) {
      throw ModelError("duplicate variable name " + name);
    }
    VarId id = static_cast<VarId>(declarations_.size());
    declarations_.push_back(VarInfo{sort, std::move(name), lo, hi, true, depth()});
    on_declare(id);
    return id;
  }

  void verify_model(std::vector<Formula> const& assumptions) {
    for (std::size_t v = 0; v < declarations_.size(); ++v) {
      auto const& d = declarations_[v];
      if (d.alive && d.sort == VarSort::bounded_int) {
        long long value = model_.int_value(static_cast<VarId>(v), d.lo);
        if (value < d.lo || value > d.hi) {
          throw ModelError("model value for " + d.name + " leaves its domain");
        }
      }
    }
    for (auto const& [f, scope] : assertions_) {
      if (!evaluate(f, model_, &declarations_)) {
        throw ModelError("model violates an active assertion");
      }
    }
    for (auto const& a : assumptions) {
      if (!evaluate(a, model_, &declarations_)) {
        throw ModelError("model violates an assumption");
      }
    }
  }

  std::vector<std::pair<Formula, uint32_t>> assertions_;
  std::vector<ScopeMark> marks_;
  std::unordered_set<std::string> alive_names_;
  Model model_;
  bool model_valid_ = false;
  uint64_t checks_ = 0;
};

// CDCL(T) session over the in-process SAT core. Assertions are compiled by Tseitin
// transformation; each scope gets a guard variable, scoped clauses carry the guard
// negated, and check runs with the live guards as assumptions. Popping a scope asserts
// the negated guard permanently, which retires its clauses. Theory reasoning happens in
// a final check over full assignments:
//   - every bounded integer must have a feasible value under its assigned (in)equality
//     atoms, otherwise the negated atom combination is learned;
//   - rank atoms form a graph (x>y gives a strict edge x->y, its negation a nonstrict
//     edge y->x); a strongly connected component containing a strict edge is
//     inconsistent and the component's atom assignment is negated.
// Both lemma kinds hold in every model of the theory, so they are added unguarded.
class InternalSolver final : public SolverSession {
 public:
  InternalSolver() {
    true_var_ = sat_.new_var();
    sat_.add_clause({SatSolver::make_lit(true_var_)});
    sat_.set_final_check([this] { return theory_check(); });
    sat_.set_interrupt([this] { return deadline_passed(); });
  }

  uint64_t conflicts() const { return sat_.conflicts(); }

 protected:
  void on_declare(VarId v) override {
    bool_sat_.resize(std::max<std::size_t>(bool_sat_.size(), v + 1), kNoSatVar);
    if (info(v).sort == VarSort::boolean) {
      bool_sat_[v] = sat_.new_var();
    }
  }

  void on_assert(Formula const& f) override {
    SatSolver::Lit root = encode(f);
    if (guards_.empty()) {
      sat_.add_clause({root});
    } else {
      sat_.add_clause({SatSolver::make_lit(guards_.back(), true), root});
    }
  }

  void on_push() override { guards_.push_back(sat_.new_var()); }

  void on_pop() override {
    SatSolver::Var guard = guards_.back();
    guards_.pop_back();
    sat_.add_clause({SatSolver::make_lit(guard, true)});
  }

  CheckResult do_check(std::vector<Formula> const& assumptions) override {
    std::vector<SatSolver::Lit> lits;
    lits.reserve(guards_.size() + assumptions.size());
    for (SatSolver::Var g : guards_) {
      lits.push_back(SatSolver::make_lit(g));
    }
    for (auto const& a : assumptions) {
      auto [var, negated] = literal_parts(a);
      lits.push_back(SatSolver::make_lit(boolean_atom(var), negated));
    }
    switch (sat_.solve(lits)) {
      case SatSolver::Result::sat:
        return CheckResult::sat;
      case SatSolver::Result::unsat:
        return CheckResult::unsat;
      case SatSolver::Result::unknown:
        return CheckResult::unknown;
    }
    return CheckResult::unknown;
  }

  void extract_model(Model& out) override {
    auto value = [this](SatSolver::Var v) { return sat_.model_value(v); };
    for (std::size_t v = 0; v < declarations_.size(); ++v) {
      auto const& d = declarations_[v];
      VarId id = static_cast<VarId>(v);
      if (d.sort == VarSort::boolean) {
        out.booleans[id] = bool_sat_[v] != kNoSatVar && value(bool_sat_[v]);
      } else if (d.sort == VarSort::bounded_int) {
        auto feasible = feasible_int(id, value);
        if (!feasible) {
          throw ModelError("sat assignment with infeasible integer atoms for " + d.name);
        }
        out.integers[id] = *feasible;
      }
    }
    RankAnalysis ranks = analyze_ranks(value);
    if (!ranks.conflicts.empty()) {
      throw ModelError("sat assignment with cyclic rank constraints");
    }
    for (auto const& [var, level] : ranks.levels) {
      out.ranks[var] = Rational(level);
    }
  }

 private:
  static constexpr uint32_t kNoSatVar = ~0u;

  struct IntAtoms {
    std::vector<std::pair<long long, SatSolver::Var>> le;
    std::vector<std::pair<long long, SatSolver::Var>> eq;
  };

  struct RankAtom {
    VarId lhs;
    VarId rhs;
    SatSolver::Var var;
  };

  struct RankAnalysis {
    std::vector<std::vector<SatSolver::Lit>> conflicts;
    std::unordered_map<VarId, long long> levels;
  };

  SatSolver::Var boolean_atom(VarId v) {
    if (v >= bool_sat_.size() || bool_sat_[v] == kNoSatVar) {
      throw ModelError("variable is not boolean");
    }
    return bool_sat_[v];
  }

  SatSolver::Lit encode(Formula const& f) {
    auto const& n = f.node();
    switch (n.kind) {
      case Formula::Kind::constant:
        return SatSolver::make_lit(true_var_, !n.value);
      case Formula::Kind::bool_var:
        return SatSolver::make_lit(boolean_atom(n.var));
      case Formula::Kind::int_le: {
        auto [it, fresh] = le_memo_.try_emplace({n.var, n.bound}, 0);
        if (fresh) {
          it->second = sat_.new_var();
          int_atoms_[n.var].le.emplace_back(n.bound, it->second);
        }
        return SatSolver::make_lit(it->second);
      }
      case Formula::Kind::int_eq: {
        auto [it, fresh] = eq_memo_.try_emplace({n.var, n.bound}, 0);
        if (fresh) {
          it->second = sat_.new_var();
          int_atoms_[n.var].eq.emplace_back(n.bound, it->second);
        }
        return SatSolver::make_lit(it->second);
      }
      case Formula::Kind::rank_gt: {
        auto [it, fresh] = rank_memo_.try_emplace({n.var, n.var2}, 0);
        if (fresh) {
          it->second = sat_.new_var();
          rank_atoms_.push_back(RankAtom{n.var, n.var2, it->second});
        }
        return SatSolver::make_lit(it->second);
      }
      case Formula::Kind::negation:
        return SatSolver::negate(encode(n.children[0]));
      default:
        break;
    }
    auto memo = tseitin_memo_.find(&n);
    if (memo != tseitin_memo_.end()) {
      return memo->second;
    }
    std::vector<SatSolver::Lit> child_lits;
    child_lits.reserve(n.children.size());
    for (auto const& child : n.children) {
      child_lits.push_back(encode(child));
    }
    SatSolver::Lit lit = SatSolver::make_lit(sat_.new_var());
    switch (n.kind) {
      case Formula::Kind::implication:
        child_lits[0] = SatSolver::negate(child_lits[0]);
        [[fallthrough]];
      case Formula::Kind::disjunction: {
        std::vector<SatSolver::Lit> big{SatSolver::negate(lit)};
        for (SatSolver::Lit c : child_lits) {
          sat_.add_clause({SatSolver::negate(c), lit});
          big.push_back(c);
        }
        sat_.add_clause(std::move(big));
        break;
      }
      case Formula::Kind::conjunction: {
        std::vector<SatSolver::Lit> big{lit};
        for (SatSolver::Lit c : child_lits) {
          sat_.add_clause({SatSolver::negate(lit), c});
          big.push_back(SatSolver::negate(c));
        }
        sat_.add_clause(std::move(big));
        break;
      }
      case Formula::Kind::equivalence: {
        SatSolver::Lit a = child_lits[0];
        SatSolver::Lit b = child_lits[1];
        sat_.add_clause({SatSolver::negate(lit), SatSolver::negate(a), b});
        sat_.add_clause({SatSolver::negate(lit), a, SatSolver::negate(b)});
        sat_.add_clause({lit, a, b});
        sat_.add_clause({lit, SatSolver::negate(a), SatSolver::negate(b)});
        break;
      }
      default:
        throw ModelError("unreachable formula kind in encoder");
    }
    tseitin_memo_.emplace(&n, lit);
    retained_.push_back(f.ptr());
    return lit;
  }

  template <typename ValueFn>
  std::optional<long long> feasible_int(VarId id, ValueFn&& value) const {
    auto const& d = declarations_[id];
    long long lo = d.lo;
    long long hi = d.hi;
    std::unordered_set<long long> excluded;
    auto atoms = int_atoms_.find(id);
    if (atoms != int_atoms_.end()) {
      for (auto const& [bound, satvar] : atoms->second.le) {
        if (value(satvar)) {
          hi = std::min(hi, bound);
        } else {
          lo = std::max(lo, bound + 1);
        }
      }
      for (auto const& [bound, satvar] : atoms->second.eq) {
        if (value(satvar)) {
          lo = std::max(lo, bound);
          hi = std::min(hi, bound);
        } else {
          excluded.insert(bound);
        }
      }
    }
    for (long long x = lo; x <= hi; ++x) {
      if (!excluded.count(x)) {
        return x;
      }
    }
    return std::nullopt;
  }

  // The SAT core calls this on full assignments; it may run again on the model after
  // solving, so it must only read assignment values through the callback.
  std::vector<std::vector<SatSolver::Lit>> theory_check() {
    auto value = [this](SatSolver::Var v) { return sat_.value_var(v) == 1; };
    std::vector<std::vector<SatSolver::Lit>> conflicts;
    for (auto const& [id, atoms] : int_atoms_) {
      if (feasible_int(id, value)) {
        continue;
      }
      std::vector<SatSolver::Lit> clause;
      for (auto const& [bound, satvar] : atoms.le) {
        clause.push_back(SatSolver::make_lit(satvar, value(satvar)));
      }
      for (auto const& [bound, satvar] : atoms.eq) {
        clause.push_back(SatSolver::make_lit(satvar, value(satvar)));
      }
      conflicts.push_back(std::move(clause));
    }
    RankAnalysis ranks = analyze_ranks(value);
    for (auto& clause : ranks.conflicts) {
      conflicts.push_back(std::move(clause));
    }
    return conflicts;
  }

  template <typename ValueFn>
  RankAnalysis analyze_ranks(ValueFn&& value) const {
    RankAnalysis result;
    std::unordered_map<VarId, uint32_t> dense;
    std::vector<VarId> names;
    auto intern = [&](VarId v) {
      auto [it, fresh] = dense.try_emplace(v, static_cast<uint32_t>(names.size()));
      if (fresh) {
        names.push_back(v);
      }
      return it->second;
    };
    struct Edge {
      uint32_t target;
      bool strict;
    };
    std::vector<std::vector<Edge>> adjacency;
    struct AtomEdge {
      uint32_t from;
      uint32_t to;
    };
    std::vector<AtomEdge> atom_edges(rank_atoms_.size());
    for (std::size_t i = 0; i < rank_atoms_.size(); ++i) {
      auto const& atom = rank_atoms_[i];
      bool holds = value(atom.var);
      uint32_t from = intern(holds ? atom.lhs : atom.rhs);
      uint32_t to = intern(holds ? atom.rhs : atom.lhs);
      adjacency.resize(names.size());
      adjacency[from].push_back(Edge{to, holds});
      atom_edges[i] = AtomEdge{from, to};
    }
    adjacency.resize(names.size());
    uint32_t n = static_cast<uint32_t>(names.size());
    // Iterative Tarjan; components are emitted sinks-first, so every cross edge points
    // at an already numbered component.
    std::vector<uint32_t> component(n, ~0u);
    std::vector<uint32_t> index(n, ~0u);
    std::vector<uint32_t> lowlink(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<uint32_t> stack;
    std::vector<long long> component_level;
    uint32_t next_index = 0;
    struct Frame {
      uint32_t node;
      std::size_t edge;
    };
    std::vector<Frame> frames;
    for (uint32_t root = 0; root < n; ++root) {
      if (index[root] != ~0u) {
        continue;
      }
      frames.push_back(Frame{root, 0});
      index[root] = lowlink[root] = next_index++;
      stack.push_back(root);
      on_stack[root] = true;
      while (!frames.empty()) {
        Frame& frame = frames.back();
        uint32_t node = frame.node;
        if (frame.edge < adjacency[node].size()) {
          uint32_t target = adjacency[node][frame.edge++].target;
          if (index[target] == ~0u) {
            index[target] = lowlink[target] = next_index++;
            stack.push_back(target);
            on_stack[target] = true;
            frames.push_back(Frame{target, 0});
          } else if (on_stack[target]) {
            lowlink[node] = std::min(lowlink[node], index[target]);
          }
          continue;
        }
        if (lowlink[node] == index[node]) {
          uint32_t comp = static_cast<uint32_t>(component_level.size());
          component_level.push_back(0);
          std::vector<uint32_t> members;
          while (true) {
            uint32_t member = stack.back();
            stack.pop_back();
            on_stack[member] = false;
            component[member] = comp;
            members.push_back(member);
            if (member == node) {
              break;
            }
          }
          long long level = 0;
          bool inner_strict = false;
          for (uint32_t member : members) {
            for (auto const& edge : adjacency[member]) {
              if (component[edge.target] == comp) {
                inner_strict = inner_strict || edge.strict;
              } else {
                level = std::max(level,
                                 component_level[component[edge.target]] + (edge.strict ? 1 : 0));
              }
            }
          }
          component_level[comp] = level;
          if (inner_strict) {
            // A short lemma prunes far better than negating the whole component:
            // take one strict inner edge and close it into a cycle with a BFS path,
            // then forbid exactly that cycle's atom assignment.
            std::unordered_map<uint32_t, uint32_t> local;
            local.reserve(members.size() * 2);
            for (uint32_t i = 0; i < members.size(); ++i) {
              local.emplace(members[i], i);
            }
            struct InnerEdge {
              uint32_t to;
              std::size_t atom;
            };
            std::vector<std::vector<InnerEdge>> inner(members.size());
            std::size_t strict_atom = rank_atoms_.size();
            for (std::size_t i = 0; i < rank_atoms_.size(); ++i) {
              if (component[atom_edges[i].from] != comp ||
                  component[atom_edges[i].to] != comp) {
                continue;
              }
              inner[local[atom_edges[i].from]].push_back(
                  InnerEdge{local[atom_edges[i].to], i});
              if (strict_atom == rank_atoms_.size() && value(rank_atoms_[i].var)) {
                strict_atom = i;
              }
            }
            uint32_t start = local[atom_edges[strict_atom].to];
            uint32_t goal = local[atom_edges[strict_atom].from];
            std::vector<std::size_t> via(members.size(), rank_atoms_.size());
            std::vector<uint32_t> prev(members.size(), ~0u);
            std::vector<bool> seen(members.size(), false);
            std::vector<uint32_t> queue{start};
            seen[start] = true;
            for (std::size_t head = 0; head < queue.size() && !seen[goal]; ++head) {
              for (auto const& edge : inner[queue[head]]) {
                if (!seen[edge.to]) {
                  seen[edge.to] = true;
                  prev[edge.to] = queue[head];
                  via[edge.to] = edge.atom;
                  queue.push_back(edge.to);
                }
              }
            }
            std::vector<SatSolver::Lit> clause;
            clause.push_back(SatSolver::make_lit(rank_atoms_[strict_atom].var,
                                                 value(rank_atoms_[strict_atom].var)));
            for (uint32_t at = goal; at != start; at = prev[at]) {
              auto const& atom = rank_atoms_[via[at]];
              clause.push_back(SatSolver::make_lit(atom.var, value(atom.var)));
            }
            result.conflicts.push_back(std::move(clause));
          }
        }
        frames.pop_back();
        if (!frames.empty()) {
          Frame& parent = frames.back();
          lowlink[parent.node] = std::min(lowlink[parent.node], lowlink[node]);
        }
      }
    }
    if (result.conflicts.empty()) {
      for (uint32_t v = 0; v < n; ++v) {
        result.levels[names[v]] = component_level[component[v]];
      }
    }
    return result;
  }

  SatSolver sat_;
  SatSolver::Var true_var_ = 0;
  std::vector<SatSolver::Var> bool_sat_;
  std::vector<SatSolver::Var> guards_;
  std::map<std::pair<VarId, long long>, SatSolver::Var> le_memo_;
  std::map<std::pair<VarId, long long>, SatSolver::Var> eq_memo_;
  std::map<std::pair<VarId, VarId>, SatSolver::Var> rank_memo_;
  std::unordered_map<VarId, IntAtoms> int_atoms_;
  std::vector<RankAtom> rank_atoms_;
  std::unordered_map<Formula::Node const*, SatSolver::Lit> tseitin_memo_;
  std::vector<std::shared_ptr<Formula::Node const>> retained_;
};

}  // namespace pomdp_shield
