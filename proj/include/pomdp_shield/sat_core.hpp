#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "pomdp_shield/util.hpp"

namespace pomdp_shield {

// CDCL SAT solver with two-watched-literal propagation, 1-UIP learning, activity
// ordering, phase saving and Luby restarts. A final-check hook lets theory plugins veto
// full assignments by returning conflict clauses (which must be theory-valid, i.e.
// permanently addable). Deterministic: ties in the order heap break on variable index.
class SatSolver {
 public:
  using Var = uint32_t;
  using Lit = uint32_t;  // 2*var + (1 if negated)

  static constexpr uint32_t kNoClause = ~0u;
  static constexpr Lit kLitUndef = ~0u;

  static Lit make_lit(Var v, bool negated = false) { return 2 * v + (negated ? 1 : 0); }
  static Var var_of(Lit l) { return l >> 1; }
  static bool sign_of(Lit l) { return l & 1; }
  static Lit negate(Lit l) { return l ^ 1; }

  enum class Result { sat, unsat, unknown };

  Var new_var() {
    Var v = static_cast<Var>(assigns_.size());
    assigns_.push_back(0);
    level_.push_back(0);
    reason_.push_back(kNoClause);
    activity_.push_back(0.0);
    polarity_.push_back(false);
    seen_.push_back(0);
    heap_index_.push_back(~0u);
    watches_.emplace_back();
    watches_.emplace_back();
    heap_insert(v);
    return v;
  }

  uint32_t num_vars() const { return static_cast<uint32_t>(assigns_.size()); }

  // Current assignment: 1 true, -1 false, 0 unassigned.
  int8_t value_var(Var v) const { return assigns_[v]; }
  int8_t value_lit(Lit l) const {
    int8_t v = assigns_[var_of(l)];
    return sign_of(l) ? static_cast<int8_t>(-v) : v;
  }

  bool okay() const { return ok_; }

  // Must be called with no decisions on the trail. Returns false once the clause set
  // is unsatisfiable.
  bool add_clause(std::vector<Lit> lits) {
    if (!ok_) {
      return false;
    }
    std::sort(lits.begin(), lits.end());
    std::vector<Lit> kept;
    Lit previous = kLitUndef;
    for (Lit l : lits) {
      if (l == previous) {
        continue;
      }
      if (previous != kLitUndef && l == negate(previous)) {
        return true;  // tautology
      }
      if (value_lit(l) == 1 && level_[var_of(l)] == 0) {
        return true;  // satisfied at root
      }
      if (value_lit(l) == -1 && level_[var_of(l)] == 0) {
        previous = l;
        continue;  // permanently false literal
      }
      kept.push_back(l);
      previous = l;
    }
    if (kept.empty()) {
      ok_ = false;
      return false;
    }
    if (kept.size() == 1) {
      if (value_lit(kept[0]) == -1) {
        ok_ = false;
        return false;
      }
      if (value_lit(kept[0]) == 0) {
        enqueue(kept[0], kNoClause);
        if (propagate() != kNoClause) {
          ok_ = false;
          return false;
        }
      }
      return true;
    }
    attach_clause(std::move(kept));
    return true;
  }

  // Conflict clauses returned from here are added permanently; an empty result accepts
  // the assignment.
  void set_final_check(std::function<std::vector<std::vector<Lit>>()> hook) {
    final_check_ = std::move(hook);
  }

  // Polled during search; returning true aborts with Result::unknown.
  void set_interrupt(std::function<bool()> hook) { interrupt_ = std::move(hook); }

  uint64_t conflicts() const { return total_conflicts_; }

  Result solve(std::vector<Lit> const& assumptions) {
    if (!ok_) {
      return Result::unsat;
    }
    cancel_until(0);
    if (propagate() != kNoClause) {
      ok_ = false;
      return Result::unsat;
    }
    uint64_t conflicts_here = 0;
    uint32_t restart_index = 0;
    uint64_t restart_budget = luby(restart_index) * 128;
    while (true) {
      uint32_t conflict = propagate();
      if (conflict != kNoClause) {
        ++total_conflicts_;
        ++conflicts_here;
        if (decision_level() == 0) {
          ok_ = false;
          return Result::unsat;
        }
        std::vector<Lit> learnt;
        uint32_t backtrack_level = analyze(conflict, learnt);
        cancel_until(backtrack_level);
        record_learnt(std::move(learnt));
        decay_activities();
        if ((conflicts_here & 127) == 0 && interrupt_ && interrupt_()) {
          cancel_until(0);
          return Result::unknown;
        }
        if (conflicts_here >= restart_budget) {
          conflicts_here = 0;
          restart_budget = luby(++restart_index) * 128;
          cancel_until(0);
        }
        continue;
      }
      // Reapply assumptions as pseudo-decisions on levels 1..k.
      if (decision_level() < assumptions.size()) {
        Lit a = assumptions[decision_level()];
        int8_t v = value_lit(a);
        if (v == -1) {
          cancel_until(0);
          return Result::unsat;  // conflicts with the other assumptions / root units
        }
        new_decision_level();
        if (v == 0) {
          enqueue(a, kNoClause);
        }
        continue;
      }
      Var next = pick_branch_var();
      if (next == ~0u) {
        if (final_check_) {
          auto extra = final_check_();
          if (!extra.empty()) {
            cancel_until(0);
            for (auto& clause : extra) {
              if (!add_clause(std::move(clause))) {
                return Result::unsat;
              }
            }
            if (interrupt_ && interrupt_()) {
              return Result::unknown;
            }
            continue;
          }
        }
        model_.assign(assigns_.begin(), assigns_.end());
        cancel_until(0);
        return Result::sat;
      }
      new_decision_level();
      enqueue(make_lit(next, !polarity_[next]), kNoClause);
    }
  }

  // Valid after Result::sat.
  bool model_value(Var v) const { return model_[v] == 1; }

 private:
  void attach_clause(std::vector<Lit> lits) {
    uint32_t id = static_cast<uint32_t>(clauses_.size());
    watches_[lits[0]].push_back(id);
    watches_[lits[1]].push_back(id);
    clauses_.push_back(std::move(lits));
  }

  uint32_t decision_level() const { return static_cast<uint32_t>(trail_lim_.size()); }

  void new_decision_level() { trail_lim_.push_back(static_cast<uint32_t>(trail_.size())); }

  void enqueue(Lit l, uint32_t reason) {
    Var v = var_of(l);
    assigns_[v] = sign_of(l) ? -1 : 1;
    level_[v] = decision_level();
    reason_[v] = reason;
    trail_.push_back(l);
  }

  uint32_t propagate() {
    while (qhead_ < trail_.size()) {
      Lit p = trail_[qhead_++];
      Lit false_lit = negate(p);
      auto& watch_list = watches_[false_lit];
      std::size_t keep = 0;
      uint32_t conflict = kNoClause;
      for (std::size_t i = 0; i < watch_list.size(); ++i) {
        uint32_t clause_id = watch_list[i];
        if (conflict != kNoClause) {
          watch_list[keep++] = clause_id;
          continue;
        }
        auto& clause = clauses_[clause_id];
        if (clause[0] == false_lit) {
          std::swap(clause[0], clause[1]);
        }
        if (value_lit(clause[0]) == 1) {
          watch_list[keep++] = clause_id;
          continue;
        }
        bool moved = false;
        for (std::size_t k = 2; k < clause.size(); ++k) {
          if (value_lit(clause[k]) != -1) {
            std::swap(clause[1], clause[k]);
            watches_[clause[1]].push_back(clause_id);
            moved = true;
            break;
          }
        }
        if (moved) {
          continue;
        }
        watch_list[keep++] = clause_id;
        if (value_lit(clause[0]) == -1) {
          conflict = clause_id;
          qhead_ = static_cast<uint32_t>(trail_.size());
        } else {
          enqueue(clause[0], clause_id);
        }
      }
      watch_list.resize(keep);
      if (conflict != kNoClause) {
        return conflict;
      }
    }
    return kNoClause;
  }

  uint32_t analyze(uint32_t conflict, std::vector<Lit>& learnt) {
    learnt.push_back(kLitUndef);  // slot for the asserting literal
    uint32_t counter = 0;
    Lit p = kLitUndef;
    std::size_t index = trail_.size();
    uint32_t current = conflict;
    while (true) {
      auto const& clause = clauses_[current];
      for (Lit q : clause) {
        if (q == p) {
          continue;
        }
        Var v = var_of(q);
        if (!seen_[v] && level_[v] > 0) {
          seen_[v] = 1;
          bump_activity(v);
          if (level_[v] >= decision_level()) {
            ++counter;
          } else {
            learnt.push_back(q);
          }
        }
      }
      while (!seen_[var_of(trail_[index - 1])]) {
        --index;
      }
      --index;
      p = trail_[index];
      Var v = var_of(p);
      seen_[v] = 0;
      --counter;
      if (counter == 0) {
        break;
      }
      current = reason_[v];
    }
    learnt[0] = negate(p);
    uint32_t backtrack = 0;
    std::size_t watch_pos = 1;
    for (std::size_t i = 1; i < learnt.size(); ++i) {
      Var v = var_of(learnt[i]);
      if (level_[v] > backtrack) {
        backtrack = level_[v];
        watch_pos = i;
      }
      seen_[v] = 0;
    }
    if (learnt.size() > 1) {
      std::swap(learnt[1], learnt[watch_pos]);
    }
    return backtrack;
  }

  void record_learnt(std::vector<Lit> learnt) {
    if (learnt.size() == 1) {
      enqueue(learnt[0], kNoClause);
      return;
    }
    uint32_t id = static_cast<uint32_t>(clauses_.size());
    watches_[learnt[0]].push_back(id);
    watches_[learnt[1]].push_back(id);
    Lit asserting = learnt[0];
    clauses_.push_back(std::move(learnt));
    enqueue(asserting, id);
  }

  void cancel_until(uint32_t target_level) {
    if (decision_level() <= target_level) {
      return;
    }
    uint32_t boundary = trail_lim_[target_level];
    for (std::size_t i = trail_.size(); i > boundary; --i) {
      Var v = var_of(trail_[i - 1]);
      polarity_[v] = assigns_[v] == 1;
      assigns_[v] = 0;
      reason_[v] = kNoClause;
      heap_insert(v);
    }
    trail_.resize(boundary);
    trail_lim_.resize(target_level);
    qhead_ = boundary;
  }

  Var pick_branch_var() {
    while (!heap_.empty()) {
      Var v = heap_[0];
      heap_remove_top();
      if (assigns_[v] == 0) {
        return v;
      }
    }
    return ~0u;
  }

  void bump_activity(Var v) {
    activity_[v] += activity_increment_;
    if (activity_[v] > 1e100) {
      for (auto& a : activity_) {
        a *= 1e-100;
      }
      activity_increment_ *= 1e-100;
    }
    heap_update(v);
  }

  void decay_activities() { activity_increment_ *= (1.0 / 0.95); }

  static uint64_t luby(uint32_t i) {
    // Luby sequence 1,1,2,1,1,2,4,... ; locate the finite subsequence containing i.
    uint32_t size = 1;
    uint32_t seq = 0;
    while (size < i + 1) {
      ++seq;
      size = 2 * size + 1;
    }
    while (size - 1 != i) {
      size = (size - 1) / 2;
      --seq;
      i = i % size;
    }
    return 1ull << seq;
  }

  // Binary max-heap on activity; ties break toward smaller variable index.
  bool heap_less(Var a, Var b) const {
    return activity_[a] > activity_[b] || (activity_[a] == activity_[b] && a < b);
  }

  void heap_insert(Var v) {
    if (heap_index_[v] != ~0u) {
      return;
    }
    heap_index_[v] = static_cast<uint32_t>(heap_.size());
    heap_.push_back(v);
    heap_sift_up(heap_index_[v]);
  }

  void heap_update(Var v) {
    if (heap_index_[v] != ~0u) {
      heap_sift_up(heap_index_[v]);
    }
  }

  void heap_sift_up(uint32_t pos) {
    Var v = heap_[pos];
    while (pos > 0) {
      uint32_t parent = (pos - 1) / 2;
      if (!heap_less(v, heap_[parent])) {
        break;
      }
      heap_[pos] = heap_[parent];
      heap_index_[heap_[pos]] = pos;
      pos = parent;
    }
    heap_[pos] = v;
    heap_index_[v] = pos;
  }

  void heap_remove_top() {
    Var top = heap_[0];
    heap_index_[top] = ~0u;
    Var last = heap_.back();
    heap_.pop_back();
    if (!heap_.empty()) {
      heap_[0] = last;
      heap_index_[last] = 0;
      // sift down
      uint32_t pos = 0;
      while (true) {
        uint32_t left = 2 * pos + 1;
        uint32_t right = 2 * pos + 2;
        uint32_t best = pos;
        if (left < heap_.size() && heap_less(heap_[left], heap_[best])) {
          best = left;
        }
        if (right < heap_.size() && heap_less(heap_[right], heap_[best])) {
          best = right;
        }
        if (best == pos) {
          break;
        }
        std::swap(heap_[pos], heap_[best]);
        heap_index_[heap_[pos]] = pos;
        heap_index_[heap_[best]] = best;
        pos = best;
      }
    }
  }

  bool ok_ = true;
  std::vector<int8_t> assigns_;
  std::vector<uint32_t> level_;
  std::vector<uint32_t> reason_;
  std::vector<std::vector<Lit>> clauses_;
  std::vector<std::vector<uint32_t>> watches_;  // indexed by literal
  std::vector<Lit> trail_;
  std::vector<uint32_t> trail_lim_;
  uint32_t qhead_ = 0;
  std::vector<double> activity_;
  double activity_increment_ = 1.0;
  std::vector<bool> polarity_;
  std::vector<int8_t> seen_;
  std::vector<Var> heap_;
  std::vector<uint32_t> heap_index_;
  std::vector<int8_t> model_;
  uint64_t total_conflicts_ = 0;
  std::function<std::vector<std::vector<Lit>>()> final_check_;
  std::function<bool()> interrupt_;
};

}  // namespace pomdp_shield
