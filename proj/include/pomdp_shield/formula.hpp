#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "pomdp_shield/rational.hpp"
#include "pomdp_shield/util.hpp"

namespace pomdp_shield {

using VarId = uint32_t;

enum class VarSort {
  boolean,
  rank,         // real-valued, only ever compared strictly against other ranks
  bounded_int,  // integer with an inclusive declared domain
};

struct VarInfo {
  VarSort sort = VarSort::boolean;
  std::string name;
  long long lo = 0;
  long long hi = 0;
  bool alive = true;     // false once its declaration scope was popped
  uint32_t scope = 0;    // declaration depth
};

// Immutable formula DAG over declared variables. Atoms: boolean variables, unary
// integer comparisons against constants, and strict rank comparisons.
class Formula {
 public:
  enum class Kind {
    constant,
    bool_var,
    int_eq,       // var == bound
    int_le,       // var <= bound
    rank_gt,      // var > var2
    negation,
    conjunction,
    disjunction,
    implication,  // children[0] -> children[1]
    equivalence,  // children[0] <-> children[1]
  };

  struct Node {
    Kind kind;
    bool value = false;
    VarId var = 0;
    VarId var2 = 0;
    long long bound = 0;
    std::vector<Formula> children;
  };

  Formula() : node_(constant_node(true)) {}

  Kind kind() const { return node_->kind; }
  Node const& node() const { return *node_; }
  std::shared_ptr<Node const> const& ptr() const { return node_; }

  bool is_constant(bool value) const {
    return node_->kind == Kind::constant && node_->value == value;
  }

  static Formula constant(bool value) { return Formula(constant_node(value)); }

  static Formula bool_var(VarId v) {
    auto node = std::make_shared<Node>();
    node->kind = Kind::bool_var;
    node->var = v;
    return Formula(std::move(node));
  }

  static Formula int_eq(VarId v, long long bound) {
    auto node = std::make_shared<Node>();
    node->kind = Kind::int_eq;
    node->var = v;
    node->bound = bound;
    return Formula(std::move(node));
  }

  static Formula int_le(VarId v, long long bound) {
    auto node = std::make_shared<Node>();
    node->kind = Kind::int_le;
    node->var = v;
    node->bound = bound;
    return Formula(std::move(node));
  }

  static Formula int_gt(VarId v, long long bound) { return negate(int_le(v, bound)); }

  static Formula rank_gt(VarId lhs, VarId rhs) {
    auto node = std::make_shared<Node>();
    node->kind = Kind::rank_gt;
    node->var = lhs;
    node->var2 = rhs;
    return Formula(std::move(node));
  }

  static Formula negate(Formula f) {
    if (f.kind() == Kind::constant) {
      return constant(!f.node().value);
    }
    if (f.kind() == Kind::negation) {
      return f.node().children[0];
    }
    auto node = std::make_shared<Node>();
    node->kind = Kind::negation;
    node->children.push_back(std::move(f));
    return Formula(std::move(node));
  }

  static Formula conjunction(std::vector<Formula> children) {
    std::vector<Formula> kept;
    for (auto& child : children) {
      if (child.is_constant(false)) {
        return constant(false);
      }
      if (!child.is_constant(true)) {
        kept.push_back(std::move(child));
      }
    }
    if (kept.empty()) {
      return constant(true);
    }
    if (kept.size() == 1) {
      return kept[0];
    }
    auto node = std::make_shared<Node>();
    node->kind = Kind::conjunction;
    node->children = std::move(kept);
    return Formula(std::move(node));
  }

  static Formula disjunction(std::vector<Formula> children) {
    std::vector<Formula> kept;
    for (auto& child : children) {
      if (child.is_constant(true)) {
        return constant(true);
      }
      if (!child.is_constant(false)) {
        kept.push_back(std::move(child));
      }
    }
    if (kept.empty()) {
      return constant(false);
    }
    if (kept.size() == 1) {
      return kept[0];
    }
    auto node = std::make_shared<Node>();
    node->kind = Kind::disjunction;
    node->children = std::move(kept);
    return Formula(std::move(node));
  }

  static Formula implication(Formula lhs, Formula rhs) {
    if (lhs.is_constant(true)) {
      return rhs;
    }
    if (lhs.is_constant(false) || rhs.is_constant(true)) {
      return constant(true);
    }
    if (rhs.is_constant(false)) {
      return negate(std::move(lhs));
    }
    auto node = std::make_shared<Node>();
    node->kind = Kind::implication;
    node->children.push_back(std::move(lhs));
    node->children.push_back(std::move(rhs));
    return Formula(std::move(node));
  }

  static Formula equivalence(Formula lhs, Formula rhs) {
    if (lhs.is_constant(true)) {
      return rhs;
    }
    if (rhs.is_constant(true)) {
      return lhs;
    }
    if (lhs.is_constant(false)) {
      return negate(std::move(rhs));
    }
    if (rhs.is_constant(false)) {
      return negate(std::move(lhs));
    }
    auto node = std::make_shared<Node>();
    node->kind = Kind::equivalence;
    node->children.push_back(std::move(lhs));
    node->children.push_back(std::move(rhs));
    return Formula(std::move(node));
  }

 private:
  explicit Formula(std::shared_ptr<Node const> node) : node_(std::move(node)) {}

  static std::shared_ptr<Node const> constant_node(bool value) {
    auto node = std::make_shared<Node>();
    node->kind = Kind::constant;
    node->value = value;
    return node;
  }

  std::shared_ptr<Node const> node_;
};

// Assignment for all three sorts. Lookups fall back to the sort's default (false,
// the domain minimum, rank zero) so unconstrained variables always have a value.
struct Model {
  std::unordered_map<VarId, bool> booleans;
  std::unordered_map<VarId, long long> integers;
  std::unordered_map<VarId, Rational> ranks;

  bool bool_value(VarId v) const {
    auto it = booleans.find(v);
    return it != booleans.end() && it->second;
  }

  long long int_value(VarId v, long long fallback = 0) const {
    auto it = integers.find(v);
    return it != integers.end() ? it->second : fallback;
  }

  Rational rank_value(VarId v) const {
    auto it = ranks.find(v);
    return it != ranks.end() ? it->second : Rational(0);
  }
};

inline bool evaluate(Formula const& f, Model const& model,
                     std::vector<VarInfo> const* declarations = nullptr) {
  auto const& node = f.node();
  switch (node.kind) {
    case Formula::Kind::constant:
      return node.value;
    case Formula::Kind::bool_var:
      return model.bool_value(node.var);
    case Formula::Kind::int_eq: {
      long long lo = declarations != nullptr ? (*declarations)[node.var].lo : 0;
      return model.int_value(node.var, lo) == node.bound;
    }
    case Formula::Kind::int_le: {
      long long lo = declarations != nullptr ? (*declarations)[node.var].lo : 0;
      return model.int_value(node.var, lo) <= node.bound;
    }
    case Formula::Kind::rank_gt:
      return model.rank_value(node.var) > model.rank_value(node.var2);
    case Formula::Kind::negation:
      return !evaluate(node.children[0], model, declarations);
    case Formula::Kind::conjunction:
      for (auto const& child : node.children) {
        if (!evaluate(child, model, declarations)) {
          return false;
        }
      }
      return true;
    case Formula::Kind::disjunction:
      for (auto const& child : node.children) {
        if (evaluate(child, model, declarations)) {
          return true;
        }
      }
      return false;
    case Formula::Kind::implication:
      return !evaluate(node.children[0], model, declarations) ||
             evaluate(node.children[1], model, declarations);
    case Formula::Kind::equivalence:
      return evaluate(node.children[0], model, declarations) ==
             evaluate(node.children[1], model, declarations);
  }
  throw ModelError("unreachable formula kind");
}

}  // namespace pomdp_shield
