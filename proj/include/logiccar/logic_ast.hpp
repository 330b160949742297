#ifndef LOGICCAR_LOGIC_AST_HPP_
#define LOGICCAR_LOGIC_AST_HPP_

// First-order rules over a single sample variable, the `.logic` rule language
// and generators for the compositional and hierarchical rule families.
//
//   formula := "forall" IDENT "(" expr ")"
//   expr    := impl
//   impl    := disj ("=>" impl)?          right-associative
//   disj    := conj ("or" conj)*
//   conj    := unary ("and" unary)*
//   unary   := "not" unary | atom
//   atom    := GRANULARITY ":" NAME "(" IDENT ")" | "(" expr ")"
//
// One rule per line; '#' starts a comment.

#include "logiccar/hierarchy.hpp"
#include "logiccar/label_space.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace logiccar {

class Formula {
 public:
  enum class Kind : std::uint8_t { kPred, kNot, kAnd, kOr, kImplies, kForAll };

  static Formula pred(LabelRef ref, std::string name, std::string var);
  static Formula negation(Formula f);
  static Formula conj(Formula a, Formula b);
  static Formula disj(Formula a, Formula b);
  static Formula implies(Formula a, Formula b);
  static Formula forall(std::string var, Formula body);

  Kind kind() const { return kind_; }
  // kPred
  const LabelRef& ref() const { return ref_; }
  const std::string& name() const { return name_; }  // granularity-local slug
  // kPred: the argument; kForAll: the bound variable
  const std::string& var() const { return var_; }
  // kNot/kForAll: lhs only
  const Formula& lhs() const { return *lhs_; }
  const Formula& rhs() const { return *rhs_; }

  friend bool operator==(const Formula& a, const Formula& b);

 private:
  static Formula binary(Kind kind, Formula a, Formula b);

  Kind kind_ = Kind::kPred;
  LabelRef ref_;
  std::string name_;
  std::string var_;
  std::shared_ptr<const Formula> lhs_;
  std::shared_ptr<const Formula> rhs_;
};

enum class Provenance : std::uint8_t { kEcl, kHpl, kUser };

struct RuleSet {
  struct Rule {
    Formula formula;
    bool trivial = false;  // degenerate exclusivity rule over an empty sibling set
  };

  Provenance provenance = Provenance::kUser;
  std::vector<Rule> rules;

  std::size_t size() const { return rules.size(); }
};

// Resolves qualified predicate names. Coarse granularities are only present
// when built with a hierarchy.
class Vocabulary {
 public:
  explicit Vocabulary(const LabelSpace& ls, const Hierarchy* h = nullptr);

  std::optional<LabelRef> resolve(Granularity g, std::string_view slug) const;
  const std::string& slug(LabelRef ref) const;
  Index cardinality(Granularity g) const;

 private:
  std::array<std::vector<std::string>, 5> slugs_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

RuleSet parse_rules(std::string_view text, const Vocabulary& vocab, Provenance provenance = Provenance::kUser);

// Canonical, minimally parenthesized text.
std::string print_rule(const Formula& f);
std::string print_rules(const RuleSet& rules);

enum class CompositionScope : std::uint8_t { kSeenOnly, kAll };

// Compositions in scope (c => v, c => o), then one exclusivity rule per verb,
// then one per object.
RuleSet gen_ecl_rules(const LabelSpace& ls, CompositionScope scope);
// Verb => coarse verb, object => coarse object, then coarse exclusivity rules.
RuleSet gen_hpl_rules(const LabelSpace& ls, const Hierarchy& h);

// Structural view of a generated-shape rule: forall x (A(x) => body) with body
// a single predicate (composed) or a conjunction of negated predicates
// (exclusive).
struct RuleShape {
  enum class Kind : std::uint8_t { kComposed, kExclusive };
  Kind kind = Kind::kComposed;
  LabelRef antecedent;
  std::vector<LabelRef> consequents;  // composed: one; exclusive: the siblings
};
std::optional<RuleShape> classify_rule(const Formula& f);

}  // namespace logiccar

#endif  // LOGICCAR_LOGIC_AST_HPP_
