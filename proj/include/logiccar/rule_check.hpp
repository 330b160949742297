#ifndef LOGICCAR_RULE_CHECK_HPP_
#define LOGICCAR_RULE_CHECK_HPP_

// Agreement between the generic fuzzy evaluation of rules and the closed-form
// constraint degrees, on random score tables.

#include "logiccar/fuzzy.hpp"
#include "logiccar/logic_ast.hpp"
#include "logiccar/rng.hpp"
#include "logiccar/score_table.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>

namespace logiccar {

ScoreTable random_score_table(Rng& rng, const std::array<Index, 5>& cardinality, Index samples);

// Closed form for a generated-shape rule.
double closed_form_degree(const RuleShape& shape, const ScoreTable& st, const FuzzyConfig& cfg);

// Generic degree comparable with the closed form: the whole rule for composed
// rules, the mean over conjuncts of forall x (A(x) => not B_m(x)) for
// exclusivity rules.
double generic_degree(const RuleShape& shape, const ScoreTable& st, const FuzzyConfig& cfg);

struct CrossCheck {
  double max_deviation = 0.0;
  // Whole-rule generic evaluation vs closed form; nonzero only for
  // exclusivity rules with two or more siblings.
  double max_literal_deviation = 0.0;
  std::size_t rules_checked = 0;
  std::size_t trivial_skipped = 0;
  std::size_t unclassified = 0;  // evaluated generically, no closed form
  std::size_t tables = 0;
};

CrossCheck cross_check(std::span<const RuleSet> rule_sets, const std::array<Index, 5>& cardinality,
                       std::size_t tables, Index max_samples, std::uint64_t seed, const FuzzyConfig& cfg = {});

}  // namespace logiccar

#endif  // LOGICCAR_RULE_CHECK_HPP_
