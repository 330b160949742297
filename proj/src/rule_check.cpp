#include "logiccar/rule_check.hpp"

#include "logiccar/constraint_losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace logiccar {

ScoreTable random_score_table(Rng& rng, const std::array<Index, 5>& cardinality, Index samples) {
  if (samples < 1) throw std::invalid_argument("random_score_table: need at least one sample");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ScoreTable st;
  for (std::size_t g = 0; g < st.scores.size(); ++g) {
    st.scores[g].resize(cardinality[g], samples);
    for (Index r = 0; r < cardinality[g]; ++r)
      for (Index k = 0; k < samples; ++k) st.scores[g](r, k) = unit(rng);
  }
  st.composition_logits.resize(cardinality[0], samples);
  for (Index r = 0; r < cardinality[0]; ++r)
    for (Index k = 0; k < samples; ++k) st.composition_logits(r, k) = normal(rng);
  return st;
}

double closed_form_degree(const RuleShape& shape, const ScoreTable& st, const FuzzyConfig& cfg) {
  if (shape.kind == RuleShape::Kind::kComposed)
    return implication_degree(st, shape.antecedent, shape.consequents.front(), cfg);
  return exclusivity_degree(st, shape.antecedent, shape.consequents, cfg);
}

namespace {

Formula pred_of(LabelRef ref) { return Formula::pred(ref, std::string(granularity_name(ref.granularity)), "x"); }

}  // namespace

double generic_degree(const RuleShape& shape, const ScoreTable& st, const FuzzyConfig& cfg) {
  const Formula a = pred_of(shape.antecedent);
  if (shape.kind == RuleShape::Kind::kComposed)
    return evaluate_formula(Formula::forall("x", Formula::implies(a, pred_of(shape.consequents.front()))), st, cfg);
  double acc = 0.0;
  for (LabelRef b : shape.consequents)
    acc += evaluate_formula(Formula::forall("x", Formula::implies(a, Formula::negation(pred_of(b)))), st, cfg);
  return acc / static_cast<double>(shape.consequents.size());
}

CrossCheck cross_check(std::span<const RuleSet> rule_sets, const std::array<Index, 5>& cardinality,
                       std::size_t tables, Index max_samples, std::uint64_t seed, const FuzzyConfig& cfg) {
  if (max_samples < 1) throw std::invalid_argument("cross_check: max_samples must be >= 1");
  Rng rng = named_stream(seed, "rules-check");
  std::uniform_int_distribution<Index> k_dist(1, max_samples);
  CrossCheck out;
  out.tables = tables;
  for (std::size_t t = 0; t < tables; ++t) {
    const ScoreTable st = random_score_table(rng, cardinality, k_dist(rng));
    for (const RuleSet& rs : rule_sets) {
      for (const RuleSet::Rule& rule : rs.rules) {
        if (rule.trivial) {
          if (t == 0) ++out.trivial_skipped;
          continue;
        }
        const auto shape = classify_rule(rule.formula);
        if (!shape) {
          evaluate_formula(rule.formula, st, cfg);
          if (t == 0) ++out.unclassified;
          continue;
        }
        if (t == 0) ++out.rules_checked;
        const double closed = closed_form_degree(*shape, st, cfg);
        out.max_deviation = std::max(out.max_deviation, std::abs(closed - generic_degree(*shape, st, cfg)));
        out.max_literal_deviation =
            std::max(out.max_literal_deviation, std::abs(closed - evaluate_formula(rule.formula, st, cfg)));
      }
    }
  }
  return out;
}

}  // namespace logiccar
