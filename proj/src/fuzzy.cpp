#include "logiccar/fuzzy.hpp"

#include <cmath>
#include <map>
#include <string>

namespace logiccar {

TruthDegree fuzzy_connective(Connective kind, TruthDegree a, std::optional<TruthDegree> b) {
  if (kind != Connective::kNot && !b) throw std::invalid_argument("binary connective needs two operands");
  switch (kind) {
    case Connective::kAnd: return TruthDegree(fuzzy_and(a.value(), b->value()));
    case Connective::kOr: return TruthDegree(fuzzy_or(a.value(), b->value()));
    case Connective::kNot: return TruthDegree(fuzzy_not(a.value()));
    case Connective::kImplies: return TruthDegree(fuzzy_implies(a.value(), b->value()));
  }
  throw std::invalid_argument("unknown connective");
}

namespace {

double power_mean(std::span<const double> xs, int q, double eps) {
  double acc = 0.0;
  for (double x : xs) acc += std::pow(q < 0 ? std::max(x, eps) : x, q);
  const double m = acc / static_cast<double>(xs.size());
  return std::pow(q < 0 ? std::max(m, eps) : std::max(m, 0.0), 1.0 / q);
}

}  // namespace

TruthDegree quantifier_mean(Quantifier kind, std::span<const double> values, const FuzzyConfig& cfg) {
  cfg.validate();
  if (values.empty()) throw std::invalid_argument("quantifier over an empty sample set");
  std::vector<double> clamped(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) clamped[i] = TruthDegree(values[i]).value();
  if (kind == Quantifier::kExists) return TruthDegree(power_mean(clamped, cfg.q, cfg.epsilon));
  std::vector<double> complement(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) complement[i] = 1.0 - clamped[i];
  return TruthDegree(1.0 - power_mean(complement, cfg.q, cfg.epsilon));
}

Var quantifier_mean(Quantifier kind, Var values, const FuzzyConfig& cfg) {
  cfg.validate();
  ExprGraph& g = *values.graph;
  const auto pm = [&](Var x) {
    return g.root_scalar(mean(g.pow_scalar(x, cfg.q, cfg.epsilon)), cfg.q, cfg.epsilon);
  };
  if (kind == Quantifier::kExists) return pm(values);
  return 1.0 - pm(1.0 - values);
}

namespace {

double eval_sample(const Formula& f, const ScoreTable& st, Index k) {
  switch (f.kind()) {
    case Formula::Kind::kPred: {
      const Tensor& t = st[f.ref().granularity];
      if (f.ref().index < 0 || f.ref().index >= t.rows())
        throw std::invalid_argument("unresolved label " + std::string(granularity_name(f.ref().granularity)) + ":" +
                                    f.name());
      return t(f.ref().index, k);
    }
    case Formula::Kind::kNot: return fuzzy_not(eval_sample(f.lhs(), st, k));
    case Formula::Kind::kAnd: return fuzzy_and(eval_sample(f.lhs(), st, k), eval_sample(f.rhs(), st, k));
    case Formula::Kind::kOr: return fuzzy_or(eval_sample(f.lhs(), st, k), eval_sample(f.rhs(), st, k));
    case Formula::Kind::kImplies: return fuzzy_implies(eval_sample(f.lhs(), st, k), eval_sample(f.rhs(), st, k));
    case Formula::Kind::kForAll: throw std::invalid_argument("nested quantifier");
  }
  throw std::invalid_argument("unknown formula kind");
}

Var eval_node(const Formula& f, const ScoreNodes& st, std::map<LabelRef, Var>& rows) {
  switch (f.kind()) {
    case Formula::Kind::kPred: {
      const Var table = st[f.ref().granularity];
      if (f.ref().index < 0 || f.ref().index >= table.shape().rows)
        throw std::invalid_argument("unresolved label " + std::string(granularity_name(f.ref().granularity)) + ":" +
                                    f.name());
      auto it = rows.find(f.ref());
      if (it == rows.end()) it = rows.emplace(f.ref(), select_row(table, f.ref().index)).first;
      return it->second;
    }
    case Formula::Kind::kNot: return fuzzy_not(eval_node(f.lhs(), st, rows));
    case Formula::Kind::kAnd: return fuzzy_and(eval_node(f.lhs(), st, rows), eval_node(f.rhs(), st, rows));
    case Formula::Kind::kOr: return fuzzy_or(eval_node(f.lhs(), st, rows), eval_node(f.rhs(), st, rows));
    case Formula::Kind::kImplies: return fuzzy_implies(eval_node(f.lhs(), st, rows), eval_node(f.rhs(), st, rows));
    case Formula::Kind::kForAll: throw std::invalid_argument("nested quantifier");
  }
  throw std::invalid_argument("unknown formula kind");
}

}  // namespace

TruthDegree evaluate_formula(const Formula& f, const ScoreTable& scores, const FuzzyConfig& cfg) {
  if (f.kind() != Formula::Kind::kForAll) throw std::invalid_argument("top level of a rule must be forall");
  const Index K = scores.samples();
  std::vector<double> per_sample(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) per_sample[static_cast<std::size_t>(k)] = eval_sample(f.lhs(), scores, k);
  return quantifier_mean(Quantifier::kForAll, per_sample, cfg);
}

Var evaluate_formula(const Formula& f, const ScoreNodes& scores, const FuzzyConfig& cfg) {
  if (f.kind() != Formula::Kind::kForAll) throw std::invalid_argument("top level of a rule must be forall");
  std::map<LabelRef, Var> rows;
  return quantifier_mean(Quantifier::kForAll, eval_node(f.lhs(), scores, rows), cfg);
}

}  // namespace logiccar
