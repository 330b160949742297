#ifndef LOGICCAR_CONSTRAINT_LOSSES_HPP_
#define LOGICCAR_CONSTRAINT_LOSSES_HPP_

// Closed-form constraint degrees, the rule losses built from them, the
// classification and asymmetric losses, and the combined objective
//
//   L = L_c + alpha * (L_ECL + beta * L_HPL),
//   L_ECL = L_ea + L_er,  L_HPL = L_ha + L_hr.
//
// Every loss is written once against graph nodes; the overloads taking a
// plain ScoreTable evaluate the same expressions on constants.

#include "logiccar/diff_graph.hpp"
#include "logiccar/fuzzy.hpp"
#include "logiccar/hierarchy.hpp"
#include "logiccar/label_space.hpp"
#include "logiccar/logic_ast.hpp"
#include "logiccar/score_table.hpp"

#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace logiccar {

// Caches per-label row selections of a ScoreNodes table.
class ScoreRows {
 public:
  explicit ScoreRows(const ScoreNodes& nodes) : nodes_(nodes) {}
  Var operator()(LabelRef ref);
  const ScoreNodes& nodes() const { return nodes_; }

 private:
  const ScoreNodes& nodes_;
  std::map<LabelRef, Var> cache_;
};

// 1 - ((1/K) sum_k (s[ant] - s[ant] s[cons])^q)^(1/q)
Var implication_degree(ScoreRows& rows, LabelRef ant, LabelRef cons, const FuzzyConfig& cfg);
// 1 - (1/M) sum_m ((1/K) sum_k (s[label] s[sib_m])^q)^(1/q); 1 for no siblings.
Var exclusivity_degree(ScoreRows& rows, LabelRef label, std::span<const LabelRef> siblings, const FuzzyConfig& cfg);
// implication_degree(c, verb(c)) + implication_degree(c, object(c)), in [0,2].
Var g_c1(ScoreRows& rows, const LabelSpace& ls, Index composition, const FuzzyConfig& cfg);

std::vector<LabelRef> siblings_of(LabelRef label, Index cardinality);

Var rule_loss_ecl(ScoreRows& rows, const LabelSpace& ls, const FuzzyConfig& cfg,
                  CompositionScope scope = CompositionScope::kSeenOnly);
Var rule_loss_hpl(ScoreRows& rows, const Hierarchy& h, const FuzzyConfig& cfg);

// Mean cross-entropy of the softmax over `candidates` rows of the composition
// logits. Ground truths must be candidates.
Var ce_loss(Var composition_logits, std::span<const Index> labels, std::span<const Index> candidates);

struct AsymLossParams {
  double tau = 15.0;
  double gamma_pos = 0.0;
  double gamma_neg = 4.0;
  double clip_m = 0.05;

  void validate() const;
};

// (1/K) sum_k [ (1-s+)^g+ (-log s+) + 1/(N-1) sum_neg s~^g- (-log(1 - s~)) ],
// s~ = max(s - clip_m, 0). `scores` is N x K (already sigmoid(tau * z)).
Var asym_loss(Var scores, std::span<const Index> labels, const AsymLossParams& p);

// --- plain evaluation --------------------------------------------------------

TruthDegree implication_degree(const ScoreTable& st, LabelRef ant, LabelRef cons, const FuzzyConfig& cfg);
TruthDegree exclusivity_degree(const ScoreTable& st, LabelRef label, std::span<const LabelRef> siblings,
                               const FuzzyConfig& cfg);
double g_c1(const ScoreTable& st, const LabelSpace& ls, Index composition, const FuzzyConfig& cfg);
double rule_loss_ecl(const ScoreTable& st, const LabelSpace& ls, const FuzzyConfig& cfg,
                     CompositionScope scope = CompositionScope::kSeenOnly);
double rule_loss_hpl(const ScoreTable& st, const Hierarchy& h, const FuzzyConfig& cfg);
double ce_loss(const Tensor& composition_logits, std::span<const Index> labels, std::span<const Index> candidates);
double asym_loss(const Tensor& scores, std::span<const Index> labels, const AsymLossParams& p);

// --- objective -----------------------------------------------------------------

template <typename T>
struct LossTerms {
  T l_c, l_ea, l_er, l_ha, l_hr;
};

template <typename T>
struct LossBreakdownT {
  T l_c, l_ea, l_er, l_ha, l_hr, l_ecl, l_hpl, total;
};
using LossBreakdown = LossBreakdownT<double>;

inline double zero_like(double) { return 0.0; }
inline Var zero_like(Var v) { return v.graph->constant(0.0); }

// Rule losses are replaced by 0 while epoch < warmup_epochs.
template <typename T>
LossBreakdownT<T> total_loss(const LossTerms<T>& parts, double alpha, double beta, int epoch, int warmup_epochs) {
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("total_loss: negative coefficient");
  if (epoch < 0) throw std::invalid_argument("total_loss: negative epoch");
  LossBreakdownT<T> out{parts.l_c, parts.l_ea, parts.l_er, parts.l_ha, parts.l_hr, parts.l_c, parts.l_c, parts.l_c};
  if (epoch < warmup_epochs) {
    out.l_er = zero_like(parts.l_er);
    out.l_hr = zero_like(parts.l_hr);
  }
  out.l_ecl = out.l_ea + out.l_er;
  out.l_hpl = out.l_ha + out.l_hr;
  out.total = out.l_c + alpha * (out.l_ecl + beta * out.l_hpl);
  return out;
}

LossBreakdown evaluate(const Evaluation& ev, const LossBreakdownT<Var>& b);

}  // namespace logiccar

#endif  // LOGICCAR_CONSTRAINT_LOSSES_HPP_
