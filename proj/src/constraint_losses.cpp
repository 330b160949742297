#include "logiccar/constraint_losses.hpp"

#include <algorithm>
#include <string>

namespace logiccar {

void ScoreTable::validate() const {
  const Index K = scores[0].cols();
  if (K < 1) throw std::invalid_argument("score table has no samples");
  for (Granularity g : kAllGranularities) {
    const Tensor& t = scores[index_of(g)];
    if (t.size() == 0) continue;
    if (t.cols() != K) throw std::invalid_argument("score table sample counts disagree");
    if (!((t.array() >= 0.0).all() && (t.array() <= 1.0).all()))
      throw std::invalid_argument(std::string(granularity_name(g)) + " scores outside [0,1]");
  }
  if (composition_logits.size() != 0 && composition_logits.cols() != K)
    throw std::invalid_argument("composition logits sample count disagrees");
}

ScoreNodes ScoreNodes::constant(ExprGraph& g, const ScoreTable& table) {
  ScoreNodes out;
  for (Granularity gr : kAllGranularities) {
    const Tensor& t = table[gr];
    out.scores[index_of(gr)] = g.constant(t.size() == 0 ? Tensor(0, table.samples()) : t);
  }
  out.composition_logits = g.constant(table.composition_logits);
  return out;
}

Var select_row(Var table, Index row) {
  const Shape s = table.shape();
  if (row < 0 || row >= s.rows) throw std::out_of_range("select_row: row out of range");
  Tensor pick = Tensor::Zero(1, s.rows);
  pick(0, row) = 1.0;
  return matvec(table.graph->constant(std::move(pick)), table);
}

Var ScoreRows::operator()(LabelRef ref) {
  auto it = cache_.find(ref);
  if (it != cache_.end()) return it->second;
  const Var table = nodes_[ref.granularity];
  if (ref.index < 0 || ref.index >= table.shape().rows)
    throw std::out_of_range("unresolved label " + std::string(granularity_name(ref.granularity)) + "#" +
                            std::to_string(ref.index));
  return cache_.emplace(ref, select_row(table, ref.index)).first->second;
}

namespace {

// ((1/K) sum_k x_k^q)^(1/q) over a 1 x K node.
Var power_mean(Var x, const FuzzyConfig& cfg) {
  ExprGraph& g = *x.graph;
  return g.root_scalar(mean(g.pow_scalar(x, cfg.q, cfg.epsilon)), cfg.q, cfg.epsilon);
}

Var sum_all(ExprGraph& g, const std::vector<Var>& terms) {
  if (terms.empty()) return g.constant(0.0);
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = acc + terms[i];
  return acc;
}

// (1/n) sum (1 - degree)
Var mean_violation(ExprGraph& g, const std::vector<Var>& degrees) {
  if (degrees.empty()) throw std::invalid_argument("rule loss over an empty category set");
  std::vector<Var> v;
  v.reserve(degrees.size());
  for (Var d : degrees) v.push_back(1.0 - d);
  return (1.0 / static_cast<double>(degrees.size())) * sum_all(g, v);
}

}  // namespace

Var implication_degree(ScoreRows& rows, LabelRef ant, LabelRef cons, const FuzzyConfig& cfg) {
  cfg.validate();
  const Var a = rows(ant);
  const Var b = rows(cons);
  return 1.0 - power_mean(a - a * b, cfg);
}

Var exclusivity_degree(ScoreRows& rows, LabelRef label, std::span<const LabelRef> siblings, const FuzzyConfig& cfg) {
  cfg.validate();
  ExprGraph& g = *rows.nodes()[label.granularity].graph;
  if (std::find(siblings.begin(), siblings.end(), label) != siblings.end())
    throw std::invalid_argument("label appears in its own sibling set");
  if (siblings.empty()) return g.constant(1.0);
  const Var a = rows(label);
  std::vector<Var> terms;
  terms.reserve(siblings.size());
  for (const LabelRef& s : siblings) terms.push_back(power_mean(a * rows(s), cfg));
  return 1.0 - (1.0 / static_cast<double>(siblings.size())) * sum_all(g, terms);
}

Var g_c1(ScoreRows& rows, const LabelSpace& ls, Index composition, const FuzzyConfig& cfg) {
  if (composition < 0 || composition >= ls.num_compositions()) throw std::out_of_range("unknown composition");
  const Composition& c = ls.compositions[static_cast<std::size_t>(composition)];
  const LabelRef cref{Granularity::kComposition, composition};
  return implication_degree(rows, cref, {Granularity::kVerb, c.verb}, cfg) +
         implication_degree(rows, cref, {Granularity::kObject, c.object}, cfg);
}

std::vector<LabelRef> siblings_of(LabelRef label, Index cardinality) {
  std::vector<LabelRef> out;
  for (Index i = 0; i < cardinality; ++i)
    if (i != label.index) out.push_back({label.granularity, i});
  return out;
}

Var rule_loss_ecl(ScoreRows& rows, const LabelSpace& ls, const FuzzyConfig& cfg, CompositionScope scope) {
  const ScoreNodes& nodes = rows.nodes();
  ExprGraph& g = *nodes.scores[0].graph;
  if (nodes[Granularity::kComposition].shape().rows != ls.num_compositions() ||
      nodes[Granularity::kVerb].shape().rows != ls.num_verbs() ||
      nodes[Granularity::kObject].shape().rows != ls.num_objects())
    throw std::invalid_argument("rule_loss_ecl: score table does not match the label space");

  std::vector<Var> comp, verb, object;
  for (Index c = 0; c < ls.num_compositions(); ++c)
    if (scope == CompositionScope::kAll || ls.is_seen(c)) comp.push_back(g_c1(rows, ls, c, cfg));
  for (Index v = 0; v < ls.num_verbs(); ++v) {
    const LabelRef ref{Granularity::kVerb, v};
    verb.push_back(exclusivity_degree(rows, ref, siblings_of(ref, ls.num_verbs()), cfg));
  }
  for (Index o = 0; o < ls.num_objects(); ++o) {
    const LabelRef ref{Granularity::kObject, o};
    object.push_back(exclusivity_degree(rows, ref, siblings_of(ref, ls.num_objects()), cfg));
  }
  return mean_violation(g, comp) + mean_violation(g, verb) + mean_violation(g, object);
}

Var rule_loss_hpl(ScoreRows& rows, const Hierarchy& h, const FuzzyConfig& cfg) {
  const ScoreNodes& nodes = rows.nodes();
  ExprGraph& g = *nodes.scores[0].graph;
  if (nodes[Granularity::kVerb].shape().rows != static_cast<Index>(h.verb_parent.size()) ||
      nodes[Granularity::kObject].shape().rows != static_cast<Index>(h.object_parent.size()) ||
      nodes[Granularity::kCoarseVerb].shape().rows != h.num_coarse_verbs() ||
      nodes[Granularity::kCoarseObject].shape().rows != h.num_coarse_objects())
    throw std::invalid_argument("rule_loss_hpl: hierarchy and score table cardinalities differ");

  std::vector<Var> verb, object, coarse_verb, coarse_object;
  for (std::size_t v = 0; v < h.verb_parent.size(); ++v)
    verb.push_back(implication_degree(rows, {Granularity::kVerb, static_cast<Index>(v)},
                                      {Granularity::kCoarseVerb, h.verb_parent[v]}, cfg));
  for (std::size_t o = 0; o < h.object_parent.size(); ++o)
    object.push_back(implication_degree(rows, {Granularity::kObject, static_cast<Index>(o)},
                                        {Granularity::kCoarseObject, h.object_parent[o]}, cfg));
  for (Index c = 0; c < h.num_coarse_verbs(); ++c) {
    const LabelRef ref{Granularity::kCoarseVerb, c};
    coarse_verb.push_back(exclusivity_degree(rows, ref, siblings_of(ref, h.num_coarse_verbs()), cfg));
  }
  for (Index c = 0; c < h.num_coarse_objects(); ++c) {
    const LabelRef ref{Granularity::kCoarseObject, c};
    coarse_object.push_back(exclusivity_degree(rows, ref, siblings_of(ref, h.num_coarse_objects()), cfg));
  }
  return mean_violation(g, verb) + mean_violation(g, object) + mean_violation(g, coarse_verb) +
         mean_violation(g, coarse_object);
}

Var ce_loss(Var composition_logits, std::span<const Index> labels, std::span<const Index> candidates) {
  const Shape s = composition_logits.shape();
  if (candidates.empty()) throw std::invalid_argument("ce_loss: empty candidate set");
  Tensor pick = Tensor::Zero(static_cast<Index>(candidates.size()), s.rows);
  std::map<Index, Index> position;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] < 0 || candidates[i] >= s.rows) throw std::out_of_range("ce_loss: candidate out of range");
    pick(static_cast<Index>(i), candidates[i]) = 1.0;
    position[candidates[i]] = static_cast<Index>(i);
  }
  std::vector<Index> local;
  local.reserve(labels.size());
  for (Index y : labels) {
    auto it = position.find(y);
    if (it == position.end()) throw std::invalid_argument("ce_loss: label " + std::to_string(y) + " outside candidates");
    local.push_back(it->second);
  }
  ExprGraph& g = *composition_logits.graph;
  return softmax_ce(matvec(g.constant(std::move(pick)), composition_logits), std::move(local));
}

void AsymLossParams::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("asymmetric loss: tau must be positive");
  if (gamma_pos < 0.0 || gamma_neg < 0.0) throw std::invalid_argument("asymmetric loss: negative focusing exponent");
  if (clip_m < 0.0 || clip_m > 0.2) throw std::invalid_argument("asymmetric loss: clip must lie in [0, 0.2]");
}

Var asym_loss(Var scores, std::span<const Index> labels, const AsymLossParams& p) {
  p.validate();
  ExprGraph& g = *scores.graph;
  const Shape s = scores.shape();
  if (static_cast<Index>(labels.size()) != s.cols) throw std::invalid_argument("asym_loss: one label per sample");
  Tensor pos_mask = Tensor::Zero(s.rows, s.cols);
  for (Index k = 0; k < s.cols; ++k) {
    const Index y = labels[static_cast<std::size_t>(k)];
    if (y < 0 || y >= s.rows) throw std::out_of_range("asym_loss: label out of range");
    pos_mask(y, k) = 1.0;
  }
  const auto K = static_cast<double>(s.cols);
  const Var pos_terms = g.pow_scalar(1.0 - scores, p.gamma_pos) * (0.0 - log(scores));
  Var loss = (1.0 / K) * sum(g.constant(pos_mask) * pos_terms);
  if (s.rows > 1) {
    Tensor neg_mask = Tensor::Ones(s.rows, s.cols) - pos_mask;
    const Var shifted = max(scores - p.clip_m, g.constant_like(s, 0.0));
    const Var neg_terms = g.pow_scalar(shifted, p.gamma_neg) * (0.0 - log(1.0 - shifted));
    loss = loss + (1.0 / (K * static_cast<double>(s.rows - 1))) * sum(g.constant(std::move(neg_mask)) * neg_terms);
  }
  return loss;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Build>
double eval_on(const ScoreTable& st, Build&& build) {
  st.validate();
  ExprGraph g;
  const ScoreNodes nodes = ScoreNodes::constant(g, st);
  ScoreRows rows(nodes);
  const Var out = build(rows);
  return forward(g, {}).scalar(out);
}

}  // namespace

TruthDegree implication_degree(const ScoreTable& st, LabelRef ant, LabelRef cons, const FuzzyConfig& cfg) {
  return TruthDegree(eval_on(st, [&](ScoreRows& r) { return implication_degree(r, ant, cons, cfg); }));
}

TruthDegree exclusivity_degree(const ScoreTable& st, LabelRef label, std::span<const LabelRef> siblings,
                               const FuzzyConfig& cfg) {
  return TruthDegree(eval_on(st, [&](ScoreRows& r) { return exclusivity_degree(r, label, siblings, cfg); }));
}

double g_c1(const ScoreTable& st, const LabelSpace& ls, Index composition, const FuzzyConfig& cfg) {
  return eval_on(st, [&](ScoreRows& r) { return g_c1(r, ls, composition, cfg); });
}

double rule_loss_ecl(const ScoreTable& st, const LabelSpace& ls, const FuzzyConfig& cfg, CompositionScope scope) {
  return eval_on(st, [&](ScoreRows& r) { return rule_loss_ecl(r, ls, cfg, scope); });
}

double rule_loss_hpl(const ScoreTable& st, const Hierarchy& h, const FuzzyConfig& cfg) {
  return eval_on(st, [&](ScoreRows& r) { return rule_loss_hpl(r, h, cfg); });
}

double ce_loss(const Tensor& composition_logits, std::span<const Index> labels, std::span<const Index> candidates) {
  ExprGraph g;
  const Var out = ce_loss(g.constant(composition_logits), labels, candidates);
  return forward(g, {}).scalar(out);
}

double asym_loss(const Tensor& scores, std::span<const Index> labels, const AsymLossParams& p) {
  ExprGraph g;
  const Var out = asym_loss(g.constant(scores), labels, p);
  return forward(g, {}).scalar(out);
}

LossBreakdown evaluate(const Evaluation& ev, const LossBreakdownT<Var>& b) {
  return {ev.scalar(b.l_c), ev.scalar(b.l_ea), ev.scalar(b.l_er), ev.scalar(b.l_ha),
          ev.scalar(b.l_hr), ev.scalar(b.l_ecl), ev.scalar(b.l_hpl), ev.scalar(b.total)};
}

}  // namespace logiccar
