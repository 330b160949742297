#ifndef LOGICCAR_SCORE_TABLE_HPP_
#define LOGICCAR_SCORE_TABLE_HPP_

#include "logiccar/diff_graph.hpp"
#include "logiccar/label_space.hpp"

#include <array>

namespace logiccar {

// Per-sample confidences in [0,1] at the five granularities plus raw
// composition logits. Every matrix has one row per label and one column per
// sample.
struct ScoreTable {
  std::array<Tensor, 5> scores;
  Tensor composition_logits;

  Index samples() const { return scores[0].cols(); }
  const Tensor& operator[](Granularity g) const { return scores[index_of(g)]; }
  Tensor& operator[](Granularity g) { return scores[index_of(g)]; }

  // Throws std::invalid_argument on entries outside [0,1], K = 0, or
  // inconsistent sample counts.
  void validate() const;
};

// Graph-side counterpart of ScoreTable.
struct ScoreNodes {
  std::array<Var, 5> scores;
  Var composition_logits;

  const Var& operator[](Granularity g) const { return scores[index_of(g)]; }
  Index samples() const { return scores[0].shape().cols; }

  // Embeds a plain table as constants.
  static ScoreNodes constant(ExprGraph& g, const ScoreTable& table);
};

// Row `row` of a label-by-sample table as a 1 x K node.
Var select_row(Var table, Index row);

}  // namespace logiccar

#endif  // LOGICCAR_SCORE_TABLE_HPP_
