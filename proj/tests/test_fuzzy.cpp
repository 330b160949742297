#include "logiccar/fuzzy.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace logiccar {
namespace {

using testing::cardinalities;
using testing::small_hierarchy;
using testing::small_label_space;

TruthDegree td(double v) { return TruthDegree(v); }

TEST(FuzzyConnective, WorkedValues) {
  EXPECT_DOUBLE_EQ(fuzzy_connective(Connective::kNot, td(0.0)), 1.0);
  EXPECT_NEAR(fuzzy_connective(Connective::kImplies, td(0.6), td(0.5)), 0.7, 1e-15);
  EXPECT_DOUBLE_EQ(fuzzy_connective(Connective::kAnd, td(0.6), td(0.5)), 0.3);
  EXPECT_DOUBLE_EQ(fuzzy_connective(Connective::kOr, td(0.6), td(0.5)), 0.6);
  for (double b : {0.0, 0.13, 0.5, 0.999, 1.0})
    EXPECT_DOUBLE_EQ(fuzzy_connective(Connective::kImplies, td(1.0), td(b)), b);
}

TEST(FuzzyConnective, MissingOperandThrows) {
  EXPECT_THROW(fuzzy_connective(Connective::kAnd, td(0.5)), std::invalid_argument);
  EXPECT_THROW(fuzzy_connective(Connective::kImplies, td(0.5)), std::invalid_argument);
}

TEST(FuzzyConnective, BoundaryIdentities) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const TruthDegree a = td(u(rng));
    EXPECT_NEAR(fuzzy_connective(Connective::kAnd, a, td(1.0)), a, 1e-12);
    EXPECT_NEAR(fuzzy_connective(Connective::kAnd, a, td(0.0)), 0.0, 1e-12);
    EXPECT_NEAR(fuzzy_connective(Connective::kOr, a, td(0.0)), a, 1e-12);
    EXPECT_NEAR(fuzzy_connective(Connective::kNot, fuzzy_connective(Connective::kNot, a)), a, 1e-12);
    EXPECT_NEAR(fuzzy_connective(Connective::kImplies, a, td(1.0)), 1.0, 1e-12);
  }
}

TEST(TruthDegree, RejectsOutOfRange) {
  EXPECT_THROW(td(1.1), std::out_of_range);
  EXPECT_THROW(td(-0.01), std::out_of_range);
  EXPECT_DOUBLE_EQ(td(1.0 + 1e-13), 1.0);
}

TEST(QuantifierMean, Examples) {
  FuzzyConfig q2{2, 1e-12};
  const std::vector<double> ones{1, 1, 1};
  EXPECT_DOUBLE_EQ(quantifier_mean(Quantifier::kForAll, ones, q2), 1.0);
  const std::vector<double> v{0.9, 0.7};
  EXPECT_NEAR(quantifier_mean(Quantifier::kForAll, v, q2), 1.0 - std::sqrt(0.05), 1e-12);
  EXPECT_NEAR(quantifier_mean(Quantifier::kForAll, v, q2), 0.77639, 1e-5);
  const std::vector<double> w{0.1, 0.4, 0.85, 0.3};
  EXPECT_NEAR(quantifier_mean(Quantifier::kForAll, w, FuzzyConfig{}), (0.1 + 0.4 + 0.85 + 0.3) / 4, 1e-15);
  EXPECT_NEAR(quantifier_mean(Quantifier::kExists, w, FuzzyConfig{}), (0.1 + 0.4 + 0.85 + 0.3) / 4, 1e-15);
}

TEST(QuantifierMean, EmptyInputThrows) {
  EXPECT_THROW(quantifier_mean(Quantifier::kForAll, std::vector<double>{}, FuzzyConfig{}), std::invalid_argument);
}

TEST(QuantifierMean, DualityAndMonotonicity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int q : {1, 2, 3, 5}) {
    const FuzzyConfig cfg{q, 1e-12};
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> v(1 + trial % 7);
      for (double& x : v) x = u(rng);
      std::vector<double> neg(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) neg[i] = 1.0 - v[i];
      EXPECT_NEAR(quantifier_mean(Quantifier::kExists, v, cfg),
                  1.0 - quantifier_mean(Quantifier::kForAll, neg, cfg), 1e-12);

      const std::size_t i = trial % v.size();
      std::vector<double> up = v;
      up[i] = std::min(1.0, up[i] + u(rng) * 0.3);
      EXPECT_GE(quantifier_mean(Quantifier::kForAll, up, cfg) + 1e-15,
                quantifier_mean(Quantifier::kForAll, v, cfg));
      EXPECT_GE(quantifier_mean(Quantifier::kExists, up, cfg) + 1e-15,
                quantifier_mean(Quantifier::kExists, v, cfg));
    }
  }
}

TEST(QuantifierMean, GraphMatchesPlain) {
  ExprGraph g;
  const Var x = g.parameter("x", {1, 5});
  const FuzzyConfig cfg{3, 1e-12};
  const Var all = quantifier_mean(Quantifier::kForAll, x, cfg);
  const Var any = quantifier_mean(Quantifier::kExists, x, cfg);
  Tensor xv(1, 5);
  xv << 0.2, 0.9, 0.55, 1.0, 0.05;
  const Evaluation ev = forward(g, {{"x", xv}});
  const std::vector<double> plain(xv.data(), xv.data() + 5);
  EXPECT_NEAR(ev.scalar(all), quantifier_mean(Quantifier::kForAll, plain, cfg), 1e-14);
  EXPECT_NEAR(ev.scalar(any), quantifier_mean(Quantifier::kExists, plain, cfg), 1e-14);
}

class EvaluateFormula : public ::testing::Test {
 protected:
  LabelSpace ls = small_label_space();
  Hierarchy h = small_hierarchy();
  Rng rng{17};
  ScoreTable st = testing::uniform_table(rng, cardinalities(ls, h), 2);
};

TEST_F(EvaluateFormula, ImplicationExample) {
  st[Granularity::kComposition].row(0) << 0.8, 0.2;
  st[Granularity::kVerb].row(0) << 0.9, 0.5;
  const Formula f = Formula::forall(
      "x", Formula::implies(Formula::pred({Granularity::kComposition, 0}, "c", "x"),
                            Formula::pred({Granularity::kVerb, 0}, "v", "x")));
  const double d = evaluate_formula(f, st, FuzzyConfig{2, 1e-12});
  EXPECT_NEAR(d, 1.0 - std::sqrt((0.08 * 0.08 + 0.1 * 0.1) / 2.0), 1e-12);
  EXPECT_NEAR(d, 0.90945, 1e-5);
}

TEST_F(EvaluateFormula, ExclusionExample) {
  st[Granularity::kVerb].row(0) << 0.9, 0.1;
  st[Granularity::kVerb].row(1) << 0.2, 0.3;
  const Formula f = Formula::forall(
      "x", Formula::implies(Formula::pred({Granularity::kVerb, 0}, "v", "x"),
                            Formula::negation(Formula::pred({Granularity::kVerb, 1}, "v1", "x"))));
  EXPECT_NEAR(evaluate_formula(f, st, FuzzyConfig{}), 0.895, 1e-12);
}

TEST_F(EvaluateFormula, FullyTruePredicate) {
  st[Granularity::kObject].row(2).setOnes();
  const Formula f = Formula::forall("x", Formula::pred({Granularity::kObject, 2}, "coat", "x"));
  EXPECT_DOUBLE_EQ(evaluate_formula(f, st, FuzzyConfig{2, 1e-12}), 1.0);
}

TEST_F(EvaluateFormula, RejectsNonQuantifiedTopLevel) {
  const Formula f = Formula::pred({Granularity::kVerb, 0}, "v", "x");
  EXPECT_THROW(evaluate_formula(f, st, FuzzyConfig{}), std::invalid_argument);
}

TEST_F(EvaluateFormula, RejectsUnresolvedLabel) {
  const Formula f = Formula::forall("x", Formula::pred({Granularity::kVerb, 7}, "v", "x"));
  EXPECT_ANY_THROW(evaluate_formula(f, st, FuzzyConfig{}));
}

TEST_F(EvaluateFormula, GraphGradientFlowsToScores) {
  ExprGraph g;
  ScoreNodes nodes;
  const auto card = cardinalities(ls, h);
  for (std::size_t i = 0; i < 5; ++i)
    nodes.scores[i] = g.parameter("s" + std::to_string(i), {card[i], st.samples()});
  nodes.composition_logits = g.constant(st.composition_logits);
  const Formula f = Formula::forall(
      "x", Formula::implies(Formula::pred({Granularity::kComposition, 1}, "c", "x"),
                            Formula::disj(Formula::pred({Granularity::kVerb, 0}, "v", "x"),
                                          Formula::pred({Granularity::kObject, 1}, "o", "x"))));
  const FuzzyConfig cfg{2, 1e-12};
  const Var out = evaluate_formula(f, nodes, cfg);
  Bindings b;
  for (std::size_t i = 0; i < 5; ++i) b["s" + std::to_string(i)] = st.scores[i];
  const Evaluation ev = forward(g, b);
  EXPECT_NEAR(ev.scalar(out), evaluate_formula(f, st, cfg), 1e-14);
  const Gradients grad = backward(g, ev, out);
  const auto fn = [&](const Bindings& x) { return forward(g, x).scalar(out); };
  EXPECT_LT(finite_diff_check(fn, b, grad), 1e-4);
  EXPECT_NE(grad.at("s0")(1, 0), 0.0);
}

}  // namespace
}  // namespace logiccar
