#include "logiccar/scoring_model.hpp"

#include "logiccar/constraint_losses.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace logiccar {
namespace {

using testing::small_hierarchy;
using testing::small_label_space;
using testing::TempDir;

constexpr double kInf = std::numeric_limits<double>::infinity();

Tensor random_features(Rng& rng, Index k, Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor x(k, 2 * d);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

class Model : public ::testing::Test {
 protected:
  LabelSpace ls = small_label_space();
  Hierarchy h = small_hierarchy();
  Rng rng{8};
};

TEST_F(Model, InitIsDeterministic) {
  EXPECT_EQ(init_params(ls, h, 16, FusionMode::kAdditive, 5), init_params(ls, h, 16, FusionMode::kAdditive, 5));
  EXPECT_FALSE(init_params(ls, h, 16, FusionMode::kAdditive, 5) == init_params(ls, h, 16, FusionMode::kAdditive, 6));
}

TEST_F(Model, ZeroDimensionRejected) {
  EXPECT_THROW(init_params(ls, h, 0, FusionMode::kAdditive, 1), ModelError);
}

TEST_F(Model, InitBound) {
  const ModelParams p = init_params(ls, h, 16, FusionMode::kDedicated, 3);
  for (const auto& [name, t] : p.tensors()) {
    if (name.ends_with(".bias")) {
      EXPECT_TRUE(t->isZero()) << name;
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(t->cols()));
    EXPECT_LE(t->cwiseAbs().maxCoeff(), bound) << name;
    if (name != "composition.weight") {
      EXPECT_LE(t->cwiseAbs().maxCoeff(), 0.25) << name;
    }
  }
}

TEST_F(Model, ZeroWeightsGiveHalfScores) {
  ModelParams p = init_params(ls, h, 4, FusionMode::kAdditive, 1);
  for (auto& [name, t] : p.tensors()) t->setZero();
  const ScoreTable st = forward(p, random_features(rng, 6, 4));
  for (const auto& s : st.scores) EXPECT_TRUE((s.array() == 0.5).all());
  const std::vector<Index> seen = ls.compositions_in(CompositionSplit::kSeen);
  const std::vector<Index> y(6, seen[2]);
  EXPECT_NEAR(ce_loss(st.composition_logits, y, seen), std::log(5.0), 1e-15);
}

TEST_F(Model, AdditiveIdentity) {
  const ModelParams p = init_params(ls, h, 5, FusionMode::kAdditive, 2);
  const Tensor x = random_features(rng, 7, 5);
  ExprGraph g;
  const ModelGraph m = build_forward(g, p, x);
  const Evaluation ev = forward(g, p.bindings());
  const Tensor& zc = ev[m.logits[index_of(Granularity::kComposition)]];
  const Tensor& zv = ev[m.logits[index_of(Granularity::kVerb)]];
  const Tensor& zo = ev[m.logits[index_of(Granularity::kObject)]];
  for (Index c = 0; c < ls.num_compositions(); ++c) {
    const Composition& comp = ls.compositions[c];
    for (Index k = 0; k < x.rows(); ++k) EXPECT_EQ(zc(c, k), zv(comp.verb, k) + zo(comp.object, k));
  }
}

TEST_F(Model, DedicatedDiffersOnlyInCompositionRows) {
  const ModelParams add = init_params(ls, h, 6, FusionMode::kAdditive, 4);
  ModelParams ded = init_params(ls, h, 6, FusionMode::kDedicated, 4);
  ded.verb = add.verb;
  ded.object = add.object;
  ded.coarse_verb = add.coarse_verb;
  ded.coarse_object = add.coarse_object;
  const Tensor x = random_features(rng, 5, 6);
  const ScoreTable a = forward(add, x);
  const ScoreTable b = forward(ded, x);
  for (Granularity g : kAllGranularities) {
    if (g == Granularity::kComposition) {
      EXPECT_FALSE(a[g].isApprox(b[g]));
    } else {
      EXPECT_EQ(a[g], b[g]);
    }
  }
}

TEST_F(Model, ScoresInUnitInterval) {
  for (CoarseMode cm : {CoarseMode::kHeads, CoarseMode::kMaxChildren}) {
    ModelParams p = init_params(ls, h, 3, FusionMode::kAdditive, 9, cm);
    for (auto& [name, t] : p.tensors()) *t *= 40.0;
    const ScoreTable st = forward(p, random_features(rng, 10, 3));
    EXPECT_NO_THROW(st.validate());
    EXPECT_TRUE(st.composition_logits.allFinite());
  }
}

TEST_F(Model, MaxChildrenCoarseScores) {
  const ModelParams p = init_params(ls, h, 3, FusionMode::kAdditive, 9, CoarseMode::kMaxChildren);
  const ScoreTable st = forward(p, random_features(rng, 4, 3));
  for (Index k = 0; k < 4; ++k) {
    EXPECT_EQ(st[Granularity::kCoarseVerb](0, k),
              std::max(st[Granularity::kVerb](0, k), st[Granularity::kVerb](1, k)));
    EXPECT_EQ(st[Granularity::kCoarseVerb](1, k), st[Granularity::kVerb](2, k));
    EXPECT_EQ(st[Granularity::kCoarseObject](1, k),
              std::max(st[Granularity::kObject](2, k), st[Granularity::kObject](3, k)));
  }
}

TEST_F(Model, FeatureShapeMismatch) {
  const ModelParams p = init_params(ls, h, 3, FusionMode::kAdditive, 1);
  EXPECT_THROW(forward(p, Tensor::Zero(2, 5)), ModelError);
}

// Two-way standardization is flat away from ties, so the check uses three
// coarse categories per level.
TEST_F(Model, GradientsMatchFiniteDifferences) {
  Hierarchy h3;
  h3.verb_parent = {0, 1, 2};
  h3.object_parent = {0, 1, 2, 2};
  h3.coarse_verb_names = {"a", "b", "c"};
  h3.coarse_object_names = {"p", "q", "r"};
  for (FusionMode mode : {FusionMode::kAdditive, FusionMode::kDedicated}) {
    const ModelParams p = init_params(ls, h3, 3, mode, 13);
    const Tensor x = random_features(rng, 8, 3);
    ExprGraph g;
    const ModelGraph m = build_forward(g, p, x);
    const std::vector<Index> seen = ls.compositions_in(CompositionSplit::kSeen);
    const std::vector<Index> y{0, 1, 2, 3, 4, 0, 1, 2};
    ScoreRows rows(m.scores);
    const Var loss = ce_loss(m.scores.composition_logits, y, seen) +
                     rule_loss_ecl(rows, ls, FuzzyConfig{2, 1e-12}) + rule_loss_hpl(rows, h3, FuzzyConfig{});
    const Bindings b = p.bindings();
    const Gradients grad = backward(g, forward(g, b), loss);
    const auto f = [&](const Bindings& at) { return forward(g, at).scalar(loss); };
    EXPECT_LT(finite_diff_check(f, b, grad), 1e-4);
  }
}

TEST(PredictComposition, Limits) {
  Tensor z(3, 2);
  z << 2.0, 0.1, 1.0, 0.3, 0.5, 0.2;
  const std::vector<Index> cand{0, 1, 2};
  const std::vector<bool> seen{true, false, true};
  EXPECT_EQ(predict_composition(z, cand, seen, -kInf), (std::vector<Index>{1, 1}));
  EXPECT_EQ(predict_composition(z, cand, seen, kInf), (std::vector<Index>{0, 2}));
  const std::vector<bool> none{false, false, false};
  EXPECT_EQ(predict_composition(z, cand, none, kInf), (std::vector<Index>{0, 1}));
  EXPECT_EQ(predict_composition(z, std::vector<Index>{2}, seen, 0.0), (std::vector<Index>{2, 2}));
  EXPECT_THROW(predict_composition(z, std::vector<Index>{}, seen, 0.0), std::invalid_argument);
}

TEST(PredictComposition, TiesGoToSmallestIndex) {
  const Tensor z = Tensor::Constant(3, 1, 0.7);
  const std::vector<bool> seen{false, true, false};
  EXPECT_EQ(predict_composition(z, std::vector<Index>{2, 1, 0}, seen, 0.0), std::vector<Index>{0});
  EXPECT_EQ(predict_composition(z, std::vector<Index>{2, 1}, seen, 0.0), std::vector<Index>{1});
}

TEST(PredictComposition, WorkedFlip) {
  Tensor z(2, 1);
  z << 0.6, 0.7;
  const std::vector<Index> cand{0, 1};
  const std::vector<bool> seen{true, false};
  EXPECT_EQ(predict_composition(z, cand, seen, 0.09), std::vector<Index>{1});
  EXPECT_EQ(predict_composition(z, cand, seen, 0.11), std::vector<Index>{0});
}

TEST(PredictComposition, ShiftInvariance) {
  Rng rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor z(6, 30);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = n(rng);
  const std::vector<Index> cand{0, 2, 3, 5};
  const std::vector<bool> seen{true, false, true, false, true, true};
  for (double bias : {-1.0, 0.0, 0.4}) {
    const Tensor shifted = (z.array() + 3.25).matrix();
    EXPECT_EQ(predict_composition(z, cand, seen, bias), predict_composition(shifted, cand, seen, bias));
  }
}

TEST_F(Model, CheckpointRoundTrip) {
  for (FusionMode mode : {FusionMode::kAdditive, FusionMode::kDedicated}) {
    ModelParams p = init_params(ls, h, 4, mode, 77, CoarseMode::kMaxChildren);
    p.tau_score = 1.7;
    TempDir dir("ckpt");
    write_checkpoint(dir / "c.json", p);
    EXPECT_EQ(read_checkpoint(dir / "c.json"), p);
  }
}

TEST_F(Model, CorruptCheckpoint) {
  TempDir dir("ckpt_bad");
  write_text_file(dir / "c.json", "{\"half_dim\": 2}");
  EXPECT_THROW(read_checkpoint(dir / "c.json"), ModelError);
}

}  // namespace
}  // namespace logiccar
