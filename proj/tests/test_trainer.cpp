#include "logiccar/trainer.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace logiccar {
namespace {

using testing::TempDir;

struct Bench {
  GeneratedLabels labels;
  Dataset data;
};

Bench small_bench(std::uint64_t seed = 7) {
  DatasetSpec spec;
  spec.half_dim = 4;
  spec.samples_per_composition = 6;
  spec.eval_samples_per_composition = 3;
  spec.seed = seed;
  Bench b{build_label_space(spec), {}};
  b.data = sample_dataset(b.labels.labels, spec);
  return b;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 32;
  cfg.validate_each_epoch = false;
  return cfg;
}

class Trainer : public ::testing::Test {
 protected:
  Bench b = small_bench();
  const LabelSpace& ls() const { return b.labels.labels; }
  const Hierarchy& h() const { return b.labels.hierarchy; }
};

TEST_F(Trainer, ZeroAlphaMatchesPlainCe) {
  TrainConfig with = quick_config();
  with.alpha = 0.0;
  TrainConfig none = quick_config();
  none.arm = Arm::kNone;
  const TrainResult a = train(with, b.data, ls(), h());
  const TrainResult c = train(none, b.data, ls(), h());
  ASSERT_EQ(a.history.steps.size(), c.history.steps.size());
  for (std::size_t i = 0; i < a.history.steps.size(); ++i) {
    EXPECT_NEAR(a.history.steps[i].loss.total, c.history.steps[i].loss.total, 1e-12) << i;
    EXPECT_NEAR(a.history.steps[i].loss.l_c, c.history.steps[i].loss.l_c, 1e-12) << i;
  }
  const auto pa = a.params.tensors();
  const auto pc = c.params.tensors();
  ASSERT_EQ(pa.size(), pc.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_LT((*pa[i].second - *pc[i].second).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(Trainer, WarmupSilencesRuleLosses) {
  const TrainResult r = train(quick_config(), b.data, ls(), h());
  bool live_er = false;
  bool live_hr = false;
  for (const StepRecord& s : r.history.steps) {
    if (s.epoch < 2) {
      EXPECT_EQ(s.loss.l_er, 0.0);
      EXPECT_EQ(s.loss.l_hr, 0.0);
    } else {
      live_er = live_er || s.loss.l_er != 0.0;
      live_hr = live_hr || s.loss.l_hr != 0.0;
    }
  }
  EXPECT_TRUE(live_er);
  EXPECT_TRUE(live_hr);
}

TEST_F(Trainer, HistoryIdentities) {
  const TrainResult r = train(quick_config(), b.data, ls(), h());
  const TrainConfig cfg = quick_config();
  for (const StepRecord& s : r.history.steps) {
    const LossBreakdown& l = s.loss;
    EXPECT_NEAR(l.l_ecl, l.l_ea + l.l_er, 1e-12);
    EXPECT_NEAR(l.l_hpl, l.l_ha + l.l_hr, 1e-12);
    EXPECT_NEAR(l.total, l.l_c + cfg.alpha * (l.l_ecl + cfg.beta * l.l_hpl), 1e-12);
  }
}

TEST_F(Trainer, SameSeedIsBitwiseIdentical) {
  TrainConfig cfg = quick_config();
  cfg.validate_each_epoch = true;
  const TrainResult a = train(cfg, b.data, ls(), h());
  const TrainResult c = train(cfg, b.data, ls(), h());
  EXPECT_EQ(history_to_csv(a.history), history_to_csv(c.history));
  EXPECT_EQ(a.params, c.params);
  EXPECT_EQ(a.history.validation.size(), 4u);
  cfg.seed = 2;
  EXPECT_NE(history_to_csv(train(cfg, b.data, ls(), h()).history), history_to_csv(a.history));
}

TEST_F(Trainer, ArmsGateTheirTerms) {
  TrainConfig cfg = quick_config();
  cfg.arm = Arm::kEclOnly;
  for (const StepRecord& s : train(cfg, b.data, ls(), h()).history.steps) EXPECT_EQ(s.loss.l_hpl, 0.0);
  cfg.arm = Arm::kHplOnly;
  for (const StepRecord& s : train(cfg, b.data, ls(), h()).history.steps) {
    EXPECT_EQ(s.loss.l_ecl, 0.0);
    EXPECT_NE(s.loss.l_hpl, 0.0);
  }
}

// A single plain gradient step on a frozen batch lowers the loss by eta |g|^2.
TEST_F(Trainer, GradientStepDecrease) {
  TrainConfig cfg = quick_config();
  const ModelParams p0 = init_params(ls(), h(), b.data.half_dim, cfg.fusion, 3, cfg.coarse);
  const Dataset tr = b.data.subset(SampleSplit::kTrain);
  const Tensor x = tr.features.topRows(24);
  const std::vector<Index> gt(tr.composition.begin(), tr.composition.begin() + 24);
  const auto loss_at = [&](const ModelParams& p, Gradients* grad) {
    ExprGraph g;
    const BatchLoss bl = build_batch_loss(g, p, x, gt, ls(), h(), cfg, 5);
    const Evaluation ev = forward(g, p.bindings());
    if (grad) *grad = backward(g, ev, bl.terms.total);
    return ev.scalar(bl.terms.total);
  };
  Gradients grad;
  const double before = loss_at(p0, &grad);
  double norm2 = 0.0;
  for (const auto& [name, t] : grad) norm2 += t.squaredNorm();
  ASSERT_GT(norm2, 0.0);
  const double eta = 1e-6;
  ModelParams p1 = p0;
  MomentumSgd(eta, 0.0, 0.0).step(p1, grad);
  const double drop = before - loss_at(p1, nullptr);
  EXPECT_NEAR(drop / (eta * norm2), 1.0, 0.05);
}

TEST_F(Trainer, UnseenTrainingSampleRejected) {
  Dataset bad = b.data;
  const Index unseen = ls().compositions_in(CompositionSplit::kUnseenTest).front();
  for (std::size_t i = 0; i < bad.split.size(); ++i)
    if (bad.split[i] == SampleSplit::kTrain) {
      bad.composition[i] = unseen;
      break;
    }
  EXPECT_THROW(train(quick_config(), bad, ls(), h()), DataError);
  EXPECT_THROW(train(quick_config(), b.data.subset(SampleSplit::kTest), ls(), h()), DataError);
}

TEST_F(Trainer, NonFiniteLossDumpsBatch) {
  Dataset bad = b.data;
  bad.features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TempDir dir("diag");
  EXPECT_THROW(train(quick_config(), bad, ls(), h(), dir.path()), NumericalError);
  bool dumped = false;
  for (const auto& e : std::filesystem::directory_iterator(dir.path()))
    dumped = dumped || e.path().filename().string().starts_with("nonfinite_epoch0_");
  EXPECT_TRUE(dumped);
}

TEST_F(Trainer, InvalidConfig) {
  TrainConfig cfg = quick_config();
  cfg.alpha = -1.0;
  EXPECT_THROW(train(cfg, b.data, ls(), h()), std::invalid_argument);
  cfg = quick_config();
  cfg.batch_size = 0;
  EXPECT_THROW(train(cfg, b.data, ls(), h()), std::invalid_argument);
}

TEST_F(Trainer, EvaluateSplitGuards) {
  const TrainResult r = train(quick_config(), b.data, ls(), h());
  EXPECT_THROW(evaluate_split(r.params, b.data, ls(), SampleSplit::kTrain), std::invalid_argument);
  const EvalReport rep = evaluate_split(r.params, b.data, ls(), SampleSplit::kTest);
  EXPECT_GE(rep.auc, 0.0);
  EXPECT_LE(rep.auc, rep.best_seen * rep.best_unseen + 1e-12);
}

TEST_F(Trainer, AblationSharesInitialLoss) {
  AblationPlan plan;
  plan.seeds = default_seeds(11, 3);
  TrainConfig cfg = quick_config();
  cfg.epochs = 2;
  const std::vector<ArmResult> arms = run_ablation(plan, cfg, b.data, ls(), h());
  ASSERT_EQ(arms.size(), 4u);
  for (const ArmResult& a : arms) {
    ASSERT_EQ(a.first_step_l_c.size(), 3u);
    EXPECT_EQ(a.reports.size(), 3u);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(a.first_step_l_c[s], arms[0].first_step_l_c[s], 1e-12);
  }
  const std::string json = ablation_to_json(arms);
  for (const char* name : {"none", "both"}) EXPECT_NE(json.find(name), std::string::npos) << name;
  plan.seeds.pop_back();
  EXPECT_THROW(run_ablation(plan, cfg, b.data, ls(), h()), std::invalid_argument);
}

TEST(Arms, NamesRoundTrip) {
  for (Arm a : kAllArms) EXPECT_EQ(parse_arm(arm_name(a)), a);
  EXPECT_THROW(parse_arm("neither"), std::invalid_argument);
}

TEST(History, CsvHeader) {
  TrainHistory h;
  h.steps.push_back({0, 0, LossBreakdown{1, 2, 3, 4, 5, 6, 7, 8}});
  const std::string csv = history_to_csv(h);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,step,l_c,l_ea,l_er,l_ha,l_hr,l_ecl,l_hpl,total");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Seeds, DistinctAndStable) {
  const auto s = default_seeds(1, 5);
  EXPECT_EQ(s, default_seeds(1, 5));
  EXPECT_EQ(std::set<std::uint64_t>(s.begin(), s.end()).size(), 5u);
}

}  // namespace
}  // namespace logiccar
