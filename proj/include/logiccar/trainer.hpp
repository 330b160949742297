#ifndef LOGICCAR_TRAINER_HPP_
#define LOGICCAR_TRAINER_HPP_

// Minibatch training under L = L_c + alpha (L_ECL + beta L_HPL) and the
// four-arm constraint ablation.

#include "logiccar/constraint_losses.hpp"
#include "logiccar/scoring_model.hpp"
#include "logiccar/synth_data.hpp"
#include "logiccar/zscar_metrics.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace logiccar {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Arm : std::uint8_t { kNone, kEclOnly, kHplOnly, kBoth };
inline constexpr std::array<Arm, 4> kAllArms = {Arm::kNone, Arm::kEclOnly, Arm::kHplOnly, Arm::kBoth};
std::string_view arm_name(Arm a);
Arm parse_arm(std::string_view s);

struct TrainConfig {
  double alpha = 0.04;
  double beta = 0.06;
  FuzzyConfig fuzzy;
  AsymLossParams asym;  // asym.tau scales the standardized logits
  int warmup_epochs = 2;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 30;
  Index batch_size = 64;
  std::uint64_t seed = 1;
  FusionMode fusion = FusionMode::kAdditive;
  CoarseMode coarse = CoarseMode::kHeads;
  CompositionScope scope = CompositionScope::kSeenOnly;
  double tau_score = 1.0;
  Arm arm = Arm::kBoth;
  bool validate_each_epoch = true;

  // Throws std::invalid_argument.
  void validate() const;
};

struct StepRecord {
  int epoch = 0;
  Index step = 0;
  LossBreakdown loss;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EvalReport> validation;  // one per epoch when enabled
};

std::string history_to_csv(const TrainHistory& h);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(ModelParams& p, const Gradients& g) = 0;
};

// v <- mu v + g;  theta <- theta - lr v - lr wd theta.
class MomentumSgd final : public Optimizer {
 public:
  MomentumSgd(double lr, double momentum, double weight_decay);
  void step(ModelParams& p, const Gradients& g) override;

 private:
  double lr_, momentum_, weight_decay_;
  Gradients velocity_;
};

// The loss graph of one batch.
struct BatchLoss {
  ModelGraph model;
  LossBreakdownT<Var> terms;
};

BatchLoss build_batch_loss(ExprGraph& g, const ModelParams& p, const Tensor& features, std::span<const Index> gt,
                           const LabelSpace& ls, const Hierarchy& h, const TrainConfig& cfg, int epoch);

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Trains on the train split of `data`. Throws DataError if a training sample
// belongs to an unseen composition and NumericalError on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const LabelSpace& ls, const Hierarchy& h,
                  std::optional<std::filesystem::path> diagnostics_dir = std::nullopt);

ScoreTable score_split(const ModelParams& p, const Dataset& data, SampleSplit split, std::vector<Index>* gt);
EvalReport evaluate_split(const ModelParams& p, const Dataset& data, const LabelSpace& ls, SampleSplit split,
                          MetricSource source = MetricSource::kBranch);

struct MetricStats {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
};

struct ArmResult {
  Arm arm = Arm::kNone;
  std::vector<EvalReport> reports;  // one per seed, on the test split
  std::vector<double> first_step_l_c;
  MetricStats verb, object, seen, unseen, hm, auc;
};

struct AblationPlan {
  std::vector<Arm> arms{kAllArms.begin(), kAllArms.end()};
  std::vector<std::uint64_t> seeds;
};

std::vector<std::uint64_t> default_seeds(std::uint64_t base, int n);

std::vector<ArmResult> run_ablation(const AblationPlan& plan, const TrainConfig& cfg, const Dataset& data,
                                    const LabelSpace& ls, const Hierarchy& h);

std::string ablation_to_json(const std::vector<ArmResult>& arms);

}  // namespace logiccar

#endif  // LOGICCAR_TRAINER_HPP_
