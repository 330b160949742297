#ifndef LOGICCAR_ZSCAR_METRICS_HPP_
#define LOGICCAR_ZSCAR_METRICS_HPP_

// Zero-shot compositional evaluation: branch accuracies, the calibration-bias
// sweep over seen compositions, best seen/unseen/HM and the area under the
// seen-unseen curve.

#include "logiccar/label_space.hpp"
#include "logiccar/score_table.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace logiccar {

struct CurvePoint {
  double bias = 0.0;  // may be -inf / +inf
  double seen_acc = 0.0;
  double unseen_acc = 0.0;
  double hm = 0.0;
};

double harmonic_mean(double s, double u);

struct BranchAccuracy {
  double verb = 0.0;
  double object = 0.0;
};

// Top-1 argmax of the verb (object) scores against the parts of each sample's
// ground-truth composition. Ties go to the smallest index.
BranchAccuracy branch_accuracy(const ScoreTable& st, const LabelSpace& ls, std::span<const Index> gt);
// Same, reading the parts of predicted compositions instead.
BranchAccuracy part_accuracy(std::span<const Index> predicted, const LabelSpace& ls, std::span<const Index> gt);

struct Sweep {
  std::vector<CurvePoint> curve;  // ascending bias
  bool no_seen_samples = false;
  bool no_unseen_samples = false;
};

CurvePoint evaluate_bias(const Tensor& logits, std::span<const Index> gt, std::span<const Index> candidates,
                         const std::vector<bool>& seen, double bias);

// One point per prediction regime: -inf, a bias inside every interval between
// consecutive distinct per-sample gaps (and past the largest), +inf.
Sweep bias_sweep(const Tensor& logits, std::span<const Index> gt, std::span<const Index> candidates,
                 const std::vector<bool>& seen);

struct Summary {
  double best_seen = 0.0;
  double best_unseen = 0.0;
  double best_hm = 0.0;
  double auc = 0.0;
};

Summary summarize(std::span<const CurvePoint> curve);

struct EvalReport {
  double verb_acc = 0.0;
  double object_acc = 0.0;
  double best_seen = 0.0;
  double best_unseen = 0.0;
  double best_hm = 0.0;
  double auc = 0.0;
  bool no_seen_samples = false;
  bool no_unseen_samples = false;
  std::vector<CurvePoint> curve;
};

enum class MetricSource { kBranch, kComposition };

// Candidates are all compositions whose split is seen or `unseen_split`.
EvalReport evaluate_report(const ScoreTable& st, const LabelSpace& ls, std::span<const Index> gt,
                           CompositionSplit unseen_split, MetricSource source = MetricSource::kBranch);

std::string report_to_json(const EvalReport& r);
std::string curve_to_csv(std::span<const CurvePoint> curve);
std::string curve_to_svg(std::span<const CurvePoint> curve, const std::string& title);
std::string format_bias(double b);

}  // namespace logiccar

#endif  // LOGICCAR_ZSCAR_METRICS_HPP_
