#include "logiccar/trainer.hpp"

#include "logiccar/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace logiccar {

std::string_view arm_name(Arm a) {
  switch (a) {
    case Arm::kNone: return "none";
    case Arm::kEclOnly: return "ecl";
    case Arm::kHplOnly: return "hpl";
    case Arm::kBoth: return "both";
  }
  return "?";
}

Arm parse_arm(std::string_view s) {
  for (Arm a : kAllArms)
    if (arm_name(a) == s) return a;
  throw std::invalid_argument("unknown arm '" + std::string(s) + "' (none, ecl, hpl, both)");
}

void TrainConfig::validate() const {
  fuzzy.validate();
  asym.validate();
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("alpha and beta must be non-negative");
  if (warmup_epochs < 0) throw std::invalid_argument("warmup_epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(tau_score > 0.0)) throw std::invalid_argument("tau_score must be positive");
}

std::string history_to_csv(const TrainHistory& h) {
  std::string out = "epoch,step,l_c,l_ea,l_er,l_ha,l_hr,l_ecl,l_hpl,total\n";
  for (const StepRecord& r : h.steps) {
    const LossBreakdown& b = r.loss;
    out += std::to_string(r.epoch) + "," + std::to_string(r.step);
    for (double v : {b.l_c, b.l_ea, b.l_er, b.l_ha, b.l_hr, b.l_ecl, b.l_hpl, b.total}) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

MomentumSgd::MomentumSgd(double lr, double momentum, double weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

void MomentumSgd::step(ModelParams& p, const Gradients& g) {
  for (auto& [name, theta] : p.tensors()) {
    const Tensor& grad = g.at(name);
    auto [it, fresh] = velocity_.try_emplace(name, grad);
    if (!fresh) it->second = momentum_ * it->second + grad;
    *theta = *theta - lr_ * it->second - (lr_ * weight_decay_) * *theta;
  }
}

namespace {

Var asym_scores(ExprGraph& g, Var logits, const AsymLossParams& p) {
  return sigmoid(g.scale(g.constant(p.tau), standardize(logits)));
}

}  // namespace

BatchLoss build_batch_loss(ExprGraph& g, const ModelParams& p, const Tensor& features, std::span<const Index> gt,
                           const LabelSpace& ls, const Hierarchy& h, const TrainConfig& cfg, int epoch) {
  BatchLoss out;
  out.model = build_forward(g, p, features);
  const auto& z = out.model.logits;
  const std::vector<Index> seen = ls.compositions_in(CompositionSplit::kSeen);

  std::vector<Index> verbs, objects, local;
  for (Index c : gt) {
    const Composition& comp = ls.compositions.at(static_cast<std::size_t>(c));
    verbs.push_back(comp.verb);
    objects.push_back(comp.object);
    local.push_back(static_cast<Index>(std::lower_bound(seen.begin(), seen.end(), c) - seen.begin()));
  }

  LossTerms<Var> parts;
  parts.l_c = ce_loss(z[index_of(Granularity::kComposition)], gt, seen);
  const Var zero = g.constant(0.0);
  const bool ecl = cfg.arm == Arm::kEclOnly || cfg.arm == Arm::kBoth;
  const bool hpl = cfg.arm == Arm::kHplOnly || cfg.arm == Arm::kBoth;
  const bool rules_live = epoch >= cfg.warmup_epochs;
  ScoreRows rows(out.model.scores);
  if (ecl) {
    Tensor pick = Tensor::Zero(static_cast<Index>(seen.size()), ls.num_compositions());
    for (std::size_t i = 0; i < seen.size(); ++i) pick(static_cast<Index>(i), seen[i]) = 1.0;
    const Var seen_logits = matvec(g.constant(std::move(pick)), z[index_of(Granularity::kComposition)]);
    parts.l_ea = asym_loss(asym_scores(g, seen_logits, cfg.asym), local, cfg.asym);
    parts.l_er = rules_live ? rule_loss_ecl(rows, ls, cfg.fuzzy, cfg.scope) : zero;
  } else {
    parts.l_ea = parts.l_er = zero;
  }
  if (hpl) {
    parts.l_ha = asym_loss(asym_scores(g, z[index_of(Granularity::kVerb)], cfg.asym), verbs, cfg.asym) +
                 asym_loss(asym_scores(g, z[index_of(Granularity::kObject)], cfg.asym), objects, cfg.asym);
    parts.l_hr = rules_live ? rule_loss_hpl(rows, h, cfg.fuzzy) : zero;
  } else {
    parts.l_ha = parts.l_hr = zero;
  }
  out.terms = total_loss(parts, cfg.alpha, cfg.beta, epoch, cfg.warmup_epochs);
  return out;
}

namespace {

std::vector<Index> rows_of(const Dataset& data, SampleSplit split) {
  std::vector<Index> out;
  for (Index i = 0; i < data.size(); ++i)
    if (data.split[static_cast<std::size_t>(i)] == split) out.push_back(i);
  return out;
}

void dump_batch(const std::filesystem::path& dir, const Dataset& data, const std::vector<Index>& batch, int epoch,
                Index step) {
  Dataset d;
  d.half_dim = data.half_dim;
  d.features.resize(static_cast<Index>(batch.size()), data.features.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    d.features.row(static_cast<Index>(i)) = data.features.row(batch[i]);
    d.composition.push_back(data.composition[static_cast<std::size_t>(batch[i])]);
    d.split.push_back(data.split[static_cast<std::size_t>(batch[i])]);
  }
  write_dataset(dir / ("nonfinite_epoch" + std::to_string(epoch) + "_step" + std::to_string(step) + ".csv"), d);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& data, const LabelSpace& ls, const Hierarchy& h,
                  std::optional<std::filesystem::path> diagnostics_dir) {
  cfg.validate();
  const std::vector<Index> train_rows = rows_of(data, SampleSplit::kTrain);
  if (train_rows.empty()) throw DataError("no training samples");
  for (Index i : train_rows)
    if (!ls.is_seen(data.composition[static_cast<std::size_t>(i)]))
      throw DataError("training sample " + std::to_string(i) + " belongs to an unseen composition");

  TrainResult result;
  result.params = init_params(ls, h, data.half_dim, cfg.fusion, cfg.seed, cfg.coarse);
  result.params.tau_score = cfg.tau_score;
  MomentumSgd opt(cfg.learning_rate, cfg.momentum, cfg.weight_decay);
  Rng shuffle = named_stream(cfg.seed, "shuffle");
  std::vector<Index> order = train_rows;
  Index step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++step) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      Tensor x(static_cast<Index>(batch.size()), data.features.cols());
      std::vector<Index> gt;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        x.row(static_cast<Index>(i)) = data.features.row(batch[i]);
        gt.push_back(data.composition[static_cast<std::size_t>(batch[i])]);
      }
      ExprGraph g;
      const BatchLoss bl = build_batch_loss(g, result.params, x, gt, ls, h, cfg, epoch);
      Evaluation ev;
      try {
        ev = forward(g, result.params.bindings());
      } catch (const GraphError& e) {
        if (diagnostics_dir) dump_batch(*diagnostics_dir, data, batch, epoch, step);
        std::string ids;
        for (Index i : batch) ids += (ids.empty() ? "" : " ") + std::to_string(i);
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                             " (" + e.what() + "); batch samples: " + ids);
      }
      const LossBreakdown lb = evaluate(ev, bl.terms);
      result.history.steps.push_back({epoch, step, lb});
      opt.step(result.params, backward(g, ev, bl.terms.total));
    }
    if (cfg.validate_each_epoch)
      result.history.validation.push_back(evaluate_split(result.params, data, ls, SampleSplit::kVal));
  }
  return result;
}

ScoreTable score_split(const ModelParams& p, const Dataset& data, SampleSplit split, std::vector<Index>* gt) {
  const std::vector<Index> rows = rows_of(data, split);
  if (rows.empty()) throw DataError(std::string("no samples in split '") + std::string(sample_split_name(split)) + "'");
  Tensor x(static_cast<Index>(rows.size()), data.features.cols());
  if (gt) gt->clear();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Index>(i)) = data.features.row(rows[i]);
    if (gt) gt->push_back(data.composition[static_cast<std::size_t>(rows[i])]);
  }
  return forward(p, x);
}

EvalReport evaluate_split(const ModelParams& p, const Dataset& data, const LabelSpace& ls, SampleSplit split,
                          MetricSource source) {
  if (split == SampleSplit::kTrain) throw std::invalid_argument("evaluate_split: train split has no unseen samples");
  std::vector<Index> gt;
  const ScoreTable st = score_split(p, data, split, &gt);
  return evaluate_report(st, ls, gt, split == SampleSplit::kVal ? CompositionSplit::kUnseenVal : CompositionSplit::kUnseenTest,
                         source);
}

std::vector<std::uint64_t> default_seeds(std::uint64_t base, int n) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(base + static_cast<std::uint64_t>(i));
  return out;
}

namespace {

MetricStats stats(const std::vector<EvalReport>& reports, double EvalReport::*field) {
  MetricStats s;
  const auto n = static_cast<double>(reports.size());
  for (const EvalReport& r : reports) s.mean += r.*field;
  s.mean /= n;
  if (reports.size() > 1) {
    double ss = 0.0;
    for (const EvalReport& r : reports) ss += (r.*field - s.mean) * (r.*field - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

}  // namespace

std::vector<ArmResult> run_ablation(const AblationPlan& plan, const TrainConfig& cfg, const Dataset& data,
                                    const LabelSpace& ls, const Hierarchy& h) {
  if (plan.seeds.size() < 3) throw std::invalid_argument("run_ablation: at least 3 seeds required");
  if (plan.arms.empty()) throw std::invalid_argument("run_ablation: no arms");
  for (std::size_t i = 0; i < data.composition.size(); ++i)
    if (data.composition[i] < 0 || data.composition[i] >= ls.num_compositions())
      throw DataError("run_ablation: dataset does not match the label space");
  std::vector<ArmResult> out;
  for (Arm arm : plan.arms) {
    ArmResult r;
    r.arm = arm;
    for (std::uint64_t seed : plan.seeds) {
      TrainConfig c = cfg;
      c.arm = arm;
      c.seed = seed;
      c.validate_each_epoch = false;
      const TrainResult t = train(c, data, ls, h);
      r.first_step_l_c.push_back(t.history.steps.front().loss.l_c);
      r.reports.push_back(evaluate_split(t.params, data, ls, SampleSplit::kTest));
    }
    r.verb = stats(r.reports, &EvalReport::verb_acc);
    r.object = stats(r.reports, &EvalReport::object_acc);
    r.seen = stats(r.reports, &EvalReport::best_seen);
    r.unseen = stats(r.reports, &EvalReport::best_unseen);
    r.hm = stats(r.reports, &EvalReport::best_hm);
    r.auc = stats(r.reports, &EvalReport::auc);
    out.push_back(std::move(r));
  }
  return out;
}

std::string ablation_to_json(const std::vector<ArmResult>& arms) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const ArmResult& r : arms) {
    nlohmann::ordered_json arm;
    const auto put = [&arm](const char* key, const MetricStats& s) { arm[key] = {{"mean", s.mean}, {"sd", s.sd}}; };
    put("verb", r.verb);
    put("object", r.object);
    put("seen", r.seen);
    put("unseen", r.unseen);
    put("hm", r.hm);
    put("auc", r.auc);
    nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
    for (const EvalReport& e : r.reports)
      per_seed.push_back({{"seen", e.best_seen}, {"unseen", e.best_unseen}, {"hm", e.best_hm}, {"auc", e.auc}});
    arm["per_seed"] = std::move(per_seed);
    doc[std::string(arm_name(r.arm))] = std::move(arm);
  }
  return doc.dump(2) + "\n";
}

}  // namespace logiccar
