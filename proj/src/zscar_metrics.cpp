#include "logiccar/zscar_metrics.hpp"

#include "logiccar/scoring_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

namespace logiccar {

double harmonic_mean(double s, double u) { return s + u == 0.0 ? 0.0 : 2.0 * s * u / (s + u); }

namespace {

Index argmax_column(const Tensor& t, Index k) {
  Index best = 0;
  for (Index r = 1; r < t.rows(); ++r)
    if (t(r, k) > t(best, k)) best = r;
  return best;
}

const Composition& gt_composition(const LabelSpace& ls, Index c) {
  if (c < 0 || c >= ls.num_compositions()) throw std::out_of_range("ground truth composition out of range");
  return ls.compositions[static_cast<std::size_t>(c)];
}

}  // namespace

BranchAccuracy branch_accuracy(const ScoreTable& st, const LabelSpace& ls, std::span<const Index> gt) {
  const Tensor& v = st[Granularity::kVerb];
  const Tensor& o = st[Granularity::kObject];
  if (static_cast<Index>(gt.size()) != v.cols()) throw std::invalid_argument("branch_accuracy: one label per sample");
  if (gt.empty()) return {};
  double hits_v = 0.0, hits_o = 0.0;
  for (Index k = 0; k < v.cols(); ++k) {
    const Composition& c = gt_composition(ls, gt[static_cast<std::size_t>(k)]);
    hits_v += argmax_column(v, k) == c.verb ? 1.0 : 0.0;
    hits_o += argmax_column(o, k) == c.object ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(gt.size());
  return {hits_v / n, hits_o / n};
}

BranchAccuracy part_accuracy(std::span<const Index> predicted, const LabelSpace& ls, std::span<const Index> gt) {
  if (predicted.size() != gt.size()) throw std::invalid_argument("part_accuracy: size mismatch");
  if (gt.empty()) return {};
  double hits_v = 0.0, hits_o = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const Composition& p = gt_composition(ls, predicted[k]);
    const Composition& c = gt_composition(ls, gt[k]);
    hits_v += p.verb == c.verb ? 1.0 : 0.0;
    hits_o += p.object == c.object ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(gt.size());
  return {hits_v / n, hits_o / n};
}

namespace {

void check_sweep_inputs(const Tensor& logits, std::span<const Index> gt, std::span<const Index> candidates,
                        const std::vector<bool>& seen) {
  if (static_cast<Index>(gt.size()) != logits.cols()) throw std::invalid_argument("bias_sweep: one label per sample");
  if (static_cast<Index>(seen.size()) != logits.rows()) throw std::invalid_argument("bias_sweep: seen mask size");
  if (candidates.empty()) throw std::invalid_argument("bias_sweep: empty candidate set");
  for (Index y : gt)
    if (std::find(candidates.begin(), candidates.end(), y) == candidates.end())
      throw std::invalid_argument("bias_sweep: ground truth " + std::to_string(y) + " is not a candidate");
}

}  // namespace

CurvePoint evaluate_bias(const Tensor& logits, std::span<const Index> gt, std::span<const Index> candidates,
                         const std::vector<bool>& seen, double bias) {
  const std::vector<Index> pred = predict_composition(logits, candidates, seen, bias);
  double hit_s = 0.0, n_s = 0.0, hit_u = 0.0, n_u = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const bool correct = pred[k] == gt[k];
    if (seen[static_cast<std::size_t>(gt[k])]) {
      n_s += 1.0;
      hit_s += correct ? 1.0 : 0.0;
    } else {
      n_u += 1.0;
      hit_u += correct ? 1.0 : 0.0;
    }
  }
  CurvePoint p;
  p.bias = bias;
  p.seen_acc = n_s > 0.0 ? hit_s / n_s : 0.0;
  p.unseen_acc = n_u > 0.0 ? hit_u / n_u : 0.0;
  p.hm = harmonic_mean(p.seen_acc, p.unseen_acc);
  return p;
}

Sweep bias_sweep(const Tensor& logits, std::span<const Index> gt, std::span<const Index> candidates,
                 const std::vector<bool>& seen) {
  check_sweep_inputs(logits, gt, candidates, seen);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Sweep out;
  out.no_seen_samples = std::none_of(gt.begin(), gt.end(), [&](Index y) { return seen[static_cast<std::size_t>(y)]; });
  out.no_unseen_samples = std::all_of(gt.begin(), gt.end(), [&](Index y) { return seen[static_cast<std::size_t>(y)]; });

  const bool has_seen = std::any_of(candidates.begin(), candidates.end(), [&](Index c) { return seen[static_cast<std::size_t>(c)]; });
  const bool has_unseen = std::any_of(candidates.begin(), candidates.end(), [&](Index c) { return !seen[static_cast<std::size_t>(c)]; });
  std::vector<double> gaps;
  if (has_seen && has_unseen) {
    for (Index k = 0; k < logits.cols(); ++k) {
      double ms = -kInf, mu = -kInf;
      for (Index c : candidates) {
        double& slot = seen[static_cast<std::size_t>(c)] ? ms : mu;
        slot = std::max(slot, logits(c, k));
      }
      gaps.push_back(mu - ms);
    }
    std::sort(gaps.begin(), gaps.end());
    gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());
  }

  out.curve.push_back(evaluate_bias(logits, gt, candidates, seen, -kInf));
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double next = i + 1 < gaps.size() ? gaps[i + 1] : gaps[i] + 1.0;
    out.curve.push_back(evaluate_bias(logits, gt, candidates, seen, gaps[i] + 0.5 * (next - gaps[i])));
  }
  out.curve.push_back(evaluate_bias(logits, gt, candidates, seen, kInf));
  return out;
}

Summary summarize(std::span<const CurvePoint> curve) {
  if (curve.size() < 2) throw std::invalid_argument("summarize: need at least two curve points");
  Summary s;
  for (const CurvePoint& p : curve) {
    s.best_seen = std::max(s.best_seen, p.seen_acc);
    s.best_unseen = std::max(s.best_unseen, p.unseen_acc);
    s.best_hm = std::max(s.best_hm, p.hm);
  }
  std::map<double, double> upper;  // seen_acc -> max unseen_acc
  const auto add = [&upper](double x, double y) {
    auto [it, inserted] = upper.emplace(x, y);
    if (!inserted) it->second = std::max(it->second, y);
  };
  for (const CurvePoint& p : curve) add(p.seen_acc, p.unseen_acc);
  add(0.0, s.best_unseen);
  add(s.best_seen, 0.0);
  double area = 0.0;
  for (auto it = upper.begin(), next = std::next(it); next != upper.end(); ++it, ++next)
    area += (next->first - it->first) * (it->second + next->second) / 2.0;
  s.auc = area;
  return s;
}

EvalReport evaluate_report(const ScoreTable& st, const LabelSpace& ls, std::span<const Index> gt,
                           CompositionSplit unseen_split, MetricSource source) {
  if (unseen_split == CompositionSplit::kSeen) throw std::invalid_argument("evaluate_report: unseen split expected");
  std::vector<Index> candidates;
  std::vector<bool> seen(static_cast<std::size_t>(ls.num_compositions()));
  for (Index c = 0; c < ls.num_compositions(); ++c) {
    const CompositionSplit sp = ls.compositions[static_cast<std::size_t>(c)].split;
    seen[static_cast<std::size_t>(c)] = sp == CompositionSplit::kSeen;
    if (sp == CompositionSplit::kSeen || sp == unseen_split) candidates.push_back(c);
  }
  const Sweep sweep = bias_sweep(st.composition_logits, gt, candidates, seen);
  const Summary sum = summarize(sweep.curve);
  BranchAccuracy acc;
  if (source == MetricSource::kBranch) {
    acc = branch_accuracy(st, ls, gt);
  } else {
    const auto pred = predict_composition(st.composition_logits, candidates, seen, 0.0);
    acc = part_accuracy(pred, ls, gt);
  }
  EvalReport r;
  r.verb_acc = acc.verb;
  r.object_acc = acc.object;
  r.best_seen = sum.best_seen;
  r.best_unseen = sum.best_unseen;
  r.best_hm = sum.best_hm;
  r.auc = sum.auc;
  r.no_seen_samples = sweep.no_seen_samples;
  r.no_unseen_samples = sweep.no_unseen_samples;
  r.curve = sweep.curve;
  return r;
}

std::string format_bias(double b) {
  if (std::isinf(b)) return b < 0 ? "-inf" : "+inf";
  return format_double(b);
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json doc = {{"verb", r.verb_acc},
                                {"object", r.object_acc},
                                {"seen", r.best_seen},
                                {"unseen", r.best_unseen},
                                {"hm", r.best_hm},
                                {"auc", r.auc},
                                {"no_seen_samples", r.no_seen_samples},
                                {"no_unseen_samples", r.no_unseen_samples},
                                {"curve_points", r.curve.size()}};
  return doc.dump(2) + "\n";
}

std::string curve_to_csv(std::span<const CurvePoint> curve) {
  std::string out = "bias,seen_acc,unseen_acc,hm\n";
  for (const CurvePoint& p : curve)
    out += format_bias(p.bias) + "," + format_double(p.seen_acc) + "," + format_double(p.unseen_acc) + "," +
           format_double(p.hm) + "\n";
  return out;
}

std::string curve_to_svg(std::span<const CurvePoint> curve, const std::string& title) {
  constexpr double kSize = 320.0, kPad = 48.0;
  std::vector<std::pair<double, double>> pts;
  for (const CurvePoint& p : curve) pts.emplace_back(p.seen_acc, p.unseen_acc);
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  });
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof buf, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\">\n",
                kSize + 2 * kPad, kSize + 2 * kPad);
  out += buf;
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"#888\"/>\n",
                kPad, kPad, kSize, kSize);
  out += buf;
  std::string escaped;
  for (char c : title) {
    if (c == '<') escaped += "&lt;";
    else if (c == '>') escaped += "&gt;";
    else if (c == '&') escaped += "&amp;";
    else escaped += c;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"14\">", kPad, kPad - 16);
  out += buf + escaped + "</text>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"12\">seen accuracy</text>\n", kPad + kSize / 2 - 40,
                kPad + kSize + 32);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"14\" y=\"%g\" font-size=\"12\" transform=\"rotate(-90 14 %g)\">unseen accuracy</text>\n",
                kPad + kSize / 2 + 40, kPad + kSize / 2 + 40);
  out += buf;
  out += "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" points=\"";
  for (const auto& [x, y] : pts) {
    std::snprintf(buf, sizeof buf, "%.3f,%.3f ", kPad + x * kSize, kPad + (1.0 - y) * kSize);
    out += buf;
  }
  out += "\"/>\n</svg>\n";
  return out;
}

}  // namespace logiccar
