#include "logiccar/scoring_model.hpp"

#include "logiccar/rng.hpp"

#include <json.hpp>

#include <cmath>

namespace logiccar {

using nlohmann::json;

std::string_view fusion_name(FusionMode m) { return m == FusionMode::kAdditive ? "additive" : "dedicated"; }

FusionMode parse_fusion(std::string_view s) {
  if (s == "additive") return FusionMode::kAdditive;
  if (s == "dedicated") return FusionMode::kDedicated;
  throw ModelError("unknown fusion mode '" + std::string(s) + "'");
}

std::string_view coarse_mode_name(CoarseMode m) { return m == CoarseMode::kHeads ? "heads" : "max_children"; }

CoarseMode parse_coarse_mode(std::string_view s) {
  if (s == "heads") return CoarseMode::kHeads;
  if (s == "max_children") return CoarseMode::kMaxChildren;
  throw ModelError("unknown coarse mode '" + std::string(s) + "'");
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out = {
      {"verb.weight", &verb.weight},
      {"verb.bias", &verb.bias},
      {"object.weight", &object.weight},
      {"object.bias", &object.bias},
      {"coarse_verb.weight", &coarse_verb.weight},
      {"coarse_verb.bias", &coarse_verb.bias},
      {"coarse_object.weight", &coarse_object.weight},
      {"coarse_object.bias", &coarse_object.bias},
  };
  if (composition) {
    out.emplace_back("composition.weight", &composition->weight);
    out.emplace_back("composition.bias", &composition->bias);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (const auto& [name, t] : std::as_const(*this).tensors()) out.emplace_back(name, const_cast<Tensor*>(t));
  return out;
}

Bindings ModelParams::bindings() const {
  Bindings b;
  for (const auto& [name, t] : tensors()) b.emplace(name, *t);
  return b;
}

namespace {

void check_head(const LinearHead& h, Index out, Index in, const char* what) {
  if (h.weight.rows() != out || h.weight.cols() != in || h.bias.rows() != out || h.bias.cols() != 1)
    throw ModelError(std::string("head '") + what + "' has shape " + std::to_string(h.weight.rows()) + "x" +
                     std::to_string(h.weight.cols()) + ", expected " + std::to_string(out) + "x" + std::to_string(in));
  if (!h.weight.allFinite() || !h.bias.allFinite()) throw ModelError(std::string("head '") + what + "' is not finite");
}

Index count_parents(const std::vector<Index>& parent) {
  Index n = 0;
  for (Index p : parent) n = std::max(n, p + 1);
  return n;
}

}  // namespace

void ModelParams::validate() const {
  if (half_dim <= 0) throw ModelError("half_dim must be positive");
  if (!(tau_score > 0.0) || !std::isfinite(tau_score)) throw ModelError("tau_score must be positive");
  const Index V = verb.weight.rows();
  const Index O = object.weight.rows();
  if (static_cast<Index>(verb_parent.size()) != V || static_cast<Index>(object_parent.size()) != O)
    throw ModelError("parent maps do not match head sizes");
  check_head(verb, V, half_dim, "verb");
  check_head(object, O, half_dim, "object");
  check_head(coarse_verb, count_parents(verb_parent), half_dim, "coarse_verb");
  check_head(coarse_object, count_parents(object_parent), half_dim, "coarse_object");
  for (const auto& [v, o] : composition_parts)
    if (v < 0 || v >= V || o < 0 || o >= O) throw ModelError("composition part out of range");
  if (composition_parts.empty()) throw ModelError("no compositions");
  if ((fusion == FusionMode::kDedicated) != composition.has_value())
    throw ModelError("composition head must exist exactly in dedicated fusion");
  if (composition) check_head(*composition, num_compositions(), 2 * half_dim, "composition");
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.half_dim != b.half_dim || a.fusion != b.fusion || a.coarse != b.coarse || a.tau_score != b.tau_score ||
      a.composition_parts != b.composition_parts || a.verb_parent != b.verb_parent ||
      a.object_parent != b.object_parent || a.composition.has_value() != b.composition.has_value())
    return false;
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const Tensor& x = *ta[i].second;
    const Tensor& y = *tb[i].second;
    if (x.rows() != y.rows() || x.cols() != y.cols() || !(x.array() == y.array()).all()) return false;
  }
  return true;
}

namespace {

LinearHead make_head(Rng& rng, Index out, Index in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  LinearHead h{Tensor(out, in), Tensor::Zero(out, 1)};
  for (Index r = 0; r < out; ++r)
    for (Index c = 0; c < in; ++c) h.weight(r, c) = u(rng);
  return h;
}

}  // namespace

ModelParams init_params(const LabelSpace& ls, const Hierarchy& h, Index half_dim, FusionMode mode,
                        std::uint64_t seed, CoarseMode coarse) {
  if (half_dim <= 0) throw ModelError("init_params: half_dim must be positive");
  if (ls.num_verbs() == 0 || ls.num_objects() == 0 || ls.num_compositions() == 0)
    throw ModelError("init_params: empty label space");
  if (const auto errors = validate_hierarchy(ls, h); !errors.empty())
    throw ModelError("init_params: invalid hierarchy: " + errors.front());
  ModelParams p;
  p.half_dim = half_dim;
  p.fusion = mode;
  p.coarse = coarse;
  p.verb_parent = h.verb_parent;
  p.object_parent = h.object_parent;
  for (const Composition& c : ls.compositions) p.composition_parts.emplace_back(c.verb, c.object);
  Rng rng = named_stream(seed, "init");
  p.verb = make_head(rng, ls.num_verbs(), half_dim);
  p.object = make_head(rng, ls.num_objects(), half_dim);
  p.coarse_verb = make_head(rng, h.num_coarse_verbs(), half_dim);
  p.coarse_object = make_head(rng, h.num_coarse_objects(), half_dim);
  if (mode == FusionMode::kDedicated) p.composition = make_head(rng, ls.num_compositions(), 2 * half_dim);
  return p;
}

namespace {

Var linear(ExprGraph& g, const std::string& name, const LinearHead& h, Var x, Var ones) {
  const Var w = g.parameter(name + ".weight", {h.weight.rows(), h.weight.cols()});
  const Var b = g.parameter(name + ".bias", {h.bias.rows(), 1});
  return matvec(w, x) + matvec(b, ones);
}

// Row c of the result is the max over rows r of `fine` with parent[r] == c.
Var max_children(ExprGraph& g, Var fine, const std::vector<Index>& parent) {
  const Index n = count_parents(parent);
  std::vector<Var> rows(static_cast<std::size_t>(n));
  for (Index r = 0; r < static_cast<Index>(parent.size()); ++r) {
    Var& slot = rows[static_cast<std::size_t>(parent[static_cast<std::size_t>(r)])];
    const Var row = select_row(fine, r);
    slot = slot.valid() ? max(slot, row) : row;
  }
  Var out;
  for (Index c = 0; c < n; ++c) {
    Tensor e = Tensor::Zero(n, 1);
    e(c, 0) = 1.0;
    const Var placed = matvec(g.constant(std::move(e)), rows[static_cast<std::size_t>(c)]);
    out = out.valid() ? out + placed : placed;
  }
  return out;
}

}  // namespace

ModelGraph build_forward(ExprGraph& g, const ModelParams& p, const Tensor& features) {
  p.validate();
  if (features.cols() != 2 * p.half_dim)
    throw ModelError("features have " + std::to_string(features.cols()) + " columns, expected " +
                     std::to_string(2 * p.half_dim));
  if (features.rows() == 0) throw ModelError("empty batch");
  const Index d = p.half_dim;
  const Index K = features.rows();
  const Var x_dyn = g.constant(Tensor(features.leftCols(d).transpose()));
  const Var x_sta = g.constant(Tensor(features.rightCols(d).transpose()));
  const Var ones = g.constant_like({1, K}, 1.0);

  ModelGraph m;
  auto& z = m.logits;
  z[index_of(Granularity::kVerb)] = linear(g, "verb", p.verb, x_dyn, ones);
  z[index_of(Granularity::kObject)] = linear(g, "object", p.object, x_sta, ones);
  const Var cv = linear(g, "coarse_verb", p.coarse_verb, x_dyn, ones);
  const Var co = linear(g, "coarse_object", p.coarse_object, x_sta, ones);

  const Index C = p.num_compositions();
  if (p.fusion == FusionMode::kAdditive) {
    Tensor pick_v = Tensor::Zero(C, p.verb.weight.rows());
    Tensor pick_o = Tensor::Zero(C, p.object.weight.rows());
    for (Index c = 0; c < C; ++c) {
      pick_v(c, p.composition_parts[static_cast<std::size_t>(c)].first) = 1.0;
      pick_o(c, p.composition_parts[static_cast<std::size_t>(c)].second) = 1.0;
    }
    z[index_of(Granularity::kComposition)] = matvec(g.constant(std::move(pick_v)), z[index_of(Granularity::kVerb)]) +
                                             matvec(g.constant(std::move(pick_o)), z[index_of(Granularity::kObject)]);
  } else {
    z[index_of(Granularity::kComposition)] =
        linear(g, "composition", *p.composition, g.constant(Tensor(features.transpose())), ones);
  }

  const Var tau = g.constant(p.tau_score);
  const auto score = [&](Var logits) { return sigmoid(g.scale(tau, standardize(logits))); };
  auto& s = m.scores.scores;
  for (Granularity gr : {Granularity::kComposition, Granularity::kVerb, Granularity::kObject})
    s[index_of(gr)] = score(z[index_of(gr)]);
  if (p.coarse == CoarseMode::kHeads) {
    z[index_of(Granularity::kCoarseVerb)] = cv;
    z[index_of(Granularity::kCoarseObject)] = co;
    s[index_of(Granularity::kCoarseVerb)] = score(cv);
    s[index_of(Granularity::kCoarseObject)] = score(co);
  } else {
    s[index_of(Granularity::kCoarseVerb)] = max_children(g, s[index_of(Granularity::kVerb)], p.verb_parent);
    s[index_of(Granularity::kCoarseObject)] = max_children(g, s[index_of(Granularity::kObject)], p.object_parent);
  }
  m.scores.composition_logits = z[index_of(Granularity::kComposition)];
  return m;
}

ScoreTable forward(const ModelParams& p, const Tensor& features) {
  ExprGraph g;
  const ModelGraph m = build_forward(g, p, features);
  const Evaluation ev = logiccar::forward(g, p.bindings());
  ScoreTable st;
  for (std::size_t i = 0; i < st.scores.size(); ++i) st.scores[i] = ev[m.scores.scores[i]];
  st.composition_logits = ev[m.scores.composition_logits];
  return st;
}

std::vector<Index> predict_composition(const Tensor& composition_logits, std::span<const Index> candidates,
                                       const std::vector<bool>& seen, double bias_seen) {
  if (candidates.empty()) throw std::invalid_argument("predict_composition: empty candidate set");
  if (static_cast<Index>(seen.size()) != composition_logits.rows())
    throw std::invalid_argument("predict_composition: seen mask does not match logits");
  for (Index c : candidates)
    if (c < 0 || c >= composition_logits.rows()) throw std::out_of_range("predict_composition: candidate out of range");
  std::vector<Index> out(static_cast<std::size_t>(composition_logits.cols()));
  // An infinite bias ranks by group first, then by the raw logit.
  const bool infinite = std::isinf(bias_seen);
  for (Index k = 0; k < composition_logits.cols(); ++k) {
    Index best = -1;
    int best_tier = 0;
    double best_value = 0.0;
    for (Index c : candidates) {
      const bool is_seen = seen[static_cast<std::size_t>(c)];
      const int tier = infinite ? (is_seen == (bias_seen > 0.0) ? 1 : 0) : 0;
      const double v = composition_logits(c, k) + (is_seen && !infinite ? bias_seen : 0.0);
      if (best < 0 || tier > best_tier || (tier == best_tier && (v > best_value || (v == best_value && c < best)))) {
        best = c;
        best_tier = tier;
        best_value = v;
      }
    }
    out[static_cast<std::size_t>(k)] = best;
  }
  return out;
}

namespace {

json tensor_to_json(const Tensor& t) {
  json data = json::array();
  for (Index r = 0; r < t.rows(); ++r)
    for (Index c = 0; c < t.cols(); ++c) data.push_back(format_double(t(r, c)));
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"data", std::move(data)}};
}

Tensor tensor_from_json(const json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    throw ModelError("checkpoint tensor has inconsistent size");
  Tensor t(rows, cols);
  for (Index i = 0; i < rows * cols; ++i) t(i / cols, i % cols) = parse_double(data[static_cast<std::size_t>(i)].get<std::string>());
  return t;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ModelParams& p) {
  p.validate();
  json parts = json::array();
  for (const auto& [v, o] : p.composition_parts) parts.push_back({v, o});
  json tensors = json::object();
  for (const auto& [name, t] : p.tensors()) tensors[name] = tensor_to_json(*t);
  const json doc = {{"half_dim", p.half_dim},
                    {"fusion", fusion_name(p.fusion)},
                    {"coarse_mode", coarse_mode_name(p.coarse)},
                    {"tau_score", format_double(p.tau_score)},
                    {"composition_parts", std::move(parts)},
                    {"verb_parent", p.verb_parent},
                    {"object_parent", p.object_parent},
                    {"tensors", std::move(tensors)}};
  write_text_file(path, doc.dump(1) + "\n");
}

ModelParams read_checkpoint(const std::filesystem::path& path) {
  ModelParams p;
  try {
    const json doc = json::parse(read_text_file(path));
    p.half_dim = doc.at("half_dim").get<Index>();
    p.fusion = parse_fusion(doc.at("fusion").get<std::string>());
    p.coarse = parse_coarse_mode(doc.at("coarse_mode").get<std::string>());
    p.tau_score = parse_double(doc.at("tau_score").get<std::string>());
    for (const auto& pair : doc.at("composition_parts"))
      p.composition_parts.emplace_back(pair.at(0).get<Index>(), pair.at(1).get<Index>());
    p.verb_parent = doc.at("verb_parent").get<std::vector<Index>>();
    p.object_parent = doc.at("object_parent").get<std::vector<Index>>();
    if (p.fusion == FusionMode::kDedicated) p.composition = LinearHead{};
    const auto& tensors = doc.at("tensors");
    for (auto& [name, t] : p.tensors()) {
      if (!tensors.contains(name)) throw ModelError("checkpoint is missing tensor '" + name + "'");
      *t = tensor_from_json(tensors.at(name));
    }
  } catch (const json::exception& e) {
    throw ModelError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
  p.validate();
  return p;
}

}  // namespace logiccar
