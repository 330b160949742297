#include "logiccar/synth_data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace logiccar {

using nlohmann::json;

Index DatasetSpec::num_unseen() const {
  return static_cast<Index>(std::llround(unseen_fraction * static_cast<double>(num_compositions)));
}

void DatasetSpec::validate() const {
  if (coarse_verbs < 1 || verbs_per_coarse < 1 || coarse_objects < 1 || objects_per_coarse < 1)
    throw DataError("dataset spec: category counts must be >= 1");
  if (half_dim < 1) throw DataError("dataset spec: half_dim must be >= 1");
  if (!(spread > 0.0 && spread < 1.0)) throw DataError("dataset spec: spread must lie in (0,1)");
  if (!(noise > 0.0)) throw DataError("dataset spec: noise must be positive");
  if (samples_per_composition < 1 || eval_samples_per_composition < 1)
    throw DataError("dataset spec: sample counts must be >= 1");
  if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0)) throw DataError("dataset spec: unseen_fraction must lie in (0,1)");
  if (!(cooccurrence_bias >= 0.0 && cooccurrence_bias < 1.0))
    throw DataError("dataset spec: cooccurrence_bias must lie in [0,1)");
  const Index pairs = num_verbs() * num_objects();
  if (num_compositions < 1 || num_compositions >= pairs)
    throw DataError("dataset spec: " + std::to_string(num_compositions) +
                    " compositions requested but they must form a strict subset of the " + std::to_string(pairs) +
                    " verb-object pairs");
  if (num_seen() < std::max(num_verbs(), num_objects()))
    throw DataError("dataset spec: too few seen compositions to cover every primitive");
}

std::string dataset_spec_to_json(const DatasetSpec& s) {
  json doc = {{"coarse_verbs", s.coarse_verbs},
              {"verbs_per_coarse", s.verbs_per_coarse},
              {"coarse_objects", s.coarse_objects},
              {"objects_per_coarse", s.objects_per_coarse},
              {"half_dim", s.half_dim},
              {"spread", s.spread},
              {"noise", s.noise},
              {"samples_per_composition", s.samples_per_composition},
              {"eval_samples_per_composition", s.eval_samples_per_composition},
              {"num_compositions", s.num_compositions},
              {"unseen_fraction", s.unseen_fraction},
              {"cooccurrence_bias", s.cooccurrence_bias},
              {"seed", s.seed}};
  return doc.dump(2) + "\n";
}

DatasetSpec dataset_spec_from_json(std::string_view text) {
  DatasetSpec s;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw DataError("dataset spec must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (key == "coarse_verbs") s.coarse_verbs = value.get<Index>();
      else if (key == "verbs_per_coarse") s.verbs_per_coarse = value.get<Index>();
      else if (key == "coarse_objects") s.coarse_objects = value.get<Index>();
      else if (key == "objects_per_coarse") s.objects_per_coarse = value.get<Index>();
      else if (key == "half_dim") s.half_dim = value.get<Index>();
      else if (key == "spread") s.spread = value.get<double>();
      else if (key == "noise") s.noise = value.get<double>();
      else if (key == "samples_per_composition") s.samples_per_composition = value.get<Index>();
      else if (key == "eval_samples_per_composition") s.eval_samples_per_composition = value.get<Index>();
      else if (key == "num_compositions") s.num_compositions = value.get<Index>();
      else if (key == "unseen_fraction") s.unseen_fraction = value.get<double>();
      else if (key == "cooccurrence_bias") s.cooccurrence_bias = value.get<double>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else throw DataError("dataset spec: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset spec: ") + e.what());
  }
  s.validate();
  return s;
}

Index correlated_object_family(const DatasetSpec& spec, Index verb) {
  return (verb / spec.verbs_per_coarse) % spec.coarse_objects;
}

std::pair<Index, Index> draw_composition_pair(Rng& rng, const DatasetSpec& spec) {
  std::uniform_int_distribution<Index> verb_dist(0, spec.num_verbs() - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const Index v = verb_dist(rng);
  // Always consume the coin so rho does not shift the stream.
  const bool biased = coin(rng) < spec.cooccurrence_bias;
  Index o;
  if (biased) {
    std::uniform_int_distribution<Index> member(0, spec.objects_per_coarse - 1);
    o = correlated_object_family(spec, v) * spec.objects_per_coarse + member(rng);
  } else {
    std::uniform_int_distribution<Index> object_dist(0, spec.num_objects() - 1);
    o = object_dist(rng);
  }
  return {v, o};
}

namespace {

using Pair = std::pair<Index, Index>;

void repair_coverage(std::vector<Pair>& seen, const DatasetSpec& spec) {
  const auto counts = [&seen](bool verbs, Index n) {
    std::vector<Index> c(static_cast<std::size_t>(n), 0);
    for (const Pair& p : seen) ++c[static_cast<std::size_t>(verbs ? p.first : p.second)];
    return c;
  };
  const auto swap_in = [&](Pair added) {
    const auto vc = counts(true, spec.num_verbs());
    const auto oc = counts(false, spec.num_objects());
    for (std::size_t i = seen.size(); i-- > 0;) {
      const Pair& p = seen[i];
      if (vc[static_cast<std::size_t>(p.first)] > 1 && oc[static_cast<std::size_t>(p.second)] > 1) {
        seen.erase(seen.begin() + static_cast<std::ptrdiff_t>(i));
        seen.push_back(added);
        return;
      }
    }
    throw DataError("cannot repair primitive coverage: no removable seen composition");
  };
  const auto contains = [&seen](Pair p) { return std::find(seen.begin(), seen.end(), p) != seen.end(); };

  for (Index v = 0; v < spec.num_verbs(); ++v) {
    if (counts(true, spec.num_verbs())[static_cast<std::size_t>(v)] > 0) continue;
    Index o = 0;
    while (contains({v, o})) ++o;
    swap_in({v, o});
  }
  for (Index o = 0; o < spec.num_objects(); ++o) {
    if (counts(false, spec.num_objects())[static_cast<std::size_t>(o)] > 0) continue;
    Index v = 0;
    while (contains({v, o})) ++v;
    swap_in({v, o});
  }
}

}  // namespace

GeneratedLabels build_label_space(const DatasetSpec& spec) {
  spec.validate();
  GeneratedLabels out;
  LabelSpace& ls = out.labels;
  Hierarchy& h = out.hierarchy;
  for (Index a = 0; a < spec.coarse_verbs; ++a) h.coarse_verb_names.push_back("vc" + std::to_string(a));
  for (Index b = 0; b < spec.coarse_objects; ++b) h.coarse_object_names.push_back("oc" + std::to_string(b));
  for (Index v = 0; v < spec.num_verbs(); ++v) {
    const Index parent = v / spec.verbs_per_coarse;
    ls.verbs.push_back(h.coarse_verb_names[static_cast<std::size_t>(parent)] + " v" + std::to_string(v));
    h.verb_parent.push_back(parent);
  }
  for (Index o = 0; o < spec.num_objects(); ++o) {
    const Index parent = o / spec.objects_per_coarse;
    ls.objects.push_back("o" + std::to_string(o) + "_" + h.coarse_object_names[static_cast<std::size_t>(parent)]);
    h.object_parent.push_back(parent);
  }

  Rng rng = named_stream(spec.seed, "compositions");
  std::set<Pair> chosen;
  std::vector<Pair> seen;
  const Index n_seen = spec.num_seen();
  const Index max_draws = 10000 * spec.num_compositions;
  for (Index draws = 0; static_cast<Index>(seen.size()) < n_seen && draws < max_draws; ++draws) {
    const Pair p = draw_composition_pair(rng, spec);
    if (chosen.insert(p).second) seen.push_back(p);
  }
  for (Index v = 0; v < spec.num_verbs() && static_cast<Index>(seen.size()) < n_seen; ++v)
    for (Index o = 0; o < spec.num_objects() && static_cast<Index>(seen.size()) < n_seen; ++o)
      if (chosen.insert({v, o}).second) seen.push_back({v, o});
  repair_coverage(seen, spec);

  std::set<Pair> seen_set(seen.begin(), seen.end());
  std::vector<Pair> remainder;
  for (Index v = 0; v < spec.num_verbs(); ++v)
    for (Index o = 0; o < spec.num_objects(); ++o)
      if (!seen_set.count({v, o})) remainder.push_back({v, o});
  std::shuffle(remainder.begin(), remainder.end(), rng);
  const Index n_unseen = spec.num_unseen();
  const Index n_val = n_unseen / 2;

  std::vector<std::pair<Pair, CompositionSplit>> all;
  for (const Pair& p : seen) all.push_back({p, CompositionSplit::kSeen});
  for (Index i = 0; i < n_unseen; ++i)
    all.push_back({remainder[static_cast<std::size_t>(i)],
                   i < n_val ? CompositionSplit::kUnseenVal : CompositionSplit::kUnseenTest});
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [p, split] : all) ls.compositions.push_back({p.first, p.second, split});

  validate_label_space(ls);
  return out;
}

std::string_view sample_split_name(SampleSplit s) {
  switch (s) {
    case SampleSplit::kTrain: return "train";
    case SampleSplit::kVal: return "val";
    case SampleSplit::kTest: return "test";
  }
  return "?";
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.half_dim == b.half_dim && a.composition == b.composition && a.split == b.split &&
         a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         (a.features.array() == b.features.array()).all();
}

Dataset Dataset::subset(SampleSplit s) const {
  Dataset out;
  out.half_dim = half_dim;
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i)
    if (split[static_cast<std::size_t>(i)] == s) rows.push_back(i);
  out.features.resize(static_cast<Index>(rows.size()), features.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Index>(r)) = features.row(rows[r]);
    out.composition.push_back(composition[static_cast<std::size_t>(rows[r])]);
    out.split.push_back(s);
  }
  return out;
}

namespace {

Tensor gaussian(Rng& rng, Index rows, Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) t(r, c) = n(rng);
  return t;
}

Tensor level(Rng& rng, Index coarse, Index per_coarse, Index d, double spread) {
  const Tensor parents = gaussian(rng, coarse, d);
  Tensor fine(coarse * per_coarse, d);
  for (Index i = 0; i < fine.rows(); ++i) fine.row(i) = parents.row(i / per_coarse) + spread * gaussian(rng, 1, d);
  return fine;
}

}  // namespace

Prototypes make_prototypes(const DatasetSpec& spec) {
  Rng verbs = named_stream(spec.seed, "prototypes/verbs");
  Rng objects = named_stream(spec.seed, "prototypes/objects");
  return {level(verbs, spec.coarse_verbs, spec.verbs_per_coarse, spec.half_dim, spec.spread),
          level(objects, spec.coarse_objects, spec.objects_per_coarse, spec.half_dim, spec.spread)};
}

Dataset sample_dataset(const LabelSpace& ls, const DatasetSpec& spec) {
  spec.validate();
  if (ls.num_verbs() != spec.num_verbs() || ls.num_objects() != spec.num_objects())
    throw DataError("label space does not match the dataset spec");
  const Prototypes protos = make_prototypes(spec);
  const Index d = spec.half_dim;

  struct Block {
    Index comp;
    SampleSplit split;
    Index count;
  };
  std::vector<Block> blocks;
  for (Index c = 0; c < ls.num_compositions(); ++c) {
    switch (ls.compositions[static_cast<std::size_t>(c)].split) {
      case CompositionSplit::kSeen:
        blocks.push_back({c, SampleSplit::kTrain, spec.samples_per_composition});
        blocks.push_back({c, SampleSplit::kVal, spec.eval_samples_per_composition});
        blocks.push_back({c, SampleSplit::kTest, spec.eval_samples_per_composition});
        break;
      case CompositionSplit::kUnseenVal:
        blocks.push_back({c, SampleSplit::kVal, spec.eval_samples_per_composition});
        break;
      case CompositionSplit::kUnseenTest:
        blocks.push_back({c, SampleSplit::kTest, spec.eval_samples_per_composition});
        break;
    }
  }
  Index total = 0;
  for (const Block& b : blocks) total += b.count;

  Dataset out;
  out.half_dim = d;
  out.features.resize(total, 2 * d);
  Index row = 0;
  for (const Block& b : blocks) {
    const Composition& comp = ls.compositions[static_cast<std::size_t>(b.comp)];
    Rng rng = named_stream(spec.seed, "noise/" + std::to_string(b.comp) + "/" + std::string(sample_split_name(b.split)));
    for (Index i = 0; i < b.count; ++i, ++row) {
      out.features.block(row, 0, 1, d) = protos.verbs.row(comp.verb) + spec.noise * gaussian(rng, 1, d);
      out.features.block(row, d, 1, d) = protos.objects.row(comp.object) + spec.noise * gaussian(rng, 1, d);
      out.composition.push_back(b.comp);
      out.split.push_back(b.split);
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::string out = "sample_id,comp_id,split";
  for (Index f = 0; f < data.features.cols(); ++f) out += ",f" + std::to_string(f);
  out += '\n';
  for (Index i = 0; i < data.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(data.composition[static_cast<std::size_t>(i)]) + "," +
           std::string(sample_split_name(data.split[static_cast<std::size_t>(i)]));
    for (Index f = 0; f < data.features.cols(); ++f) out += "," + format_double(data.features(i, f));
    out += '\n';
  }
  write_text_file(path, out);
}

namespace {

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

Dataset read_dataset(const std::filesystem::path& path, const LabelSpace& ls) {
  const std::string text = read_text_file(path);
  std::vector<std::vector<std::string>> rows;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    rows.push_back(split_csv(line));
    start = end + 1;
  }
  const auto fail = [&path](std::size_t line, const std::string& msg) -> DataError {
    return DataError(path.string() + ":" + std::to_string(line) + ": " + msg);
  };
  if (rows.empty()) throw fail(1, "empty file");
  const auto& header = rows[0];
  if (header.size() < 4 || header[0] != "sample_id" || header[1] != "comp_id" || header[2] != "split" ||
      (header.size() - 3) % 2 != 0)
    throw fail(1, "malformed header");
  for (std::size_t f = 3; f < header.size(); ++f)
    if (header[f] != "f" + std::to_string(f - 3)) throw fail(1, "unexpected column '" + header[f] + "'");

  Dataset out;
  const auto width = static_cast<Index>(header.size() - 3);
  out.half_dim = width / 2;
  out.features.resize(static_cast<Index>(rows.size() - 1), width);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    const std::size_t line = r + 1;
    if (fields.size() != header.size())
      throw fail(line, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    try {
      if (std::stoll(fields[0]) != static_cast<long long>(r - 1)) throw fail(line, "sample ids must be consecutive");
      std::size_t used = 0;
      const long long comp = std::stoll(fields[1], &used);
      if (used != fields[1].size() || comp < 0 || comp >= ls.num_compositions())
        throw fail(line, "unknown composition id '" + fields[1] + "'");
      SampleSplit split;
      if (fields[2] == "train") split = SampleSplit::kTrain;
      else if (fields[2] == "val") split = SampleSplit::kVal;
      else if (fields[2] == "test") split = SampleSplit::kTest;
      else throw fail(line, "unknown split '" + fields[2] + "'");
      if (split == SampleSplit::kTrain && !ls.is_seen(comp))
        throw fail(line, "training sample of an unseen composition");
      for (Index f = 0; f < width; ++f) out.features(static_cast<Index>(r - 1), f) = parse_double(fields[3 + static_cast<std::size_t>(f)]);
      out.composition.push_back(comp);
      out.split.push_back(split);
    } catch (const std::invalid_argument& e) {
      throw fail(line, e.what());
    } catch (const std::out_of_range& e) {
      throw fail(line, e.what());
    }
  }
  return out;
}

}  // namespace logiccar
