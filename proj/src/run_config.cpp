#include "logiccar/run_config.hpp"

#include <json.hpp>

namespace logiccar {

using nlohmann::ordered_json;

namespace {

std::string_view scope_name(CompositionScope s) { return s == CompositionScope::kSeenOnly ? "seen" : "all"; }

CompositionScope parse_scope(std::string_view s) {
  if (s == "seen") return CompositionScope::kSeenOnly;
  if (s == "all") return CompositionScope::kAll;
  throw ConfigError("unknown composition_scope '" + std::string(s) + "' (seen, all)");
}

ordered_json to_json(const RunConfig& c) {
  const DatasetSpec& d = c.data;
  const TrainConfig& t = c.train;
  return {{"data",
           {{"coarse_verbs", d.coarse_verbs},
            {"verbs_per_coarse", d.verbs_per_coarse},
            {"coarse_objects", d.coarse_objects},
            {"objects_per_coarse", d.objects_per_coarse},
            {"half_dim", d.half_dim},
            {"spread", d.spread},
            {"noise", d.noise},
            {"samples_per_composition", d.samples_per_composition},
            {"eval_samples_per_composition", d.eval_samples_per_composition},
            {"num_compositions", d.num_compositions},
            {"unseen_fraction", d.unseen_fraction},
            {"cooccurrence_bias", d.cooccurrence_bias},
            {"seed", d.seed}}},
          {"train",
           {{"alpha", t.alpha},
            {"beta", t.beta},
            {"q", t.fuzzy.q},
            {"epsilon", t.fuzzy.epsilon},
            {"tau", t.asym.tau},
            {"gamma_pos", t.asym.gamma_pos},
            {"gamma_neg", t.asym.gamma_neg},
            {"clip_m", t.asym.clip_m},
            {"warmup_epochs", t.warmup_epochs},
            {"learning_rate", t.learning_rate},
            {"momentum", t.momentum},
            {"weight_decay", t.weight_decay},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"seed", t.seed},
            {"fusion", fusion_name(t.fusion)},
            {"coarse_mode", coarse_mode_name(t.coarse)},
            {"composition_scope", scope_name(t.scope)},
            {"tau_score", t.tau_score},
            {"arm", arm_name(t.arm)}}},
          {"paths", {{"data_dir", c.data_dir}, {"hierarchy", c.hierarchy}}}};
}

void merge_strict(ordered_json& base, const ordered_json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config" + (prefix.empty() ? "" : " key '" + prefix + "'") + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    ordered_json& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, path);
    } else {
      if (value.is_object() || value.is_array()) throw ConfigError("config key '" + path + "' must be a scalar");
      slot = value;
    }
  }
}

void apply_override(ordered_json& doc, const Override& o) {
  ordered_json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = o.first.find('.', start);
    const std::string part = o.first.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + o.first + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("config key '" + o.first + "' is a section, not a value");
  if (node->is_string()) {
    *node = o.second;
    return;
  }
  try {
    *node = ordered_json::parse(o.second);
  } catch (const ordered_json::exception&) {
    throw ConfigError("cannot parse value '" + o.second + "' for '" + o.first + "'");
  }
}

RunConfig from_json(const ordered_json& j) {
  RunConfig c;
  const auto& d = j.at("data");
  DatasetSpec& s = c.data;
  s.coarse_verbs = d.at("coarse_verbs").get<Index>();
  s.verbs_per_coarse = d.at("verbs_per_coarse").get<Index>();
  s.coarse_objects = d.at("coarse_objects").get<Index>();
  s.objects_per_coarse = d.at("objects_per_coarse").get<Index>();
  s.half_dim = d.at("half_dim").get<Index>();
  s.spread = d.at("spread").get<double>();
  s.noise = d.at("noise").get<double>();
  s.samples_per_composition = d.at("samples_per_composition").get<Index>();
  s.eval_samples_per_composition = d.at("eval_samples_per_composition").get<Index>();
  s.num_compositions = d.at("num_compositions").get<Index>();
  s.unseen_fraction = d.at("unseen_fraction").get<double>();
  s.cooccurrence_bias = d.at("cooccurrence_bias").get<double>();
  s.seed = d.at("seed").get<std::uint64_t>();

  const auto& t = j.at("train");
  TrainConfig& r = c.train;
  r.alpha = t.at("alpha").get<double>();
  r.beta = t.at("beta").get<double>();
  r.fuzzy.q = t.at("q").get<int>();
  r.fuzzy.epsilon = t.at("epsilon").get<double>();
  r.asym.tau = t.at("tau").get<double>();
  r.asym.gamma_pos = t.at("gamma_pos").get<double>();
  r.asym.gamma_neg = t.at("gamma_neg").get<double>();
  r.asym.clip_m = t.at("clip_m").get<double>();
  r.warmup_epochs = t.at("warmup_epochs").get<int>();
  r.learning_rate = t.at("learning_rate").get<double>();
  r.momentum = t.at("momentum").get<double>();
  r.weight_decay = t.at("weight_decay").get<double>();
  r.epochs = t.at("epochs").get<int>();
  r.batch_size = t.at("batch_size").get<Index>();
  r.seed = t.at("seed").get<std::uint64_t>();
  r.fusion = parse_fusion(t.at("fusion").get<std::string>());
  r.coarse = parse_coarse_mode(t.at("coarse_mode").get<std::string>());
  r.scope = parse_scope(t.at("composition_scope").get<std::string>());
  r.tau_score = t.at("tau_score").get<double>();
  r.arm = parse_arm(t.at("arm").get<std::string>());

  c.data_dir = j.at("paths").at("data_dir").get<std::string>();
  c.hierarchy = j.at("paths").at("hierarchy").get<std::string>();
  return c;
}

}  // namespace

RunConfig load_run_config(std::string_view text, const std::vector<Override>& overrides) {
  ordered_json doc = to_json(RunConfig{});
  RunConfig out;
  try {
    if (text.find_first_not_of(" \t\r\n") != std::string_view::npos) merge_strict(doc, ordered_json::parse(text), "");
    for (const Override& o : overrides) apply_override(doc, o);
    out = from_json(doc);
    out.data.validate();
    out.train.validate();
  } catch (const ordered_json::exception& e) {
    throw ConfigError(e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return out;
}

std::string run_config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace logiccar
