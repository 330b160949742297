#include "cli.hpp"

#include "logiccar/hierarchy.hpp"
#include "logiccar/logic_ast.hpp"
#include "logiccar/rule_check.hpp"
#include "logiccar/run_config.hpp"
#include "logiccar/scoring_model.hpp"
#include "logiccar/synth_data.hpp"
#include "logiccar/trainer.hpp"
#include "logiccar/zscar_metrics.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>

namespace logiccar::cli {

namespace fs = std::filesystem;

namespace {

struct Failure {
  ExitCode code;
  std::string message;
};

std::string read_required(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Failure{kConfigError, std::string(what) + " '" + path.string() + "' does not exist"};
  return read_text_file(path);
}

std::vector<Override> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<Override> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() < 3)
      throw Failure{kConfigError, "unexpected argument '" + tok + "'"};
    std::string key = tok.substr(2);
    if (const auto eq = key.find('='); eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
      continue;
    }
    if (key.find('.') == std::string::npos) throw Failure{kConfigError, "unknown option '" + tok + "'"};
    if (i + 1 >= extras.size()) throw Failure{kConfigError, "override '" + tok + "' needs a value"};
    out.emplace_back(std::move(key), extras[++i]);
  }
  return out;
}

struct Workspace {
  LabelSpace ls;
  Hierarchy h;
  Dataset data;
};

Workspace load_workspace(const RunConfig& cfg) {
  Workspace w;
  if (cfg.data_dir.empty()) {
    GeneratedLabels gen = build_label_space(cfg.data);
    w.ls = std::move(gen.labels);
    w.h = std::move(gen.hierarchy);
    w.data = sample_dataset(w.ls, cfg.data);
    if (!cfg.hierarchy.empty()) w.h = hierarchy_from_json(read_required(cfg.hierarchy, "hierarchy"), w.ls);
  } else {
    const fs::path dir = cfg.data_dir;
    w.ls = label_space_from_json(read_required(dir / "labelspace.json", "label space"));
    read_required(dir / "dataset.csv", "dataset");
    w.data = read_dataset(dir / "dataset.csv", w.ls);
    const fs::path hp = cfg.hierarchy.empty() ? dir / "hierarchy.json" : fs::path(cfg.hierarchy);
    w.h = hierarchy_from_json(read_required(hp, "hierarchy"), w.ls);
  }
  if (const auto errors = validate_hierarchy(w.ls, w.h); !errors.empty())
    throw Failure{kValidationError, "invalid hierarchy: " + errors.front()};
  return w;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& extras,
                      std::optional<std::uint64_t> seed) {
  std::vector<Override> overrides = parse_overrides(extras);
  if (seed) overrides.emplace_back("train.seed", std::to_string(*seed));
  const std::string text = path.empty() ? std::string() : read_required(path, "config");
  return load_run_config(text, overrides);
}

void print_counts(std::ostream& out, const LabelSpace& ls, const Dataset& d) {
  out << "verbs " << ls.num_verbs() << ", objects " << ls.num_objects() << ", compositions "
      << ls.num_compositions() << "\n";
  for (CompositionSplit s : {CompositionSplit::kSeen, CompositionSplit::kUnseenVal, CompositionSplit::kUnseenTest})
    out << "  " << split_name(s) << ": " << ls.compositions_in(s).size() << " compositions\n";
  for (SampleSplit s : {SampleSplit::kTrain, SampleSplit::kVal, SampleSplit::kTest}) {
    std::size_t n = 0;
    for (SampleSplit t : d.split) n += t == s ? 1 : 0;
    out << "  " << sample_split_name(s) << " samples: " << n << "\n";
  }
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void print_report(std::ostream& out, const EvalReport& r) {
  out << "verb " << fmt(r.verb_acc) << "  object " << fmt(r.object_acc) << "  seen " << fmt(r.best_seen)
      << "  unseen " << fmt(r.best_unseen) << "  hm " << fmt(r.best_hm) << "  auc " << fmt(r.auc) << "\n";
  if (r.no_seen_samples) out << "warning: no seen-composition samples; seen accuracy reported as 0\n";
  if (r.no_unseen_samples) out << "warning: no unseen-composition samples; unseen accuracy reported as 0\n";
}

void write_report_files(const fs::path& dir, const EvalReport& r, const std::string& title) {
  write_text_file(dir / "report.json", report_to_json(r));
  write_text_file(dir / "curve.csv", curve_to_csv(r.curve));
  write_text_file(dir / "curve.svg", curve_to_svg(r.curve, title));
}

// --- commands ------------------------------------------------------------------

int cmd_gen_data(const std::string& spec_path, const fs::path& out_dir, std::optional<std::uint64_t> seed,
                 std::ostream& out) {
  DatasetSpec spec;
  if (!spec_path.empty()) spec = dataset_spec_from_json(read_required(spec_path, "spec"));
  if (seed) spec.seed = *seed;
  spec.validate();
  const GeneratedLabels gen = build_label_space(spec);
  const Dataset data = sample_dataset(gen.labels, spec);
  write_text_file(out_dir / "spec.json", dataset_spec_to_json(spec));
  write_label_space(out_dir / "labelspace.json", gen.labels);
  write_hierarchy(out_dir / "hierarchy.json", gen.labels, gen.hierarchy);
  write_dataset(out_dir / "dataset.csv", data);
  print_counts(out, gen.labels, data);
  return kOk;
}

struct HierarchyArgs {
  std::string labelspace;
  std::string mode = "heuristic";
  std::string votes;
  std::string cache;
  std::string prompt;
  int trials = kDefaultTrials;
  std::string out;
};

int cmd_build_hierarchy(const HierarchyArgs& a, std::ostream& out) {
  const LabelSpace ls = label_space_from_json(read_required(a.labelspace, "label space"));
  const Partition verbs = cluster_verbs(ls.verbs);
  Partition objects;
  std::vector<TaxonomyVote> votes;
  if (a.mode == "heuristic") {
    objects = heuristic_object_partition(ls.objects);
  } else if (a.mode == "votes") {
    if (a.votes.empty()) throw Failure{kConfigError, "--mode votes requires --votes <dir>"};
    VoteResult r = aggregate_votes(ls.objects, read_vote_files(a.votes));
    objects = std::move(r.partition);
    votes = std::move(r.votes);
  } else if (a.mode == "llm") {
    LlmQueryOptions opts;
    opts.cache_dir = a.cache.empty() ? fs::path(a.out).parent_path() / "llm_cache" : fs::path(a.cache);
    opts.trials = a.trials;
    if (!a.prompt.empty()) opts.prompt_template = read_required(a.prompt, "prompt template");
    if (const auto endpoint = LlmEndpoint::from_env()) opts.transport = http_transport(*endpoint);
    const LlmTaxonomy tax = query_llm_taxonomy(ls.objects, opts);
    for (const ParseFailure& f : tax.parse_errors)
      out << "unparseable response for '" << f.object << "' (trial " << f.trial << ")\n";
    VoteResult r = aggregate_votes(ls.objects, tax.trials);
    objects = std::move(r.partition);
    votes = std::move(r.votes);
  } else {
    throw Failure{kConfigError, "unknown mode '" + a.mode + "' (heuristic, llm, votes)"};
  }
  const Hierarchy h = make_hierarchy(verbs, objects);
  if (const auto errors = validate_hierarchy(ls, h); !errors.empty()) {
    std::string msg = "hierarchy failed validation:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw Failure{kValidationError, msg};
  }
  write_hierarchy(a.out, ls, h);
  out << "coarse verbs: " << h.num_coarse_verbs() << ", coarse objects: " << h.num_coarse_objects() << "\n";
  for (const TaxonomyVote& v : votes)
    if (v.tie) out << "tie for '" << v.object << "' resolved to '" << v.chosen << "'\n";
  return kOk;
}

int cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const Workspace w = load_workspace(cfg);
  write_text_file(out_dir / "config.json", run_config_to_json(cfg));
  const TrainResult r = train(cfg.train, w.data, w.ls, w.h, out_dir);
  write_checkpoint(out_dir / "checkpoint.json", r.params);
  write_text_file(out_dir / "history.csv", history_to_csv(r.history));
  std::string val = "epoch,seen,unseen,hm,auc\n";
  for (std::size_t e = 0; e < r.history.validation.size(); ++e) {
    const EvalReport& v = r.history.validation[e];
    val += std::to_string(e) + "," + format_double(v.best_seen) + "," + format_double(v.best_unseen) + "," +
           format_double(v.best_hm) + "," + format_double(v.auc) + "\n";
  }
  write_text_file(out_dir / "validation.csv", val);
  const LossBreakdown& last = r.history.steps.back().loss;
  out << "trained " << cfg.train.epochs << " epochs, " << r.history.steps.size() << " steps; final loss "
      << fmt(last.total, "%.6f") << " (L_c " << fmt(last.l_c, "%.6f") << ")\n";
  if (!r.history.validation.empty()) {
    out << "validation: ";
    print_report(out, r.history.validation.back());
  }
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& split,
             const std::string& source, const fs::path& out_dir, std::ostream& out) {
  const fs::path dir = data_dir;
  const LabelSpace ls = label_space_from_json(read_required(dir / "labelspace.json", "label space"));
  read_required(dir / "dataset.csv", "dataset");
  const Dataset data = read_dataset(dir / "dataset.csv", ls);
  read_required(checkpoint, "checkpoint");
  const ModelParams p = read_checkpoint(checkpoint);
  if (p.num_compositions() != ls.num_compositions())
    throw Failure{kValidationError, "checkpoint and label space disagree on the composition count"};
  for (Index c = 0; c < ls.num_compositions(); ++c) {
    const Composition& comp = ls.compositions[static_cast<std::size_t>(c)];
    if (p.composition_parts[static_cast<std::size_t>(c)] != std::pair<Index, Index>{comp.verb, comp.object})
      throw Failure{kValidationError, "checkpoint and label space disagree on composition " + std::to_string(c)};
  }
  SampleSplit s;
  if (split == "test") s = SampleSplit::kTest;
  else if (split == "val") s = SampleSplit::kVal;
  else throw Failure{kConfigError, "unknown split '" + split + "' (val, test)"};
  MetricSource ms;
  if (source == "branch") ms = MetricSource::kBranch;
  else if (source == "composition") ms = MetricSource::kComposition;
  else throw Failure{kConfigError, "unknown metric source '" + source + "' (branch, composition)"};
  const EvalReport r = evaluate_split(p, data, ls, s, ms);
  write_report_files(out_dir, r, "seen/unseen accuracy (" + split + ")");
  print_report(out, r);
  return kOk;
}

int cmd_ablate(const RunConfig& cfg, int seeds, const fs::path& out_dir, std::ostream& out) {
  const Workspace w = load_workspace(cfg);
  write_text_file(out_dir / "config.json", run_config_to_json(cfg));
  AblationPlan plan;
  plan.seeds = default_seeds(cfg.train.seed, seeds);
  const std::vector<ArmResult> arms = run_ablation(plan, cfg.train, w.data, w.ls, w.h);
  for (const ArmResult& a : arms)
    for (std::size_t i = 0; i < a.reports.size(); ++i)
      write_report_files(out_dir / std::string(arm_name(a.arm)) / ("seed_" + std::to_string(plan.seeds[i])), a.reports[i],
                         std::string(arm_name(a.arm)) + " seed " + std::to_string(plan.seeds[i]));
  write_text_file(out_dir / "ablation.json", ablation_to_json(arms));
  out << "arm    seen            unseen          hm              auc\n";
  const auto cell = [](const MetricStats& s) { return fmt(100 * s.mean, "%5.2f") + " +- " + fmt(100 * s.sd, "%5.2f") + "  "; };
  for (const ArmResult& a : arms) {
    char name[8];
    std::snprintf(name, sizeof name, "%-6s", std::string(arm_name(a.arm)).c_str());
    out << name << " " << cell(a.seen) << cell(a.unseen) << cell(a.hm) << cell(a.auc) << "\n";
  }
  return kOk;
}

struct RulesArgs {
  std::string labelspace;
  std::string hierarchy;
  std::string rules;
  std::string scope = "seen";
  int tables = 100;
  Index max_samples = 8;
  std::uint64_t seed = 0;
  bool print = false;
};

int cmd_rules_check(const RulesArgs& a, std::ostream& out) {
  const LabelSpace ls = label_space_from_json(read_required(a.labelspace, "label space"));
  const Hierarchy h = hierarchy_from_json(read_required(a.hierarchy, "hierarchy"), ls);
  if (const auto errors = validate_hierarchy(ls, h); !errors.empty())
    throw Failure{kValidationError, "invalid hierarchy: " + errors.front()};
  if (a.scope != "seen" && a.scope != "all") throw Failure{kConfigError, "unknown scope '" + a.scope + "' (seen, all)"};
  std::vector<RuleSet> sets;
  sets.push_back(gen_ecl_rules(ls, a.scope == "seen" ? CompositionScope::kSeenOnly : CompositionScope::kAll));
  sets.push_back(gen_hpl_rules(ls, h));
  const Vocabulary vocab(ls, &h);
  if (!a.rules.empty()) sets.push_back(parse_rules(read_required(a.rules, "rules file"), vocab, Provenance::kUser));
  if (a.print)
    for (const RuleSet& rs : sets) out << print_rules(rs);
  std::array<Index, 5> card{};
  for (Granularity g : kAllGranularities) card[index_of(g)] = vocab.cardinality(g);
  const CrossCheck r = cross_check(sets, card, static_cast<std::size_t>(a.tables), a.max_samples, a.seed);
  out << "rules checked: " << r.rules_checked << " (trivial skipped: " << r.trivial_skipped
      << ", generic only: " << r.unclassified << ") on " << r.tables << " random tables\n";
  out << "max |closed form - generic| = " << fmt(r.max_deviation, "%.3e") << "\n";
  out << "whole-rule product-conjunction deviation (informational) = " << fmt(r.max_literal_deviation, "%.3e") << "\n";
  return r.max_deviation < 1e-9 ? kOk : kNumericalError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Logic-constrained compositional action recognition toolkit", "logiccar"};
  app.require_subcommand(1);
  std::function<int()> action;
  std::string command;

  std::optional<std::uint64_t> seed;
  const auto add_seed = [&seed](CLI::App* sub) { sub->add_option("--seed", seed, "Seed override"); };

  std::string spec_path, out_dir;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic benchmark");
  gen->add_option("--spec", spec_path, "Dataset spec JSON (defaults when omitted)");
  gen->add_option("--out", out_dir, "Output directory")->required();
  add_seed(gen);
  gen->callback([&] { action = [&] { return cmd_gen_data(spec_path, out_dir, seed, out); }; });

  HierarchyArgs ha;
  auto* hier = app.add_subcommand("build-hierarchy", "Build the coarse verb/object hierarchy");
  hier->add_option("--labelspace", ha.labelspace, "labelspace.json")->required();
  hier->add_option("--mode", ha.mode, "heuristic | llm | votes")->capture_default_str();
  hier->add_option("--votes", ha.votes, "Directory of trial files (votes mode)");
  hier->add_option("--cache", ha.cache, "Response cache directory (llm mode)");
  hier->add_option("--prompt", ha.prompt, "Prompt template file (llm mode)");
  hier->add_option("--trials", ha.trials, "Independent responses per object")->capture_default_str();
  hier->add_option("--out", ha.out, "Output hierarchy.json")->required();
  add_seed(hier);
  hier->callback([&] { action = [&] { return cmd_build_hierarchy(ha, out); }; });

  std::string config_path;
  auto* tr = app.add_subcommand("train", "Train the scorer under the logic objective");
  tr->add_option("--config", config_path, "Run config JSON");
  tr->add_option("--out", out_dir, "Output directory")->required();
  add_seed(tr);
  tr->allow_extras();
  tr->callback([&] {
    action = [&] { return cmd_train(load_config(config_path, tr->remaining(), seed), out_dir, out); };
  });

  std::string checkpoint, data_dir, split = "test", source = "branch";
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", checkpoint, "checkpoint.json")->required();
  ev->add_option("--data", data_dir, "Data directory (labelspace.json, dataset.csv)")->required();
  ev->add_option("--split", split, "val | test")->capture_default_str();
  ev->add_option("--metric-source", source, "branch | composition")->capture_default_str();
  ev->add_option("--out", out_dir, "Output directory")->required();
  add_seed(ev);
  ev->callback([&] { action = [&] { return cmd_eval(checkpoint, data_dir, split, source, out_dir, out); }; });

  int seeds = 5;
  auto* ab = app.add_subcommand("ablate", "Four-arm constraint ablation");
  ab->add_option("--config", config_path, "Run config JSON");
  ab->add_option("--seeds", seeds, "Number of training seeds")->capture_default_str();
  ab->add_option("--out", out_dir, "Output directory")->required();
  add_seed(ab);
  ab->allow_extras();
  ab->callback([&] {
    action = [&] { return cmd_ablate(load_config(config_path, ab->remaining(), seed), seeds, out_dir, out); };
  });

  RulesArgs ra;
  auto* rules = app.add_subcommand("rules", "Rule utilities");
  rules->require_subcommand(1);
  auto* check = rules->add_subcommand("check", "Cross-check generic rule evaluation against closed forms");
  check->add_option("--labelspace", ra.labelspace, "labelspace.json")->required();
  check->add_option("--hierarchy", ra.hierarchy, "hierarchy.json")->required();
  check->add_option("--rules", ra.rules, "Additional rules file");
  check->add_option("--scope", ra.scope, "Compositions covered by generated rules: seen | all")->capture_default_str();
  check->add_option("--tables", ra.tables, "Random score tables")->capture_default_str();
  check->add_option("--max-samples", ra.max_samples, "Largest K per table")->capture_default_str();
  check->add_flag("--print", ra.print, "Print the rules");
  add_seed(check);
  check->callback([&] {
    action = [&] {
      if (seed) ra.seed = *seed;
      return cmd_rules_check(ra, out);
    };
  });

  std::vector<std::string> argv_store{"logiccar"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  const auto fail = [&err](ExitCode code, const char* kind, const std::string& msg) {
    err << "logiccar: " << kind << " error: " << msg << "\n";
    return static_cast<int>(code);
  };
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail(kConfigError, "usage", e.what());
  }
  try {
    return action ? action() : kOk;
  } catch (const Failure& f) {
    return fail(f.code, f.code == kValidationError ? "validation" : "config", f.message);
  } catch (const ConfigError& e) {
    return fail(kConfigError, "config", e.what());
  } catch (const DataError& e) {
    return fail(kConfigError, "data", e.what());
  } catch (const ModelError& e) {
    return fail(kConfigError, "checkpoint", e.what());
  } catch (const LabelSpaceError& e) {
    return fail(kValidationError, "validation", e.what());
  } catch (const HierarchyError& e) {
    return fail(kValidationError, "validation", e.what());
  } catch (const ParseError& e) {
    return fail(kValidationError, "rules", e.what());
  } catch (const LlmError& e) {
    return fail(kExternalError, "llm", e.what());
  } catch (const NumericalError& e) {
    return fail(kNumericalError, "numerical", e.what());
  } catch (const GraphError& e) {
    return fail(kNumericalError, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(kFailure, "runtime", e.what());
  }
}

}  // namespace logiccar::cli
