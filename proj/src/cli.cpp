#include "abxi/cli.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "abxi/ablation.hpp"
#include "abxi/alignment.hpp"
#include "abxi/checkpoint.hpp"
#include "abxi/config.hpp"
#include "abxi/error.hpp"
#include "abxi/evaluator.hpp"
#include "abxi/synthetic.hpp"
#include "abxi/trainer.hpp"

namespace abxi {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Workdir {
  fs::path root;
  fs::path corpus() const { return root / "corpus"; }
  fs::path checkpoints() const { return root / "checkpoints"; }
  fs::path reports() const { return root / "reports"; }
  fs::path logs() const { return root / "logs"; }

  void create() const {
    for (const auto& p : {corpus(), checkpoints(), reports(), logs()}) fs::create_directories(p);
  }
};

Workdir make_workdir(const std::string& flag, const fs::path& configured) {
  fs::path chosen = flag.empty() ? configured : fs::path(flag);
  return Workdir{resolve_workdir(chosen)};
}

// Writes through a temporary file so readers never observe partial output.
void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << content;
    if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("'{}': {}", path.string(), e.what()));
  }
}

DomainMap parse_domain_map(const std::string& spec) {
  DomainMap map;
  if (spec.empty()) return map;
  std::stringstream ss(spec);
  std::string entry;
  while (std::getline(ss, entry, ',')) {
    const auto eq = entry.rfind('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(fmt::format("--domains entry '{}' is not LABEL=A|B", entry));
    }
    try {
      map[entry.substr(0, eq)] = parse_domain(entry.substr(eq + 1));
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  return map;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// --- report rendering ----------------------------------------------------

std::string metrics_line(const char* label, const std::optional<DomainMetrics>& m, int skipped) {
  if (!m) return fmt::format("  {}: no ground truths evaluated (skipped {})\n", label, skipped);
  return fmt::format("  {}: HR@5 {:.4f}  HR@10 {:.4f}  NDCG@10 {:.4f}  MRR {:.4f}  (n={}, skipped {})\n", label,
                     m->hr5, m->hr10, m->ndcg10, m->mrr, m->evaluated, skipped);
}

std::string eval_text(const EvalReport& r) {
  std::string s = fmt::format("split {}  seed {}  negatives {} (min used {})\n", r.mode, r.seed,
                              r.requested_negatives, r.min_negatives_used);
  s += metrics_line("A", r.a, r.skipped_a);
  s += metrics_line("B", r.b, r.skipped_b);
  return s;
}

MetricSummary summary_from_json(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

std::optional<AggregatedDomain> aggregated_domain_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return AggregatedDomain{summary_from_json(j.at("HR@5")), summary_from_json(j.at("HR@10")),
                          summary_from_json(j.at("NDCG@10")), summary_from_json(j.at("MRR"))};
}

AggregatedReport aggregated_from_json(const json& j) {
  AggregatedReport r;
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.a = aggregated_domain_from_json(j.at("A"));
  r.b = aggregated_domain_from_json(j.at("B"));
  return r;
}

// --- shared training path --------------------------------------------------

struct VariantRun {
  AggregatedReport aggregated;
  json report;
};

// Trains `model_config` once per seed and writes checkpoint, history log and
// per-seed report under `label`. Every variant goes through this path.
VariantRun train_and_report(const RunConfig& rc, const ModelConfig& model_config, const std::string& label,
                            const std::vector<std::uint64_t>& seeds, const Corpus& corpus, const Split& split,
                            const Workdir& wd, bool verbose) {
  EvalOptions eval_opts;
  eval_opts.n_negatives = rc.train.eval_negatives;
  std::vector<EvalReport> tests;
  json runs = json::array();
  for (std::uint64_t seed : seeds) {
    const std::string stem = fmt::format("{}_seed{}", label, seed);
    const fs::path log_path = wd.logs() / (stem + ".history.jsonl");
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw DataError(fmt::format("cannot write '{}'", log_path.string()));
    auto on_epoch = [&](const EpochRecord& rec) {
      log << to_json(rec).dump() << '\n';
      log.flush();
      if (verbose) {
        fmt::print(stderr, "[{}] epoch {:3d} loss {:.5f} val MRR A {} B {} lr {:.3g}\n", stem, rec.epoch,
                   rec.train_loss, rec.val_mrr_a ? fmt::format("{:.4f}", *rec.val_mrr_a) : "-",
                   rec.val_mrr_b ? fmt::format("{:.4f}", *rec.val_mrr_b) : "-", rec.lr);
      }
    };
    TrainResult result = train(corpus, split, model_config, rc.train, seed, on_epoch);
    const fs::path ckpt = wd.checkpoints() / (stem + ".ckpt");
    CheckpointInfo info{seed, result.best_epoch, result.best_val_mrr_sum,
                        {{"run_config", to_json(rc)}, {"label", label}}};
    const std::string sha = save_checkpoint(*result.model, info, ckpt);
    const EvalReport val = evaluate(*result.model, corpus, split, EvalMode::kValidation, seed, eval_opts);
    const EvalReport test = evaluate(*result.model, corpus, split, EvalMode::kTest, seed, eval_opts);
    tests.push_back(test);
    json run = {{"seed", seed},
                {"best_epoch", result.best_epoch},
                {"epochs_run", result.history.size()},
                {"early_stopped", result.early_stopped},
                {"checkpoint", ckpt.filename().string()},
                {"sha256", sha},
                {"parameter_count", result.model->parameter_count()},
                {"val", to_json(val)},
                {"test", to_json(test)}};
    write_json(wd.reports() / (stem + ".json"),
               {{"config", to_json(rc)}, {"model", to_json(result.model->config())}, {"run", run}});
    write_text(wd.reports() / (stem + ".txt"),
               fmt::format("{} (best epoch {}, sha256 {})\n", stem, result.best_epoch, sha) + eval_text(val) +
                   eval_text(test));
    fmt::print("{}: best epoch {}, test MRR A {} B {}\n", stem, result.best_epoch,
               test.a ? fmt::format("{:.4f}", test.a->mrr) : "-", test.b ? fmt::format("{:.4f}", test.b->mrr) : "-");
    runs.push_back(std::move(run));
  }
  VariantRun out;
  out.aggregated = aggregate(tests);
  out.report = {{"label", label},
                {"config", to_json(rc)},
                {"model", to_json(bind_to_corpus(model_config, corpus))},
                {"runs", runs},
                {"aggregated", to_json(out.aggregated)}};
  return out;
}

struct LoadedRun {
  RunConfig rc;
  Corpus corpus;
  Split split;
  Workdir wd;
};

LoadedRun load_run(const std::string& config_path, const std::string& workdir_flag,
                   const std::optional<int>& max_epochs, const std::optional<std::string>& variant) {
  if (!fs::exists(config_path)) throw ConfigError(fmt::format("config '{}' does not exist", config_path));
  LoadedRun run;
  run.rc = load_run_config(config_path);
  if (max_epochs) {
    run.rc.train.max_epochs = *max_epochs;
    run.rc.train.warmup_epochs = std::min(run.rc.train.warmup_epochs, *max_epochs - 1);
  }
  if (variant) run.rc.variant = *variant;
  validate(run.rc);
  run.corpus = load_input_corpus(run.rc);
  run.split = split_leave_one_out(run.corpus);
  run.wd = make_workdir(workdir_flag, run.rc.workdir);
  run.wd.create();
  return run;
}

// --- commands --------------------------------------------------------------

struct PreprocessArgs {
  std::string input, domains, workdir, name;
  int min_item_count = 5, max_len = 50, min_user_len = 3;
};

void cmd_preprocess(const PreprocessArgs& a) {
  if (!fs::exists(a.input)) throw DataError(fmt::format("input '{}' does not exist", a.input));
  PreprocessOptions opts{a.min_item_count, a.max_len, a.min_user_len};
  if (opts.min_item_count < 1 || opts.max_len < 3 || opts.min_user_len < 3) {
    throw ConfigError("need --min-item-count >= 1, --max-len >= 3, --min-user-len >= 3");
  }
  const DomainMap domains = parse_domain_map(a.domains);
  // Everything is computed before the first byte is written.
  const Corpus corpus = preprocess(load_interactions_file(a.input, domains), opts);
  const CorpusStats stats = corpus_stats(corpus);
  const Workdir wd = make_workdir(a.workdir, ".");
  const std::string name = a.name.empty() ? fs::path(a.input).stem().string() : a.name;
  const fs::path corpus_path = wd.corpus() / (name + ".corpus.json");
  wd.create();
  save_corpus(corpus, corpus_path);
  json domain_json = json::object();
  for (const auto& [label, d] : domains) domain_json[label] = std::string(domain_name(d));
  write_json(wd.corpus() / (name + ".manifest.json"), {{"input", a.input},
                                                       {"domains", domain_json},
                                                       {"options", to_json(opts)},
                                                       {"corpus_file", corpus_path.filename().string()},
                                                       {"stats", to_json(stats)}});
  fmt::print("users {}  items A {} B {}  interactions A {} B {}  val GTs A {} B {}\n", stats.n_users,
             stats.n_items_a, stats.n_items_b, stats.n_interactions_a, stats.n_interactions_b, stats.val_gts_a,
             stats.val_gts_b);
  fmt::print("corpus written to {}\n", corpus_path.string());
}

struct TrainArgs {
  std::string config, workdir, variant;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_epochs;
  bool verbose = false;
};

void cmd_train(const TrainArgs& a) {
  LoadedRun run = load_run(a.config, a.workdir, a.max_epochs,
                           a.variant.empty() ? std::nullopt : std::optional<std::string>(a.variant));
  const auto seeds = a.seed ? std::vector<std::uint64_t>{*a.seed} : run.rc.train.seeds;
  const ModelConfig mc = build_variant(run.rc.variant, run.rc.model);
  VariantRun vr = train_and_report(run.rc, mc, run.rc.variant, seeds, run.corpus, run.split, run.wd, a.verbose);
  if (seeds.size() > 1) {
    write_json(run.wd.reports() / (run.rc.variant + ".json"), vr.report);
    const std::pair<std::string, AggregatedReport> row{run.rc.variant, vr.aggregated};
    write_text(run.wd.reports() / (run.rc.variant + ".txt"), format_table(std::span(&row, 1)));
  }
}

struct EvaluateArgs {
  std::string checkpoint, split = "test", workdir;
};

void cmd_evaluate(const EvaluateArgs& a) {
  if (a.split != "val" && a.split != "test") throw ConfigError("--split must be val or test");
  if (!fs::exists(a.checkpoint)) throw DataError(fmt::format("checkpoint '{}' does not exist", a.checkpoint));
  LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  const json& extra = ck.manifest.at("extra");
  if (!extra.contains("run_config")) throw ConfigError("checkpoint manifest lacks run_config");
  const RunConfig rc = run_config_from_json(extra.at("run_config"));
  validate(rc);
  const Corpus corpus = load_input_corpus(rc);
  if (corpus.n_items_a() != ck.model->config().n_items_a || corpus.n_items_b() != ck.model->config().n_items_b) {
    throw DataError("corpus does not match the checkpoint's item vocabulary");
  }
  const Split split = split_leave_one_out(corpus);
  const auto seed = ck.manifest.at("seed").get<std::uint64_t>();
  EvalOptions opts;
  opts.n_negatives = rc.train.eval_negatives;
  const EvalMode mode = a.split == "val" ? EvalMode::kValidation : EvalMode::kTest;
  const EvalReport report = evaluate(*ck.model, corpus, split, mode, seed, opts);
  const Workdir wd = make_workdir(a.workdir, rc.workdir);
  const std::string stem = fs::path(a.checkpoint).stem().string() + "_" + a.split;
  write_json(wd.reports() / (stem + ".json"), {{"config", to_json(rc)},
                                               {"model", to_json(ck.model->config())},
                                               {"checkpoint", fs::path(a.checkpoint).filename().string()},
                                               {"sha256", ck.manifest.at("sha256")},
                                               {"report", to_json(report)}});
  const std::string text = eval_text(report);
  write_text(wd.reports() / (stem + ".txt"), text);
  fmt::print("{}", text);
}

struct AblateArgs {
  std::string config, workdir, seeds;
  std::vector<std::string> variants;
  std::optional<int> max_epochs;
  bool verbose = false;
};

std::vector<std::uint64_t> resolve_seeds(const std::string& flag, const std::vector<std::uint64_t>& configured) {
  if (flag.empty()) return configured;
  std::vector<std::uint64_t> out;
  for (const auto& s : split_list(flag)) {
    try {
      out.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("invalid seed '{}'", s));
    }
  }
  if (out.empty()) throw ConfigError("--seeds is empty");
  return out;
}

void cmd_ablate(const AblateArgs& a) {
  std::vector<std::string> variants;
  for (const auto& v : a.variants) {
    if (v == "all") {
      variants = variant_names();
      break;
    }
    variants.push_back(v);
  }
  LoadedRun run = load_run(a.config, a.workdir, a.max_epochs, std::nullopt);
  // Reject unknown names before any training starts.
  std::vector<ModelConfig> configs;
  for (const auto& v : variants) configs.push_back(build_variant(v, run.rc.model));
  const auto seeds = resolve_seeds(a.seeds, run.rc.train.seeds);

  const fs::path dir = run.wd.reports() / "ablation";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    RunConfig rc = run.rc;
    rc.variant = variants[i];
    VariantRun vr = train_and_report(rc, configs[i], variants[i], seeds, run.corpus, run.split, run.wd, a.verbose);
    write_json(dir / (variants[i] + ".json"), vr.report);
  }
  // Consolidated table over every variant that has a report so far.
  std::vector<std::pair<std::string, AggregatedReport>> rows;
  json table = json::object();
  for (const auto& name : variant_names()) {
    const fs::path p = dir / (name + ".json");
    if (!fs::exists(p)) continue;
    const json j = read_json(p);
    rows.emplace_back(name, aggregated_from_json(j.at("aggregated")));
    table[name] = j.at("aggregated");
  }
  write_json(run.wd.reports() / "ablation.json", {{"config", to_json(run.rc)}, {"variants", table}});
  const std::string text = format_table(rows);
  write_text(run.wd.reports() / "ablation.txt", text);
  fmt::print("{}", text);
}

struct SweepArgs {
  std::string config, workdir, target, ranks, seeds;
  std::optional<int> max_epochs;
  bool verbose = false;
};

void cmd_sweep_rank(const SweepArgs& a) {
  const RankTarget target = parse_rank_target(a.target);
  LoadedRun run = load_run(a.config, a.workdir, a.max_epochs, std::nullopt);
  const auto points = rank_sweep(build_variant(run.rc.variant, run.rc.model), target, split_list(a.ranks));
  const auto seeds = resolve_seeds(a.seeds, run.rc.train.seeds);
  const std::string field = target == RankTarget::kDomain ? "r_d" : "r_i";
  const fs::path dir = run.wd.reports() / ("sweep_" + field);

  std::vector<std::pair<std::string, AggregatedReport>> rows;
  json table = json::object();
  for (const auto& pt : points) {
    const std::string label = field + "=" + pt.label;
    VariantRun vr = train_and_report(run.rc, pt.config, "sweep_" + field + "_" + pt.label, seeds, run.corpus,
                                     run.split, run.wd, a.verbose);
    write_json(dir / (pt.label + ".json"), vr.report);
    rows.emplace_back(label, vr.aggregated);
    table[pt.label] = to_json(vr.aggregated);
  }
  write_json(run.wd.reports() / ("sweep_" + field + ".json"), {{"config", to_json(run.rc)}, {"points", table}});
  const std::string text = format_table(rows);
  write_text(run.wd.reports() / ("sweep_" + field + ".txt"), text);
  fmt::print("{}", text);
}

struct SyntheticArgs {
  std::string profile = "shared-interest", output, workdir;
  SyntheticOptions opts;
};

void cmd_generate_synthetic(SyntheticArgs a) {
  a.opts.profile = parse_profile(a.profile);
  const auto log = generate_synthetic(a.opts);
  fs::path out = a.output;
  if (out.empty()) {
    out = make_workdir(a.workdir, ".").corpus() / fmt::format("synthetic_{}_{}.csv", a.profile, a.opts.seed);
  }
  std::ostringstream ss;
  write_interactions_csv(ss, log);
  write_text(out, ss.str());
  fmt::print("{} interactions for {} users written to {}\n", log.size(), a.opts.n_users, out.string());
}

struct InspectArgs {
  std::string input, domains, user, mode = "task";
  int max_len = 50, min_item_count = 5;
};

void cmd_inspect_alignment(const InspectArgs& a) {
  RunConfig rc;
  rc.input = a.input;
  rc.domains = parse_domain_map(a.domains);
  rc.preprocess.max_len = a.max_len;
  rc.preprocess.min_item_count = a.min_item_count;
  if (!fs::exists(rc.input)) throw DataError(fmt::format("input '{}' does not exist", a.input));
  AlignmentMode mode;
  if (a.mode == "task") {
    mode = AlignmentMode::kTask;
  } else if (a.mode == "timestamp") {
    mode = AlignmentMode::kTimestamp;
  } else {
    throw ConfigError("--mode must be task or timestamp");
  }
  const Corpus corpus = load_input_corpus(rc);
  const Split split = split_leave_one_out(corpus);
  for (const auto& su : split.users) {
    if (!a.user.empty() && su.user_id != a.user) continue;
    json j = {{"user_id", su.user_id}};
    if (su.train.size() >= 2) {
      j["bundle"] = to_json(build_bundle(su.train, a.max_len, mode));
    } else {
      j["bundle"] = nullptr;
    }
    fmt::print("{}\n", j.dump());
    if (!a.user.empty()) return;
  }
  if (!a.user.empty()) throw DataError(fmt::format("user '{}' not found", a.user));
}

int exit_code(const Error& e) { return static_cast<int>(e.kind()); }

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Cross-domain sequential recommender", "abxi"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "abxi 1.0.0");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Filter a raw interaction log into a corpus");
  c_pre->add_option("--input", pre.input, "Raw interactions (CSV or JSON-lines)")->required();
  c_pre->add_option("--domains", pre.domains, "Category mapping, e.g. Food=A,Kitchen=B");
  c_pre->add_option("--min-item-count", pre.min_item_count, "Minimum interactions per item")->capture_default_str();
  c_pre->add_option("--max-len", pre.max_len, "Keep the latest N interactions per user")->capture_default_str();
  c_pre->add_option("--min-user-len", pre.min_user_len, "Drop users shorter than this")->capture_default_str();
  c_pre->add_option("--workdir", pre.workdir, "Work directory");
  c_pre->add_option("--name", pre.name, "Corpus name (default: input stem)");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train one variant; one checkpoint per seed");
  c_train->add_option("--config", tr.config, "Run config JSON")->required();
  c_train->add_option("--seed", tr.seed, "Train only this seed");
  c_train->add_option("--variant", tr.variant, "Override the configured variant");
  c_train->add_option("--max-epochs", tr.max_epochs, "Override train.max_epochs");
  c_train->add_option("--workdir", tr.workdir, "Work directory");
  c_train->add_flag("--verbose", tr.verbose, "Print every epoch");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint (.ckpt)")->required();
  c_eval->add_option("--split", ev.split, "val or test")->capture_default_str();
  c_eval->add_option("--workdir", ev.workdir, "Work directory");

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "Train and evaluate ablation variants");
  c_ab->add_option("--config", ab.config, "Run config JSON")->required();
  c_ab->add_option("--variant", ab.variants, "Variant name (repeatable, or 'all')")->required();
  c_ab->add_option("--seeds", ab.seeds, "Comma-separated seeds (default: config)");
  c_ab->add_option("--max-epochs", ab.max_epochs, "Override train.max_epochs");
  c_ab->add_option("--workdir", ab.workdir, "Work directory");
  c_ab->add_flag("--verbose", ab.verbose, "Print every epoch");

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep-rank", "Sweep a LoRA rank");
  c_sw->add_option("--config", sw.config, "Run config JSON")->required();
  c_sw->add_option("--target", sw.target, "d (domain LoRAs) or i (invariant LoRAs)")->required();
  c_sw->add_option("--ranks", sw.ranks, "Comma-separated ranks from 0,4,8,16,32,64,128,proj")->required();
  c_sw->add_option("--seeds", sw.seeds, "Comma-separated seeds (default: config)");
  c_sw->add_option("--max-epochs", sw.max_epochs, "Override train.max_epochs");
  c_sw->add_option("--workdir", sw.workdir, "Work directory");
  c_sw->add_flag("--verbose", sw.verbose, "Print every epoch");

  SyntheticArgs syn;
  auto* c_syn = app.add_subcommand("generate-synthetic", "Write a synthetic interaction log");
  c_syn->add_option("--profile", syn.profile, "shared-interest | mismatch-heavy | random")->capture_default_str();
  c_syn->add_option("--n-users", syn.opts.n_users, "Number of users")->capture_default_str();
  c_syn->add_option("--seed", syn.opts.seed, "Generator seed")->capture_default_str();
  c_syn->add_option("--items-per-domain", syn.opts.items_per_domain, "Items per domain")->capture_default_str();
  c_syn->add_option("--min-len", syn.opts.min_len, "Shortest user sequence")->capture_default_str();
  c_syn->add_option("--max-len", syn.opts.max_len, "Longest user sequence")->capture_default_str();
  c_syn->add_option("--noise", syn.opts.noise, "mismatch-heavy: off-chain probability")->capture_default_str();
  c_syn->add_option("--output", syn.output, "Output CSV (default: <workdir>/corpus/...)");
  c_syn->add_option("--workdir", syn.workdir, "Work directory");

  InspectArgs in;
  auto* c_in = app.add_subcommand("inspect-alignment", "Print aligned training sequences as JSON lines");
  c_in->add_option("--input", in.input, "Raw interactions or *.corpus.json")->required();
  c_in->add_option("--domains", in.domains, "Category mapping, e.g. Food=A,Kitchen=B");
  c_in->add_option("--user", in.user, "Only this user");
  c_in->add_option("--mode", in.mode, "task or timestamp")->capture_default_str();
  c_in->add_option("--max-len", in.max_len, "Sequence length L")->capture_default_str();
  c_in->add_option("--min-item-count", in.min_item_count, "Minimum interactions per item")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
  }

  try {
    if (c_pre->parsed()) cmd_preprocess(pre);
    if (c_train->parsed()) cmd_train(tr);
    if (c_eval->parsed()) cmd_evaluate(ev);
    if (c_ab->parsed()) cmd_ablate(ab);
    if (c_sw->parsed()) cmd_sweep_rank(sw);
    if (c_syn->parsed()) cmd_generate_synthetic(syn);
    if (c_in->parsed()) cmd_inspect_alignment(in);
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace abxi
