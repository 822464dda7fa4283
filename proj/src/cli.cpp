#include "relsplit/cli.hpp"

#include "relsplit/binio.hpp"
#include "relsplit/config.hpp"
#include "relsplit/corpus.hpp"
#include "relsplit/encode.hpp"
#include "relsplit/error.hpp"
#include "relsplit/metrics.hpp"
#include "relsplit/model.hpp"
#include "relsplit/pipeline.hpp"
#include "relsplit/rng.hpp"
#include "relsplit/splitkit.hpp"
#include "relsplit/text.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <thread>

namespace relsplit::cli {

namespace fs = std::filesystem;
using config::Settings;

namespace {

struct Context {
  Settings settings;
  std::ostream &out;
  std::ostream &err;
};

using Action = std::function<int(Context &)>;

struct Command {
  CLI::App *app = nullptr;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::vector<std::pair<CLI::Option *, std::string>> bound;
  std::vector<std::string> required;
  std::function<void(Settings &)> defaults;
  Action action;
  std::string config_path;
};

class Builder {
public:
  explicit Builder(Command &cmd) : cmd_(cmd) {}

  Builder &option(const std::string &flag, const std::string &key, const std::string &desc) {
    auto *o = cmd_.app->add_option(flag, cmd_.values[key], desc);
    cmd_.bound.emplace_back(o, key);
    return *this;
  }

  Builder &required(const std::string &flag, const std::string &key, const std::string &desc) {
    cmd_.required.push_back(key);
    return option(flag, key, desc + " (required)");
  }

  Builder &toggle(const std::string &flag, const std::string &key, const std::string &desc) {
    auto *o = cmd_.app->add_flag(flag, cmd_.switches[key], desc);
    cmd_.bound.emplace_back(o, key);
    return *this;
  }

private:
  Command &cmd_;
};

// ---------------------------------------------------------------------------
// helpers

TaskKind task_of(const Settings &s) { return parse_task(s.str("task")); }

fs::path existing(const Settings &s, const std::string &key) {
  fs::path p = s.str(key);
  if (!fs::exists(p))
    throw Error(ErrorCode::InvalidArgument, "--" + key + ": no such file " + p.string());
  return p;
}

// Refuses to overwrite any input.
void guard_outputs(const std::vector<fs::path> &inputs, const std::vector<fs::path> &outputs) {
  for (const auto &o : outputs) {
    if (o.empty())
      continue;
    for (const auto &i : inputs)
      if (!i.empty() && fs::weakly_canonical(i) == fs::weakly_canonical(o))
        throw Error(ErrorCode::InvalidArgument,
                    "output " + o.string() + " would overwrite input " + i.string());
  }
}

std::string optional_path(const Settings &s, const std::string &key) {
  return s.has(key) ? s.str(key) : std::string();
}

std::size_t as_size(const Settings &s, const std::string &key) {
  return static_cast<std::size_t>(s.u64(key));
}

split::StratifyMode stratify_of(const Settings &s) {
  const auto v = s.str("stratify");
  if (v == "joint")
    return split::StratifyMode::Joint;
  if (v == "marginal")
    return split::StratifyMode::Marginal;
  throw Error(ErrorCode::InvalidArgument, "stratify must be joint or marginal");
}

encode::EncodedDataset load_encoded(const fs::path &p) {
  return encode::parse_encoded(io::read_file(p));
}

// Records of `ds` whose fold is (held_out ? == : !=) `fold`.
encode::EncodedDataset select_fold(const encode::EncodedDataset &ds,
                                   const split::RecordFolds &folds, std::size_t fold,
                                   bool held_out) {
  encode::EncodedDataset out;
  out.config = ds.config;
  out.provider = ds.provider;
  for (const auto &r : ds.records) {
    auto it = folds.find(r.id);
    if (it == folds.end())
      throw Error(ErrorCode::CoverageError, "record " + r.id + " has no fold");
    if ((it->second == fold) == held_out)
      out.records.push_back(r);
  }
  return out;
}

void apply_fold_filter(const Settings &s, encode::EncodedDataset &ds, bool held_out) {
  if (!s.has("fold"))
    return;
  if (!s.has("folds"))
    throw Error(ErrorCode::InvalidArgument, "--fold needs --folds");
  const auto folds = split::parse_record_folds(io::read_file(existing(s, "folds")));
  ds = select_fold(ds, folds, as_size(s, "fold"), held_out);
}

void apply_limit(const Settings &s, encode::EncodedDataset &ds, std::uint64_t seed) {
  const auto limit = as_size(s, "limit");
  if (limit == 0 || ds.size() <= limit)
    return;
  auto eng = make_engine(seed, 1000 + (s.has("fold") ? s.u64("fold") : 0));
  shuffle(std::span(ds.records), eng);
  ds.records.resize(limit);
}

std::unique_ptr<encode::TranslationProvider> make_provider(const Settings &s) {
  const auto name = s.str("provider");
  std::unique_ptr<encode::TranslationProvider> p;
  if (name == "identity")
    p = std::make_unique<encode::IdentityProvider>();
  else if (name == "table")
    p = std::make_unique<encode::TableProvider>(
        encode::TableProvider::from_file(existing(s, "table"), s.boolean("fallback_identity")));
  else
    throw Error(ErrorCode::InvalidArgument, "provider must be identity or table");
  if (s.has("cache") && !s.str("cache").empty())
    p = std::make_unique<encode::CachingProvider>(std::move(p), s.str("cache"));
  return p;
}

std::string train_config_json(const model::TrainConfig &c) {
  nlohmann::ordered_json j;
  j["optimizer"] = model::to_string(c.optimizer);
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["l2"] = c.l2;
  if (c.optimizer == model::Optimizer::AdamW) {
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    j["weight_decay"] = c.weight_decay;
  }
  return j.dump();
}

// Reads (id, label) pairs from any line-delimited file carrying those fields.
metrics::LabeledIds read_labels(const fs::path &p, const std::string &id_field,
                                const std::string &label_field) {
  metrics::LabeledIds out;
  const auto text = io::read_file(p);
  if (!text::is_valid_utf8(text))
    throw Error(ErrorCode::ParseError, p.string() + " is not valid UTF-8");
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty())
      continue;
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      if (j.contains("format"))
        continue; // encoded-file header
      const auto &id = j.at(id_field);
      const auto &label = j.at(label_field);
      if (label.is_null())
        throw Error(ErrorCode::ParseError, p.string() + " line " + std::to_string(i + 1) +
                                               ": record has no label");
      out.emplace_back(id.is_string() ? id.get<std::string>() : id.dump(), label.get<int>());
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::ParseError,
                  p.string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

metrics::FoldSummary read_report(const std::string &path, std::string *task) {
  fs::path p = path;
  if (p.extension() != ".jsonl")
    p += ".jsonl";
  return metrics::parse_report_jsonl(io::read_file(p), task);
}

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_clean(Context &c) {
  const auto &s = c.settings;
  const auto in = existing(s, "in");
  const fs::path out = s.str("out"), report = optional_path(s, "report");
  guard_outputs({in}, {out, report});
  const auto fields = config::field_names(s);
  const auto r = load_dataset(in, task_of(s), fields);
  save_dataset(out, r.dataset, fields);
  if (!report.empty())
    io::write_file(report, pipeline::clean_report(r, s.dump()));
  c.err << "clean: kept " << r.dataset.size() << ", dropped " << r.dropped_count << "\n";
  return kOk;
}

int cmd_synth(Context &c) {
  const auto &s = c.settings;
  const auto spec = config::synth_spec(s);
  const auto pair = gen_synthetic(spec, s.u64("seed"));
  save_dataset(s.str("out_aux"), pair.aux);
  save_dataset(s.str("out_target"), pair.target);
  c.err << "synth: " << pair.aux.size() << " qc records, " << pair.target.size()
        << " qi records\n";
  return kOk;
}

int cmd_split(Context &c) {
  const auto &s = c.settings;
  const auto in = existing(s, "in");
  const fs::path out = s.str("out"), rec = optional_path(s, "record_folds");
  guard_outputs({in}, {out, rec});
  const auto ds = load_dataset(in, task_of(s), config::field_names(s)).dataset;

  pipeline::SplitOptions so;
  so.k = as_size(s, "k");
  so.prefix_n = as_size(s, "prefix_n");
  so.seed = s.u64("seed");
  so.raw_query = s.boolean("raw_query");
  so.delimiter = s.str("delimiter");
  so.assign.mode = stratify_of(s);
  so.assign.restarts = as_size(s, "restarts");
  so.assign.refine = s.boolean("refine");
  const auto group = s.str("group");
  if (group == "query")
    so.group = split::GroupKind::QueryText;
  else if (group == "prefix")
    so.group = split::GroupKind::CategoryPrefix;
  else if (group != "auto")
    throw Error(ErrorCode::InvalidArgument, "group must be auto, query or prefix");
  if (so.prefix_n < 1)
    throw Error(ErrorCode::InvalidArgument, "prefix_n must be >= 1");

  const auto ts = pipeline::split_task(ds, so);
  io::write_file(out, split::serialize_assignment(ts.assignment, ts.meta));
  if (!rec.empty())
    io::write_file(rec, split::serialize_record_folds(ts.folds, ds));
  c.err << "split: " << ts.groups.size() << " groups into " << so.k << " folds, J = "
        << fmt("%.6g", ts.assignment.objective_value) << "\n";
  return kOk;
}

int cmd_audit(Context &c) {
  const auto &s = c.settings;
  const auto folds_path = existing(s, "folds");
  const auto in = existing(s, "in");
  const fs::path report = s.str("report");
  guard_outputs({folds_path, in}, {report});

  auto [assignment, meta] = split::parse_assignment(io::read_file(folds_path));
  const TaskKind task = s.has("task") ? task_of(s)
                        : meta.kind == split::GroupKind::CategoryPrefix
                            ? TaskKind::QueryCategory
                            : TaskKind::QueryItem;
  const auto ds = load_dataset(in, task, config::field_names(s)).dataset;
  const auto groups = pipeline::regroup(ds, meta, s.str("delimiter"));

  split::AuditReport rep;
  if (s.has("record_folds")) {
    const auto rf = split::parse_record_folds(io::read_file(existing(s, "record_folds")));
    rep = split::audit(rf, assignment.k, ds, groups, meta.mode);
  } else {
    rep = split::audit(assignment, ds, groups, meta.mode);
  }
  io::write_file(report, split::audit_to_json(rep));
  if (!rep.clean()) {
    c.err << "audit: " << rep.leakage_violations.size() << " group(s) span several folds\n";
    for (const auto &v : rep.leakage_violations) {
      c.err << "  " << v.group.key << " ->";
      for (auto f : v.folds)
        c.err << " " << f;
      c.err << "\n";
    }
    return kDataError;
  }
  c.err << "audit: clean, divergence " << fmt("%.6g", rep.divergence) << "\n";
  return kOk;
}

int cmd_encode(Context &c) {
  const auto &s = c.settings;
  const auto in = existing(s, "in");
  const fs::path out = s.str("out");
  guard_outputs({in}, {out});
  const auto ds = load_dataset(in, task_of(s), config::field_names(s)).dataset;
  auto provider = make_provider(s);
  const auto threads = static_cast<unsigned>(s.u64("threads"));
  const auto enc = encode::encode_dataset(ds, *provider, config::featurizer_config(s), threads);
  io::write_file(out, encode::serialize_encoded(enc));
  c.err << "encode: " << enc.size() << " records, dims " << enc.config.dims << "\n";
  return kOk;
}

int cmd_train(Context &c) {
  const auto &s = c.settings;
  const auto in = existing(s, "in");
  const fs::path out = s.str("out");
  guard_outputs({in}, {out});
  auto ds = load_encoded(in);
  apply_fold_filter(s, ds, false);
  const auto cfg = config::train_config(s, "train");
  apply_limit(s, ds, cfg.seed);

  std::optional<model::Checkpoint> init;
  if (s.has("init"))
    init = model::load_checkpoint(existing(s, "init"));
  const auto ckpt = model::train(ds, cfg, init ? &*init : nullptr);
  model::save_checkpoint(out, ckpt);
  c.err << "train: " << ds.size() << " examples, config " << train_config_json(cfg)
        << ", final loss " << fmt("%.6g", ckpt.provenance.back().final_loss) << "\n";
  return kOk;
}

int cmd_tapt(Context &c) {
  const auto &s = c.settings;
  const auto aux_path = existing(s, "aux");
  const auto target_path = existing(s, "target");
  const fs::path out = s.str("out");
  guard_outputs({aux_path, target_path}, {out});
  const auto aux = load_encoded(aux_path);
  auto target = load_encoded(target_path);
  apply_fold_filter(s, target, false);
  const auto stage1 = config::train_config(s, "stage1");
  const auto stage2 = config::train_config(s, "stage2");
  apply_limit(s, target, stage2.seed);
  const auto ckpt = model::tapt_train(aux, target, stage1, stage2);
  model::save_checkpoint(out, ckpt);
  c.err << "tapt: stage 1 on " << aux.size() << ", stage 2 on " << target.size()
        << " examples\n";
  return kOk;
}

int cmd_predict(Context &c) {
  const auto &s = c.settings;
  const auto ckpt_path = existing(s, "ckpt");
  const auto in = existing(s, "in");
  const fs::path out = s.str("out");
  guard_outputs({ckpt_path, in}, {out});
  const auto ckpt = model::load_checkpoint(ckpt_path);
  auto ds = load_encoded(in);
  apply_fold_filter(s, ds, true);
  const auto preds = model::classify(ckpt, ds, s.real("threshold"));
  io::write_file(out, model::serialize_predictions(preds));
  c.err << "predict: " << preds.size() << " predictions\n";
  return kOk;
}

int cmd_eval(Context &c) {
  const auto &s = c.settings;
  const auto pred_path = existing(s, "pred");
  const auto truth_path = existing(s, "truth");
  const fs::path out = s.str("out");
  fs::path jsonl = out;
  jsonl += ".jsonl";
  guard_outputs({pred_path, truth_path}, {out, jsonl});

  const auto preds = model::parse_predictions(io::read_file(pred_path));
  auto truths = read_labels(truth_path, s.str("field.id"), s.str("field.label"));

  std::map<std::size_t, metrics::ConfusionCounts> per_fold;
  if (s.has("folds")) {
    const auto folds = split::parse_record_folds(io::read_file(existing(s, "folds")));
    auto fold_of = [&](const std::string &id) {
      auto it = folds.find(id);
      if (it == folds.end())
        throw Error(ErrorCode::CoverageError, "record " + id + " has no fold");
      return it->second;
    };
    std::map<std::size_t, metrics::LabeledIds> p, t;
    for (const auto &x : preds)
      p[fold_of(x.id)].emplace_back(x.id, x.label);
    for (const auto &[id, label] : truths) {
      const auto f = fold_of(id);
      if (!s.has("fold") || f == as_size(s, "fold"))
        t[f].emplace_back(id, label);
    }
    for (auto &[f, labels] : t)
      per_fold[f] = metrics::confusion(p[f], labels);
    for (const auto &[f, labels] : p)
      if (!t.count(f))
        per_fold[f] = metrics::confusion(labels, {});
  } else {
    metrics::LabeledIds p;
    for (const auto &x : preds)
      p.emplace_back(x.id, x.label);
    per_fold[0] = metrics::confusion(p, truths);
  }

  const auto summary = metrics::summarize(per_fold);
  const auto task = s.has("task") ? s.str("task") : std::string("task");
  io::write_file(out, metrics::report_text(summary, task + " evaluation") +
                          "\n## effective config\n" + s.dump());
  io::write_file(jsonl, metrics::report_jsonl(summary, task));
  c.err << "eval: mean F1 " << fmt("%.4f", summary.mean_f1) << ", pooled F1 "
        << fmt("%.4f", summary.pooled.f1) << "\n";
  return kOk;
}

int cmd_eval_avg(Context &c) {
  const auto &s = c.settings;
  std::string text;
  if (s.has("f1_qc") || s.has("f1_qi")) {
    const auto qc = metrics::Ratio::from_decimal(s.str("f1_qc"));
    const auto qi = metrics::Ratio::from_decimal(s.str("f1_qi"));
    const auto avg = metrics::f1_average(qc, qi);
    text = "F1avg " + [&] {
      // Shortest decimal that reads back to the same double.
      for (int prec = 1; prec <= 17; ++prec) {
        const auto t = fmt(("%." + std::to_string(prec) + "g").c_str(), avg.to_double());
        if (std::strtod(t.c_str(), nullptr) == avg.to_double())
          return t;
      }
      return fmt("%.17g", avg.to_double());
    }() + "\n";
  } else {
    std::string task_qc, task_qi;
    const auto qc = read_report(s.str("qc"), &task_qc);
    const auto qi = read_report(s.str("qi"), &task_qi);
    const auto mean = metrics::f1_average(qc.mean_f1, qi.mean_f1);
    const auto best = metrics::f1_average(qc.per_fold.at(qc.best_fold).f1_exact,
                                          qi.per_fold.at(qi.best_fold).f1_exact);
    const auto pooled = metrics::f1_average(qc.pooled.f1_exact, qi.pooled.f1_exact);
    text += "# F1avg = 0.5 * F1(qc) + 0.5 * F1(qi)\n";
    text += "mean_over_folds qc " + fmt("%.4f", qc.mean_f1) + " +- " + fmt("%.4f", qc.std_f1) +
            " qi " + fmt("%.4f", qi.mean_f1) + " +- " + fmt("%.4f", qi.std_f1) + " F1avg " +
            fmt("%.6f", mean) + "\n";
    text += "best_fold qc " + fmt("%.4f", qc.best_f1) + " qi " + fmt("%.4f", qi.best_f1) +
            " F1avg " + fmt("%.6f", best.to_double()) + "\n";
    text += "pooled qc " + fmt("%.4f", qc.pooled.f1) + " qi " + fmt("%.4f", qi.pooled.f1) +
            " F1avg " + fmt("%.6f", pooled.to_double()) + "\n";
  }
  if (s.has("out") && !s.str("out").empty())
    io::write_file(s.str("out"), text);
  else
    c.out << text;
  return kOk;
}

int cmd_reproduce(Context &c) {
  const auto &s = c.settings;
  pipeline::ReproduceOptions opts;
  opts.seed = s.u64("seed");
  opts.replicates = as_size(s, "replicates");
  opts.workdir = s.str("workdir");
  opts.inject_leak = s.boolean("inject_leak");
  opts.write_encoded = s.boolean("write_encoded");
  auto &cfg = opts.cfg;
  cfg.synth = config::synth_spec(s);
  cfg.k = as_size(s, "k");
  cfg.prefix_n = as_size(s, "prefix_n");
  cfg.target_limit = as_size(s, "limit");
  cfg.featurizer = config::featurizer_config(s);
  cfg.stage1 = config::train_config(s, "stage1");
  cfg.stage2 = config::train_config(s, "stage2");
  cfg.threshold = s.real("threshold");
  cfg.tune_threshold = s.boolean("tune_threshold");
  cfg.threads = static_cast<unsigned>(s.u64("threads"));
  if (cfg.k < 2)
    throw Error(ErrorCode::InvalidArgument, "k must be >= 2");
  opts.effective_config = s.dump({"workdir"});

  const auto result = pipeline::reproduce(opts);
  c.err << "reproduce: report at " << (opts.workdir / "report.txt").string() << "\n";
  for (const auto &line : io::split_lines(result.report))
    if (line.rfind("PASS ", 0) == 0 || line.rfind("FAIL ", 0) == 0)
      c.err << "  " << line << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// wiring

void common_dataset_defaults(Settings &s) {
  s.set_default("delimiter", std::string(kDefaultPathDelimiter));
  const FieldNames f;
  s.set_default("field.id", f.id);
  s.set_default("field.query", f.query);
  s.set_default("field.target", f.target);
  s.set_default("field.language", f.language);
  s.set_default("field.label", f.label);
}

void featurizer_defaults(Settings &s) {
  const encode::FeaturizerConfig f;
  s.set_default("dims", std::to_string(f.dims));
  s.set_default("n_min", std::to_string(f.n_min));
  s.set_default("n_max", std::to_string(f.n_max));
  s.set_default("hash_seed", std::to_string(f.seed));
}

void synth_defaults(Settings &s) {
  const SynthSpec d;
  s.set_default("synth.vocab_size", std::to_string(d.vocab_size));
  s.set_default("synth.languages", std::to_string(d.n_languages));
  s.set_default("synth.roots", std::to_string(d.n_category_roots));
  s.set_default("synth.records", std::to_string(d.records_per_task));
  s.set_default("synth.noise", "0");
}

struct Cli {
  CLI::App app{"relsplit: leakage-safe splitting, TAPT training and F1 evaluation for "
               "query relevance data"};
  std::map<std::string, std::unique_ptr<Command>> commands;

  Command &add(const std::string &name, const std::string &desc) {
    auto cmd = std::make_unique<Command>();
    cmd->app = app.add_subcommand(name, desc);
    cmd->app->add_option("--config", cmd->config_path,
                         std::string("flat key = value config file (default: $") +
                             config::kConfigEnv + ")");
    auto &ref = *cmd;
    commands[name] = std::move(cmd);
    return ref;
  }

  Cli() {
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    {
      auto &c = add("clean", "Validate and clean a dataset");
      Builder(c)
          .required("--task", "task", "qc or qi")
          .required("--in", "in", "input records")
          .required("--out", "out", "cleaned records")
          .option("--report", "report", "JSON load report");
      c.defaults = common_dataset_defaults;
      c.action = cmd_clean;
    }
    {
      auto &c = add("synth", "Generate a planted-signal QC (aux) / QI (target) pair");
      Builder(c)
          .option("--seed", "seed", "generator seed")
          .required("--out-aux", "out_aux", "QC dataset")
          .required("--out-target", "out_target", "QI dataset")
          .option("--vocab-size", "synth.vocab_size", "content tokens per task")
          .option("--languages", "synth.languages", "number of languages")
          .option("--roots", "synth.roots", "category roots")
          .option("--records", "synth.records", "records per task")
          .option("--overlap", "synth.overlap", "shared vocabulary fraction in [0, 1]")
          .option("--noise", "synth.noise", "label flip probability");
      c.defaults = [](Settings &s) {
        synth_defaults(s);
        s.set_default("seed", "0");
        s.set_default("synth.overlap", "1");
      };
      c.action = cmd_synth;
    }
    {
      auto &c = add("split", "Assign query / category-prefix groups to stratified folds");
      Builder(c)
          .required("--task", "task", "qc or qi")
          .required("--in", "in", "records")
          .required("--out-folds", "out", "fold assignment file")
          .option("--record-folds", "record_folds", "per-record fold file")
          .option("--k", "k", "number of folds")
          .option("--prefix-n", "prefix_n", "category prefix length")
          .option("--seed", "seed", "seed for optional restarts")
          .option("--group", "group", "auto, query or prefix")
          .option("--stratify", "stratify", "joint or marginal")
          .option("--restarts", "restarts", "randomized restarts")
          .toggle("--raw-query", "raw_query", "group on raw instead of cleaned query text");
      c.defaults = [](Settings &s) {
        common_dataset_defaults(s);
        s.set_default("k", "5");
        s.set_default("prefix_n", "2");
        s.set_default("seed", "0");
        s.set_default("group", "auto");
        s.set_default("stratify", "joint");
        s.set_default("restarts", "0");
        s.set_default("refine", "true");
        s.set_default("raw_query", "false");
      };
      c.action = cmd_split;
    }
    {
      auto &c = add("audit", "Check a fold assignment for leakage and balance");
      Builder(c)
          .required("--folds", "folds", "fold assignment file")
          .required("--in", "in", "records")
          .required("--report", "report", "JSON audit report")
          .option("--task", "task", "qc or qi (default: from the assignment)")
          .option("--record-folds", "record_folds", "audit these per-record folds instead");
      c.defaults = common_dataset_defaults;
      c.action = cmd_audit;
    }
    {
      auto &c = add("encode", "Build input sequences and hashed n-gram features");
      Builder(c)
          .required("--task", "task", "qc or qi")
          .required("--in", "in", "records")
          .required("--out", "out", "encoded records")
          .option("--provider", "provider", "identity or table")
          .option("--table", "table", "translation table (lang, source, english)")
          .option("--cache", "cache", "translation cache file")
          .toggle("--fallback-identity", "fallback_identity",
                  "use the query itself when the table has no entry")
          .option("--dims", "dims", "feature dimensions (power of two)")
          .option("--n-min", "n_min", "shortest n-gram")
          .option("--n-max", "n_max", "longest n-gram")
          .option("--hash-seed", "hash_seed", "hash seed")
          .option("--threads", "threads", "featurization threads");
      c.defaults = [](Settings &s) {
        common_dataset_defaults(s);
        featurizer_defaults(s);
        s.set_default("provider", "identity");
        s.set_default("fallback_identity", "false");
        s.set_default("threads", "1");
      };
      c.action = cmd_encode;
    }
    {
      auto &c = add("train", "Train the relevance classifier");
      Builder(c)
          .required("--in", "in", "encoded records")
          .required("--out", "out", "checkpoint")
          .option("--folds", "folds", "per-record fold file")
          .option("--fold", "fold", "held-out fold (trains on the others)")
          .option("--init", "init", "checkpoint to start from")
          .option("--limit", "limit", "keep at most this many training records (0 = all)")
          .option("--optimizer", "train.optimizer", "sgd or adamw")
          .option("--lr", "train.learning_rate", "learning rate")
          .option("--epochs", "train.epochs", "epochs")
          .option("--batch-size", "train.batch_size", "batch size")
          .option("--seed", "train.seed", "shuffle seed")
          .option("--l2", "train.l2", "L2 penalty");
      c.defaults = [](Settings &s) { s.set_default("limit", "0"); };
      c.action = cmd_train;
    }
    {
      auto &c = add("tapt", "Stage-1 training on an auxiliary task, then the target task");
      Builder(c)
          .required("--aux", "aux", "encoded auxiliary records")
          .required("--target", "target", "encoded target records")
          .required("--out", "out", "checkpoint")
          .option("--folds", "folds", "per-record fold file for the target")
          .option("--fold", "fold", "held-out target fold")
          .option("--limit", "limit", "keep at most this many target records (0 = all)")
          .option("--stage1-optimizer", "stage1.optimizer", "sgd or adamw")
          .option("--stage1-lr", "stage1.learning_rate", "stage 1 learning rate")
          .option("--stage1-epochs", "stage1.epochs", "stage 1 epochs")
          .option("--stage2-optimizer", "stage2.optimizer", "sgd or adamw")
          .option("--stage2-lr", "stage2.learning_rate", "stage 2 learning rate")
          .option("--stage2-epochs", "stage2.epochs", "stage 2 epochs");
      c.defaults = [](Settings &s) { s.set_default("limit", "0"); };
      c.action = cmd_tapt;
    }
    {
      auto &c = add("predict", "Score encoded records with a checkpoint");
      Builder(c)
          .required("--ckpt", "ckpt", "checkpoint")
          .required("--in", "in", "encoded records")
          .required("--out", "out", "predictions")
          .option("--threshold", "threshold", "decision threshold in (0, 1)")
          .option("--folds", "folds", "per-record fold file")
          .option("--fold", "fold", "score only this fold");
      c.defaults = [](Settings &s) { s.set_default("threshold", "0.5"); };
      c.action = cmd_predict;
    }
    {
      auto &c = add("eval", "Positive-class precision, recall and F1");
      Builder(c)
          .required("--pred", "pred", "predictions")
          .required("--truth", "truth", "labeled records")
          .required("--out", "out", "report; per-fold JSON lines go to <out>.jsonl")
          .option("--folds", "folds", "per-record fold file for per-fold metrics")
          .option("--fold", "fold", "restrict the truth to this fold")
          .option("--task", "task", "task name for the report");
      c.defaults = common_dataset_defaults;
      c.action = cmd_eval;
    }
    {
      auto &c = add("eval-avg", "Average the QC and QI F1 scores");
      Builder(c)
          .option("--qc", "qc", "QC report")
          .option("--qi", "qi", "QI report")
          .option("--f1-qc", "f1_qc", "QC F1 as a decimal")
          .option("--f1-qi", "f1_qi", "QI F1 as a decimal")
          .option("--out", "out", "output file (default: standard output)");
      c.action = cmd_eval_avg;
    }
    {
      auto &c = add("reproduce", "Run the synthetic direct-vs-TAPT experiment end to end");
      Builder(c)
          .option("--seed", "seed", "first replicate seed")
          .option("--replicates", "replicates", "number of seeds")
          .option("--workdir", "workdir", "artifact directory")
          .option("--k", "k", "folds")
          .option("--limit", "limit", "target training records per fold (0 = all)")
          .option("--threads", "threads", "folds trained concurrently")
          .option("--threshold", "threshold", "decision threshold")
          .toggle("--tune-threshold", "tune_threshold",
                  "tune the threshold on each fold's training records")
          .toggle("--inject-leak", "inject_leak", "move one grouped record across folds")
          .toggle("--write-encoded", "write_encoded", "also write encoded datasets");
      c.defaults = [](Settings &s) {
        synth_defaults(s);
        featurizer_defaults(s);
        const auto desk = pipeline::ExperimentConfig::desk();
        s.set_default("seed", "7");
        s.set_default("replicates", "5");
        s.set_default("workdir", "relsplit-reproduce");
        s.set_default("k", std::to_string(desk.k));
        s.set_default("prefix_n", std::to_string(desk.prefix_n));
        s.set_default("limit", std::to_string(desk.target_limit));
        s.set_default("threads", "1");
        s.set_default("threshold", "0.5");
        s.set_default("tune_threshold", "false");
        s.set_default("inject_leak", "false");
        s.set_default("write_encoded", "false");
        config::set_train_defaults(s, "stage1", desk.stage1);
        config::set_train_defaults(s, "stage2", desk.stage2);
      };
      c.action = cmd_reproduce;
    }
  }
};

int exit_code_for(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidArgument:
    return kUsage;
  case ErrorCode::InvariantViolation:
    return kInternal;
  default:
    return kDataError;
  }
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  Cli cli;
  std::vector<std::string> storage{"relsplit"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char *> argv;
  for (auto &a : storage)
    argv.push_back(a.data());

  Command *active = nullptr;
  try {
    cli.app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &e) {
    return cli.app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return cli.app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    err << "relsplit: " << e.what() << "\n";
    for (auto *sub : cli.app.get_subcommands())
      err << sub->help();
    if (cli.app.get_subcommands().empty())
      err << cli.app.help();
    return kUsage;
  }
  for (auto &[name, cmd] : cli.commands)
    if (cmd->app->parsed())
      active = cmd.get();
  if (!active)
    return kUsage;

  Context ctx{{}, out, err};
  try {
    if (active->defaults)
      active->defaults(ctx.settings);
    std::string cfg_path = active->config_path;
    if (cfg_path.empty())
      if (const char *env = std::getenv(config::kConfigEnv))
        cfg_path = env;
    if (!cfg_path.empty())
      ctx.settings.merge_file(config::load_config(cfg_path));
    for (const auto &[opt, key] : active->bound) {
      if (opt->count() == 0)
        continue;
      if (active->switches.count(key))
        ctx.settings.set_flag(key, active->switches[key] ? "true" : "false");
      else
        ctx.settings.set_flag(key, active->values[key]);
    }
    for (const auto &key : active->required)
      if (!ctx.settings.has(key))
        throw Error(ErrorCode::InvalidArgument, "missing required setting '" + key + "'");
    return active->action(ctx);
  } catch (const Error &e) {
    err << "relsplit " << active->app->get_name() << ": " << e.what() << "\n";
    const int code = exit_code_for(e.code());
    if (code == kUsage)
      err << active->app->help();
    return code;
  } catch (const fs::filesystem_error &e) {
    err << "relsplit " << active->app->get_name() << ": " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception &e) {
    err << "relsplit " << active->app->get_name() << ": internal error: " << e.what() << "\n";
    return kInternal;
  }
}

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

} // namespace relsplit::cli
