#include "relsplit/pipeline.hpp"

#include "relsplit/binio.hpp"
#include "relsplit/error.hpp"
#include "relsplit/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <future>

namespace relsplit::pipeline {

using ordered_json = nlohmann::ordered_json;

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.stage1 = model::TrainConfig::defaults(model::Optimizer::SGD);
  c.stage1.learning_rate = 1.0;
  c.stage1.epochs = 50;
  c.stage1.l2 = 1e-3;
  c.stage2 = model::TrainConfig::defaults(model::Optimizer::SGD);
  c.stage2.learning_rate = 1.0;
  c.stage2.epochs = 600;
  c.stage2.l2 = 1e-4;
  return c;
}

std::string clean_report(const LoadResult &r, std::string_view effective_config) {
  ordered_json j;
  j["task"] = to_string(r.dataset.task);
  j["records"] = r.dataset.size();
  j["dropped_count"] = r.dropped_count;
  j["dropped_empty_query"] = r.dropped_empty_query;
  j["dropped_empty_target"] = r.dropped_empty_target;
  j["languages"] = r.dataset.languages;
  j["config"] = effective_config;
  return j.dump(2) + "\n";
}

TaskSplit split_task(const Dataset &ds, const SplitOptions &opts) {
  TaskSplit out;
  out.meta.kind = opts.group.value_or(ds.task == TaskKind::QueryCategory
                                          ? split::GroupKind::CategoryPrefix
                                          : split::GroupKind::QueryText);
  out.meta.prefix_n = opts.prefix_n;
  out.meta.raw_query = opts.raw_query;
  out.meta.mode = opts.assign.mode;
  out.groups = regroup(ds, out.meta, opts.delimiter);
  out.assignment = split::assign_folds(out.groups, split::strata_of(ds), opts.k, opts.seed,
                                       opts.assign);
  out.folds = split::record_folds(out.assignment, out.groups);
  return out;
}

split::Groups regroup(const Dataset &ds, const split::SplitMeta &meta,
                      std::string_view delimiter) {
  if (meta.kind == split::GroupKind::CategoryPrefix)
    return split::group_by_category_prefix(ds, meta.prefix_n, delimiter);
  return split::group_by_query(ds, meta.raw_query);
}

bool inject_leak(split::RecordFolds &folds, const split::Groups &groups, std::size_t k) {
  for (const auto &[key, ids] : groups) {
    if (ids.size() < 2)
      continue;
    auto &fold = folds.at(ids.back());
    fold = (fold + 1) % k;
    return true;
  }
  return false;
}

namespace {

encode::EncodedDataset subset(const encode::EncodedDataset &ds, const split::RecordFolds &folds,
                              std::size_t fold, bool held_out) {
  encode::EncodedDataset out;
  out.config = ds.config;
  out.provider = ds.provider;
  for (const auto &r : ds.records)
    if ((folds.at(r.id) == fold) == held_out)
      out.records.push_back(r);
  return out;
}

metrics::ConfusionCounts score(const std::vector<model::Prediction> &preds,
                               const encode::EncodedDataset &truth) {
  metrics::LabeledIds p, t;
  p.reserve(preds.size());
  t.reserve(truth.size());
  for (const auto &x : preds)
    p.emplace_back(x.id, x.label);
  for (const auto &r : truth.records) {
    if (!r.label)
      throw Error(ErrorCode::InvalidArgument, "held-out record " + r.id + " has no label");
    t.emplace_back(r.id, *r.label);
  }
  return metrics::confusion(p, t);
}

FoldRun run_fold(const encode::EncodedDataset &target, const split::RecordFolds &folds,
                 std::size_t fold, const model::Checkpoint &stage1, const ExperimentConfig &cfg,
                 std::uint64_t seed) {
  auto train = subset(target, folds, fold, false);
  const auto test = subset(target, folds, fold, true);
  if (cfg.target_limit > 0 && train.size() > cfg.target_limit) {
    auto eng = make_engine(seed, 1000 + fold);
    shuffle(std::span(train.records), eng);
    train.records.resize(cfg.target_limit);
  }
  auto stage2 = cfg.stage2;
  stage2.seed = seed;

  FoldRun run;
  run.direct = model::train(train, stage2);
  run.tapt = model::train(train, stage2, &stage1);
  if (cfg.tune_threshold) {
    run.direct_threshold = model::tune_threshold(run.direct, train);
    run.tapt_threshold = model::tune_threshold(run.tapt, train);
  } else {
    run.direct_threshold = run.tapt_threshold = cfg.threshold;
  }
  run.direct_pred = model::classify(run.direct, test, run.direct_threshold);
  run.tapt_pred = model::classify(run.tapt, test, run.tapt_threshold);
  run.direct_counts = score(run.direct_pred, test);
  run.tapt_counts = score(run.tapt_pred, test);
  return run;
}

} // namespace

DirectionResult run_direction(const encode::EncodedDataset &aux,
                              const encode::EncodedDataset &target,
                              const split::RecordFolds &target_folds,
                              const ExperimentConfig &cfg, std::uint64_t seed) {
  DirectionResult out;
  auto stage1 = cfg.stage1;
  stage1.seed = seed;
  out.stage1 = model::train(aux, stage1);

  out.folds.resize(cfg.k);
  const unsigned threads = std::max(1u, cfg.threads);
  for (std::size_t start = 0; start < cfg.k; start += threads) {
    const std::size_t stop = std::min<std::size_t>(cfg.k, start + threads);
    if (threads == 1) {
      out.folds[start] = run_fold(target, target_folds, start, out.stage1, cfg, seed);
      continue;
    }
    std::vector<std::future<FoldRun>> jobs;
    for (std::size_t f = start; f < stop; ++f)
      jobs.push_back(std::async(std::launch::async, run_fold, std::cref(target),
                                std::cref(target_folds), f, std::cref(out.stage1),
                                std::cref(cfg), seed));
    for (std::size_t f = start; f < stop; ++f)
      out.folds[f] = jobs[f - start].get();
  }

  std::map<std::size_t, metrics::ConfusionCounts> direct, tapt;
  for (std::size_t f = 0; f < cfg.k; ++f) {
    direct[f] = out.folds[f].direct_counts;
    tapt[f] = out.folds[f].tapt_counts;
  }
  out.direct = metrics::summarize(direct);
  out.tapt = metrics::summarize(tapt);
  return out;
}

namespace {

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string rho_name(double overlap) { return "rho" + fmt("%.2f", overlap); }

class Artifacts {
public:
  explicit Artifacts(std::filesystem::path root) : root_(std::move(root)) {}

  bool enabled() const { return !root_.empty(); }

  void write(const std::filesystem::path &rel, std::string_view bytes) const {
    if (enabled())
      io::write_file(root_ / rel, bytes);
  }

  const std::filesystem::path &root() const { return root_; }

private:
  std::filesystem::path root_;
};

std::string effective_experiment(const ExperimentConfig &c) {
  ordered_json j;
  j["k"] = c.k;
  j["prefix_n"] = c.prefix_n;
  j["target_limit"] = c.target_limit;
  j["threshold"] = c.threshold;
  j["tune_threshold"] = c.tune_threshold;
  j["synth"] = {{"vocab_size", c.synth.vocab_size},
                {"languages", c.synth.n_languages},
                {"roots", c.synth.n_category_roots},
                {"records", c.synth.records_per_task},
                {"noise", c.synth.label_noise}};
  j["featurizer"] = {{"dims", c.featurizer.dims},
                     {"n_min", c.featurizer.n_min},
                     {"n_max", c.featurizer.n_max},
                     {"hash_seed", c.featurizer.seed}};
  auto stage = [](const model::TrainConfig &t) {
    return ordered_json{{"optimizer", model::to_string(t.optimizer)},
                        {"learning_rate", t.learning_rate},
                        {"epochs", t.epochs},
                        {"batch_size", t.batch_size},
                        {"l2", t.l2}};
  };
  j["stage1"] = stage(c.stage1);
  j["stage2"] = stage(c.stage2);
  return j.dump(2);
}

struct PreparedTask {
  Dataset ds;
  TaskSplit split;
  split::AuditReport audit;
  encode::EncodedDataset encoded;
};

PreparedTask prepare(const Dataset &generated, std::uint64_t seed, const ReproduceOptions &opts,
                     const Artifacts &art, const std::filesystem::path &dir) {
  const auto name = std::string(to_string(generated.task));
  const std::string raw = serialize_dataset(generated);
  art.write(dir / (name + ".raw.jsonl"), raw);

  // clean
  auto loaded = parse_dataset(raw, generated.task);
  art.write(dir / (name + ".clean.jsonl"), serialize_dataset(loaded.dataset));
  art.write(dir / (name + ".clean.report.json"), clean_report(loaded, opts.effective_config));

  PreparedTask out;
  out.ds = std::move(loaded.dataset);

  // split
  SplitOptions so;
  so.k = opts.cfg.k;
  so.prefix_n = opts.cfg.prefix_n;
  so.seed = seed;
  out.split = split_task(out.ds, so);
  if (opts.inject_leak)
    inject_leak(out.split.folds, out.split.groups, so.k);
  art.write(dir / (name + ".folds.jsonl"), split::serialize_assignment(out.split.assignment,
                                                                       out.split.meta));
  art.write(dir / (name + ".record_folds.jsonl"),
            split::serialize_record_folds(out.split.folds, out.ds));

  // audit, recomputing groups from the cleaned records
  const auto groups = regroup(out.ds, out.split.meta);
  out.audit = split::audit(out.split.folds, so.k, out.ds, groups, out.split.meta.mode);
  art.write(dir / (name + ".audit.json"), split::audit_to_json(out.audit));
  if (!out.audit.clean())
    throw Error(ErrorCode::LeakageDetected,
                name + " fold assignment leaks " + std::to_string(out.audit.leakage_violations.size()) +
                    " group(s) across folds (seed " + std::to_string(seed) + ")");

  // encode
  encode::IdentityProvider identity;
  out.encoded = encode::encode_dataset(out.ds, identity, opts.cfg.featurizer, 1);
  if (opts.write_encoded)
    art.write(dir / (name + ".encoded.jsonl"), encode::serialize_encoded(out.encoded));
  return out;
}

void write_direction(const DirectionResult &r, const Artifacts &art,
                     const std::filesystem::path &dir) {
  if (!art.enabled())
    return;
  const auto task = std::string(to_string(r.target));
  const auto sub = dir / ("target-" + task);
  art.write(sub / "stage1.ckpt", model::serialize_checkpoint(r.stage1));
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    const auto tag = "fold" + std::to_string(f);
    const auto &run = r.folds[f];
    art.write(sub / (tag + ".direct.ckpt"), model::serialize_checkpoint(run.direct));
    art.write(sub / (tag + ".tapt.ckpt"), model::serialize_checkpoint(run.tapt));
    art.write(sub / (tag + ".direct.pred.jsonl"), model::serialize_predictions(run.direct_pred));
    art.write(sub / (tag + ".tapt.pred.jsonl"), model::serialize_predictions(run.tapt_pred));
  }
  art.write(sub / "direct.report.txt", metrics::report_text(r.direct, task + " direct"));
  art.write(sub / "direct.report.txt.jsonl", metrics::report_jsonl(r.direct, task));
  art.write(sub / "tapt.report.txt", metrics::report_text(r.tapt, task + " tapt"));
  art.write(sub / "tapt.report.txt.jsonl", metrics::report_jsonl(r.tapt, task));
}

double f1avg(const metrics::FoldSummary &qc, const metrics::FoldSummary &qi) {
  return metrics::f1_average(qc.mean_f1, qi.mean_f1);
}

std::string check_line(bool ok, const std::string &what) {
  return std::string(ok ? "PASS " : "FAIL ") + what + "\n";
}

} // namespace

ReproduceResult reproduce(const ReproduceOptions &opts) {
  if (opts.replicates < 1)
    throw Error(ErrorCode::InvalidArgument, "replicates must be >= 1");
  const Artifacts art(opts.workdir);
  ReproduceResult result;

  std::string body;
  for (std::size_t rep = 0; rep < opts.replicates; ++rep) {
    const std::uint64_t seed = opts.seed + rep;
    const Artifacts rep_art(rep == 0 ? opts.workdir : std::filesystem::path());
    for (double overlap : {1.0, 0.0}) {
      const auto dir = std::filesystem::path(rho_name(overlap));
      auto spec = opts.cfg.synth;
      spec.overlap = overlap;
      const auto pair = gen_synthetic(spec, seed);
      const auto qc = prepare(pair.aux, seed, opts, rep_art, dir);
      const auto qi = prepare(pair.target, seed, opts, rep_art, dir);

      const auto to_qi = run_direction(qc.encoded, qi.encoded, qi.split.folds, opts.cfg, seed);
      write_direction(to_qi, rep_art, dir);
      const auto to_qc = run_direction(qi.encoded, qc.encoded, qc.split.folds, opts.cfg, seed);
      write_direction(to_qc, rep_art, dir);

      ArmSummary arm;
      arm.seed = seed;
      arm.overlap = overlap;
      arm.qc_direct = to_qc.direct;
      arm.qc_tapt = to_qc.tapt;
      arm.qi_direct = to_qi.direct;
      arm.qi_tapt = to_qi.tapt;
      arm.qc_violations = qc.audit.leakage_violations.size();
      arm.qi_violations = qi.audit.leakage_violations.size();
      result.arms.push_back(arm);

      const auto head = "seed " + std::to_string(seed) + " " + rho_name(overlap);
      body += "\n## " + head + "\n";
      body += metrics::report_text(arm.qc_direct, "qc direct");
      body += metrics::report_text(arm.qc_tapt, "qc tapt");
      body += metrics::report_text(arm.qi_direct, "qi direct");
      body += metrics::report_text(arm.qi_tapt, "qi tapt");
      body += "F1avg direct " + fmt("%.4f", f1avg(arm.qc_direct, arm.qi_direct)) + " tapt " +
              fmt("%.4f", f1avg(arm.qc_tapt, arm.qi_tapt)) + "\n";
      if (rep == 0)
        art.write(dir / "f1avg.txt",
                  "direct " + fmt("%.6f", f1avg(arm.qc_direct, arm.qi_direct)) + "\ntapt " +
                      fmt("%.6f", f1avg(arm.qc_tapt, arm.qi_tapt)) + "\n");
    }
  }

  // Mean TAPT delta per (overlap, task) across replicates.
  struct Acc {
    double qc = 0.0, qi = 0.0;
    std::size_t n = 0;
  };
  std::map<double, Acc> deltas;
  std::size_t violations = 0;
  for (const auto &a : result.arms) {
    auto &d = deltas[a.overlap];
    d.qc += a.qc_tapt.mean_f1 - a.qc_direct.mean_f1;
    d.qi += a.qi_tapt.mean_f1 - a.qi_direct.mean_f1;
    ++d.n;
    violations += a.qc_violations + a.qi_violations;
  }

  std::string checks;
  bool ok = true;
  auto check = [&](bool pass, const std::string &what) {
    ok = ok && pass;
    checks += check_line(pass, what);
  };
  check(violations == 0, "no group spans two folds (" + std::to_string(result.arms.size() * 2) +
                             " audits, " + std::to_string(violations) + " violations)");
  for (const auto &[overlap, d] : deltas) {
    const double n = static_cast<double>(d.n);
    for (auto [task, sum] : {std::pair{"qc", d.qc}, std::pair{"qi", d.qi}}) {
      const double mean = sum / n;
      if (overlap == 1.0)
        check(mean >= 0.02, std::string("TAPT delta ") + task + " " + rho_name(overlap) + " " +
                                fmt("%+.4f", mean) + " >= +0.02");
      else
        check(std::fabs(mean) <= 0.05, std::string("TAPT delta ") + task + " " +
                                           rho_name(overlap) + " " + fmt("%+.4f", mean) +
                                           " within +-0.05");
    }
  }

  std::string report;
  report += "# relsplit reproduce\n";
  report += "seed " + std::to_string(opts.seed) + ", replicates " +
            std::to_string(opts.replicates) + ", k " + std::to_string(opts.cfg.k) +
            ", target limit " + std::to_string(opts.cfg.target_limit) + "\n";
  report += "\n## effective config\n" + opts.effective_config;
  report += effective_experiment(opts.cfg) + "\n";
  report += "\n## checks\n" + checks;
  report += body;
  result.report = report;
  result.checks_passed = ok;
  art.write("report.txt", report);
  return result;
}

} // namespace relsplit::pipeline
