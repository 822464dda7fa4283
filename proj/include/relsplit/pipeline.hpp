#ifndef RELSPLIT_PIPELINE_HPP
#define RELSPLIT_PIPELINE_HPP

// End-to-end experiment on synthetic data: synth -> clean -> split -> audit
// -> encode -> {direct, TAPT} per fold -> eval -> eval-avg.

#include "relsplit/corpus.hpp"
#include "relsplit/encode.hpp"
#include "relsplit/metrics.hpp"
#include "relsplit/model.hpp"
#include "relsplit/splitkit.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace relsplit::pipeline {

struct ExperimentConfig {
  SynthSpec synth;
  std::size_t k = 5;
  std::size_t prefix_n = 2;
  std::size_t target_limit = 50; // 0 keeps every training record
  encode::FeaturizerConfig featurizer;
  model::TrainConfig stage1;
  model::TrainConfig stage2;
  double threshold = 0.5;
  bool tune_threshold = false;
  unsigned threads = 1;

  /// Settings used by `reproduce`: long constant-rate SGD so both arms fit
  /// the small target set, with stage 1 lightly regularized.
  static ExperimentConfig desk();
};

/// JSON summary of a load (kept/dropped counts, languages).
std::string clean_report(const LoadResult &r, std::string_view effective_config);

struct SplitOptions {
  std::size_t k = 5;
  std::size_t prefix_n = 2;
  std::uint64_t seed = 0;
  bool raw_query = false;
  std::optional<split::GroupKind> group; // default: by task
  split::AssignOptions assign;
  std::string delimiter{kDefaultPathDelimiter};
};

struct TaskSplit {
  split::Groups groups;
  split::SplitMeta meta;
  split::FoldAssignment assignment;
  split::RecordFolds folds;
};

/// Query grouping for QI, category-prefix grouping for QC unless overridden.
TaskSplit split_task(const Dataset &ds, const SplitOptions &opts);

/// Regroups `ds` the way `meta` describes.
split::Groups regroup(const Dataset &ds, const split::SplitMeta &meta,
                      std::string_view delimiter = kDefaultPathDelimiter);

/// Moves one record of the first multi-record group to the next fold.
/// Returns false when every group is a singleton.
bool inject_leak(split::RecordFolds &folds, const split::Groups &groups, std::size_t k);

struct FoldRun {
  model::Checkpoint direct, tapt;
  std::vector<model::Prediction> direct_pred, tapt_pred;
  metrics::ConfusionCounts direct_counts, tapt_counts;
  double direct_threshold = 0.5, tapt_threshold = 0.5;
};

struct DirectionResult {
  TaskKind target = TaskKind::QueryItem;
  model::Checkpoint stage1;
  std::vector<FoldRun> folds;
  metrics::FoldSummary direct, tapt;

  double delta() const { return tapt.mean_f1 - direct.mean_f1; }
};

/// Trains stage 1 on all of `aux`, then per held-out fold of `target` a
/// direct model and a TAPT model on the same (limited) training subset.
DirectionResult run_direction(const encode::EncodedDataset &aux,
                              const encode::EncodedDataset &target,
                              const split::RecordFolds &target_folds,
                              const ExperimentConfig &cfg, std::uint64_t seed);

struct ReproduceOptions {
  std::uint64_t seed = 7;
  std::size_t replicates = 5;
  std::filesystem::path workdir;
  bool inject_leak = false;
  bool write_encoded = false;
  ExperimentConfig cfg = ExperimentConfig::desk();
  std::string effective_config;
};

struct ArmSummary {
  std::uint64_t seed = 0;
  double overlap = 0.0;
  metrics::FoldSummary qc_direct, qc_tapt, qi_direct, qi_tapt;
  std::size_t qc_violations = 0, qi_violations = 0;
};

struct ReproduceResult {
  std::vector<ArmSummary> arms;
  std::string report;
  bool checks_passed = false;
};

/// Writes artifacts for the first replicate under opts.workdir plus
/// `report.txt`. Throws LeakageDetected when an audit finds violations.
ReproduceResult reproduce(const ReproduceOptions &opts);

} // namespace relsplit::pipeline

#endif // RELSPLIT_PIPELINE_HPP
