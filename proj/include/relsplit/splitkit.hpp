#ifndef RELSPLIT_SPLITKIT_HPP
#define RELSPLIT_SPLITKIT_HPP

#include "relsplit/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace relsplit::split {

enum class GroupKind { QueryText, CategoryPrefix };

std::string_view to_string(GroupKind kind);
GroupKind parse_group_kind(std::string_view s);

struct GroupKey {
  GroupKind kind = GroupKind::QueryText;
  std::string key;

  auto operator<=>(const GroupKey &) const = default;
};

using Groups = std::map<GroupKey, std::vector<std::string>>;

/// Stratification cell. In marginal mode one of the two coordinates is
/// blanked out (language "" or label -1) and every record contributes to both
/// a language cell and a label cell.
struct StratumKey {
  std::string language;
  int label = 0;

  auto operator<=>(const StratumKey &) const = default;
};

using Strata = std::map<std::string, StratumKey>;

enum class StratifyMode { Joint, Marginal };

/// Partition of record ids by exact (cleaned, or raw if `raw_text`) query.
Groups group_by_query(const Dataset &ds, bool raw_text = false);

/// Partition by the first min(n, depth) category segments. Parse failures are
/// rethrown with the record id.
Groups group_by_category_prefix(const Dataset &ds, std::size_t n,
                                std::string_view delimiter = kDefaultPathDelimiter);

/// record id -> (language, label). Throws InvalidArgument on unlabeled records.
Strata strata_of(const Dataset &ds);

struct AssignOptions {
  StratifyMode mode = StratifyMode::Joint;
  /// Seeded random restarts of the greedy pass; 0 keeps the result
  /// seed-independent.
  std::size_t restarts = 0;
  /// Single-group move/swap descent after the greedy pass.
  bool refine = true;
};

struct FoldAssignment {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::map<GroupKey, std::size_t> group_to_fold;
  double objective_value = 0.0;
  /// per_fold_stats[f][stratum] = record count.
  std::vector<std::map<StratumKey, std::size_t>> per_fold_stats;

  bool operator==(const FoldAssignment &) const = default;
};

/// Objective evaluated on fixed per-group stratum counts. Exposed so that the
/// tests can enumerate assignments against the same definition.
class FoldObjective {
public:
  /// group_counts[g][s] is the number of stratum-s cells in group g;
  /// group_totals[g] its record count.
  FoldObjective(std::vector<std::vector<double>> group_counts, std::vector<double> group_totals,
                std::size_t k);

  std::size_t groups() const { return counts_.size(); }
  std::size_t strata() const { return global_.size(); }
  std::size_t k() const { return k_; }

  /// J for a full group -> fold vector.
  double evaluate(const std::vector<std::size_t> &fold_of) const;

  const std::vector<std::vector<double>> &group_counts() const { return counts_; }
  const std::vector<double> &global_fraction() const { return global_; }
  double mean_fold_total() const { return mean_total_; }
  const std::vector<double> &group_totals() const { return totals_; }

private:
  std::vector<std::vector<double>> counts_; // [group][stratum]
  std::vector<double> totals_;              // records per group
  std::vector<double> global_;              // global stratum fractions
  double mean_total_ = 0.0;
  std::size_t k_ = 0;
};

/// Divergence contributed by one fold with the given stratum counts. An empty
/// fold contributes only through the balance term.
double fold_term(const std::vector<double> &fold_counts, double fold_total,
                 const std::vector<double> &global_fraction, double mean_total);

/// Greedy leakage-free stratified assignment (see README for the objective).
FoldAssignment assign_folds(const Groups &groups, const Strata &strata, std::size_t k,
                            std::uint64_t seed, const AssignOptions &opts = {});

/// record id -> fold.
using RecordFolds = std::map<std::string, std::size_t>;

/// Expands a group assignment to records. Throws CoverageError for groups the
/// assignment does not mention.
RecordFolds record_folds(const FoldAssignment &a, const Groups &groups);

struct LeakageViolation {
  GroupKey group;
  std::set<std::size_t> folds;

  bool operator==(const LeakageViolation &) const = default;
};

struct AuditReport {
  std::size_t k = 0;
  std::vector<LeakageViolation> leakage_violations;
  std::vector<double> per_fold_label_rate;
  std::vector<std::map<std::string, std::size_t>> per_fold_language_histogram;
  std::vector<std::size_t> fold_sizes;
  double global_label_rate = 0.0;
  std::map<std::string, double> global_language_share;
  double divergence = 0.0;

  bool clean() const { return leakage_violations.empty(); }
};

/// Recomputes each group's fold span from the per-record folds.
AuditReport audit(const RecordFolds &folds, std::size_t k, const Dataset &ds,
                  const Groups &groups, StratifyMode mode = StratifyMode::Joint);
AuditReport audit(const FoldAssignment &a, const Dataset &ds, const Groups &groups,
                  StratifyMode mode = StratifyMode::Joint);

std::string audit_to_json(const AuditReport &r);

/// Metadata persisted with an assignment so audit can regroup the data.
struct SplitMeta {
  GroupKind kind = GroupKind::QueryText;
  std::size_t prefix_n = 2;
  bool raw_query = false;
  StratifyMode mode = StratifyMode::Joint;
};

std::string serialize_assignment(const FoldAssignment &a, const SplitMeta &meta);
std::pair<FoldAssignment, SplitMeta> parse_assignment(std::string_view text);

/// Per-record folds in dataset order.
std::string serialize_record_folds(const RecordFolds &folds, const Dataset &ds);
RecordFolds parse_record_folds(std::string_view text);

} // namespace relsplit::split

#endif // RELSPLIT_SPLITKIT_HPP
