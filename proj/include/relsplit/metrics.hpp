#ifndef RELSPLIT_METRICS_HPP
#define RELSPLIT_METRICS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace relsplit::metrics {

/// Exact non-negative rational, kept in lowest terms. Positive-class F1 is
/// 2tp / (2tp + fp + fn), so scores can be averaged without binary rounding.
class Ratio {
public:
  Ratio() = default;
  Ratio(std::int64_t num, std::int64_t den);

  /// Parses a plain decimal such as "0.8936" exactly.
  static Ratio from_decimal(std::string_view s);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  /// Correctly rounded for |num|, den < 2^53.
  double to_double() const;

  friend Ratio operator+(const Ratio &a, const Ratio &b);
  friend Ratio operator*(const Ratio &a, const Ratio &b);
  bool operator==(const Ratio &) const = default;

private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts &operator+=(const ConfusionCounts &o);
  bool operator==(const ConfusionCounts &) const = default;
};

struct TaskMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Ratio f1_exact;
  std::uint64_t support_positive = 0;
};

using LabeledIds = std::vector<std::pair<std::string, int>>;

/// Positive class = 1. Throws IdMismatch (listing the symmetric difference)
/// unless both sides cover the same ids, and OutOfRange for labels outside
/// {0, 1}.
ConfusionCounts confusion(const LabeledIds &preds, const LabeledIds &truths);

/// Precision, recall and F1 of the positive class; each is 0 when its
/// denominator is 0.
TaskMetrics f1_positive(const ConfusionCounts &c);

/// 0.5 * qc + 0.5 * qi. Throws OutOfRange for inputs outside [0, 1].
double f1_average(double f1_qc, double f1_qi);
Ratio f1_average(const Ratio &f1_qc, const Ratio &f1_qi);

/// Per-fold scores with mean +- sample standard deviation, best fold and the
/// pooled (micro) counts.
struct FoldSummary {
  std::map<std::size_t, ConfusionCounts> folds;
  std::map<std::size_t, TaskMetrics> per_fold;
  ConfusionCounts pooled_counts;
  TaskMetrics pooled;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  std::size_t best_fold = 0;
  double best_f1 = 0.0;
};

FoldSummary summarize(const std::map<std::size_t, ConfusionCounts> &folds);

/// Human-readable report.
std::string report_text(const FoldSummary &s, std::string_view title);
/// One JSON object per fold, then a "summary" line.
std::string report_jsonl(const FoldSummary &s, std::string_view task);
FoldSummary parse_report_jsonl(std::string_view text, std::string *task = nullptr);

} // namespace relsplit::metrics

#endif // RELSPLIT_METRICS_HPP
