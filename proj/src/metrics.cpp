#include "relsplit/metrics.hpp"

#include "relsplit/binio.hpp"
#include "relsplit/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

namespace relsplit::metrics {

using ordered_json = nlohmann::ordered_json;

namespace {

std::int64_t checked(__int128 v) {
  if (v > INT64_MAX || v < INT64_MIN)
    throw Error(ErrorCode::OutOfRange, "rational overflow");
  return static_cast<std::int64_t>(v);
}

} // namespace

Ratio::Ratio(std::int64_t num, std::int64_t den) {
  if (den == 0)
    throw Error(ErrorCode::OutOfRange, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = g ? num / g : 0;
  den_ = g ? den / g : 1;
}

Ratio Ratio::from_decimal(std::string_view s) {
  std::int64_t num = 0, den = 1;
  bool seen_point = false, any_digit = false;
  for (char c : s) {
    if (c == '.' && !seen_point) {
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9')
      throw Error(ErrorCode::InvalidArgument, "not a plain decimal: " + std::string(s));
    any_digit = true;
    num = checked(static_cast<__int128>(num) * 10 + (c - '0'));
    if (seen_point)
      den = checked(static_cast<__int128>(den) * 10);
  }
  if (!any_digit)
    throw Error(ErrorCode::InvalidArgument, "not a plain decimal: " + std::string(s));
  return Ratio(num, den);
}

double Ratio::to_double() const {
  return static_cast<double>(num_) / static_cast<double>(den_);
}

Ratio operator+(const Ratio &a, const Ratio &b) {
  const __int128 num = static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_;
  const __int128 den = static_cast<__int128>(a.den_) * b.den_;
  // Reduce in 128 bits before narrowing.
  __int128 x = num < 0 ? -num : num, y = den;
  while (y != 0) {
    const __int128 t = x % y;
    x = y;
    y = t;
  }
  const __int128 g = x == 0 ? 1 : x;
  return Ratio(checked(num / g), checked(den / g));
}

Ratio operator*(const Ratio &a, const Ratio &b) {
  const std::int64_t g1 = std::gcd(a.num_, b.den_) ? std::gcd(a.num_, b.den_) : 1;
  const std::int64_t g2 = std::gcd(b.num_, a.den_) ? std::gcd(b.num_, a.den_) : 1;
  return Ratio(checked(static_cast<__int128>(a.num_ / g1) * (b.num_ / g2)),
               checked(static_cast<__int128>(a.den_ / g2) * (b.den_ / g1)));
}

ConfusionCounts &ConfusionCounts::operator+=(const ConfusionCounts &o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(const LabeledIds &preds, const LabeledIds &truths) {
  std::map<std::string, int> truth;
  for (const auto &[id, label] : truths) {
    if (label != 0 && label != 1)
      throw Error(ErrorCode::OutOfRange, "truth label for " + id + " is not 0/1");
    if (!truth.emplace(id, label).second)
      throw Error(ErrorCode::IdMismatch, "duplicate truth id " + id);
  }
  std::map<std::string, int> pred;
  for (const auto &[id, label] : preds) {
    if (label != 0 && label != 1)
      throw Error(ErrorCode::OutOfRange, "predicted label for " + id + " is not 0/1");
    if (!pred.emplace(id, label).second)
      throw Error(ErrorCode::IdMismatch, "duplicate prediction id " + id);
  }

  std::vector<std::string> diff;
  for (const auto &[id, _] : pred)
    if (!truth.count(id))
      diff.push_back(id);
  for (const auto &[id, _] : truth)
    if (!pred.count(id))
      diff.push_back(id);
  if (!diff.empty()) {
    std::string msg = std::to_string(diff.size()) + " ids not in both sets:";
    for (std::size_t i = 0; i < diff.size() && i < 20; ++i)
      msg += " " + diff[i];
    if (diff.size() > 20)
      msg += " ...";
    throw Error(ErrorCode::IdMismatch, msg);
  }

  ConfusionCounts c;
  for (const auto &[id, p] : pred) {
    const int t = truth.at(id);
    if (p == 1 && t == 1)
      ++c.tp;
    else if (p == 1)
      ++c.fp;
    else if (t == 1)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

TaskMetrics f1_positive(const ConfusionCounts &c) {
  TaskMetrics m;
  m.support_positive = c.tp + c.fn;
  if (c.tp + c.fp > 0)
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0)
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  // 2pr/(p+r) reduces to 2tp/(2tp+fp+fn); both vanish when tp = 0.
  if (c.tp > 0)
    m.f1_exact = Ratio(static_cast<std::int64_t>(2 * c.tp),
                       static_cast<std::int64_t>(2 * c.tp + c.fp + c.fn));
  m.f1 = m.f1_exact.to_double();
  return m;
}

double f1_average(double f1_qc, double f1_qi) {
  for (double v : {f1_qc, f1_qi})
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorCode::OutOfRange, "F1 must lie in [0, 1]");
  return 0.5 * f1_qc + 0.5 * f1_qi;
}

Ratio f1_average(const Ratio &f1_qc, const Ratio &f1_qi) {
  for (const Ratio &v : {f1_qc, f1_qi})
    if (v.num() < 0 || v.num() > v.den())
      throw Error(ErrorCode::OutOfRange, "F1 must lie in [0, 1]");
  const Ratio half(1, 2);
  return half * f1_qc + half * f1_qi;
}

FoldSummary summarize(const std::map<std::size_t, ConfusionCounts> &folds) {
  FoldSummary s;
  s.folds = folds;
  std::vector<double> f1s;
  for (const auto &[fold, c] : folds) {
    s.pooled_counts += c;
    const auto m = f1_positive(c);
    s.per_fold[fold] = m;
    f1s.push_back(m.f1);
    if (f1s.size() == 1 || m.f1 > s.best_f1) {
      s.best_fold = fold;
      s.best_f1 = m.f1;
    }
  }
  s.pooled = f1_positive(s.pooled_counts);
  if (!f1s.empty()) {
    s.mean_f1 = std::accumulate(f1s.begin(), f1s.end(), 0.0) / static_cast<double>(f1s.size());
    if (f1s.size() > 1) {
      double ss = 0.0;
      for (double v : f1s)
        ss += (v - s.mean_f1) * (v - s.mean_f1);
      s.std_f1 = std::sqrt(ss / static_cast<double>(f1s.size() - 1));
    }
  }
  return s;
}

namespace {
std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
} // namespace

std::string report_text(const FoldSummary &s, std::string_view title) {
  std::string out;
  out += "# " + std::string(title) + "\n";
  out += "fold  tp  fp  tn  fn  precision  recall  f1\n";
  for (const auto &[fold, c] : s.folds) {
    const auto &m = s.per_fold.at(fold);
    out += std::to_string(fold) + "  " + std::to_string(c.tp) + "  " + std::to_string(c.fp) +
           "  " + std::to_string(c.tn) + "  " + std::to_string(c.fn) + "  " +
           fmt("%.4f", m.precision) + "  " + fmt("%.4f", m.recall) + "  " + fmt("%.4f", m.f1) +
           "\n";
  }
  out += "mean_f1 " + fmt("%.4f", s.mean_f1) + " +- " + fmt("%.4f", s.std_f1) + "\n";
  out += "best_fold " + std::to_string(s.best_fold) + " f1 " + fmt("%.4f", s.best_f1) + "\n";
  out += "pooled precision " + fmt("%.4f", s.pooled.precision) + " recall " +
         fmt("%.4f", s.pooled.recall) + " f1 " + fmt("%.4f", s.pooled.f1) + "\n";
  return out;
}

std::string report_jsonl(const FoldSummary &s, std::string_view task) {
  std::string out;
  for (const auto &[fold, c] : s.folds) {
    const auto &m = s.per_fold.at(fold);
    ordered_json j;
    j["task"] = task;
    j["fold"] = fold;
    j["tp"] = c.tp;
    j["fp"] = c.fp;
    j["tn"] = c.tn;
    j["fn"] = c.fn;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    out += j.dump() + "\n";
  }
  ordered_json sum;
  sum["task"] = task;
  sum["summary"] = true;
  sum["mean_f1"] = s.mean_f1;
  sum["std_f1"] = s.std_f1;
  sum["best_fold"] = s.best_fold;
  sum["best_f1"] = s.best_f1;
  sum["pooled_f1"] = s.pooled.f1;
  sum["pooled_f1_exact"] = {s.pooled.f1_exact.num(), s.pooled.f1_exact.den()};
  out += sum.dump() + "\n";
  return out;
}

FoldSummary parse_report_jsonl(std::string_view text, std::string *task) {
  std::map<std::size_t, ConfusionCounts> folds;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty())
      continue;
    try {
      const auto j = ordered_json::parse(lines[i]);
      if (task)
        *task = j.value("task", "");
      if (j.value("summary", false))
        continue;
      ConfusionCounts c;
      c.tp = j.at("tp").get<std::uint64_t>();
      c.fp = j.at("fp").get<std::uint64_t>();
      c.tn = j.at("tn").get<std::uint64_t>();
      c.fn = j.at("fn").get<std::uint64_t>();
      folds[j.at("fold").get<std::size_t>()] = c;
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::ParseError, "report line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (folds.empty())
    throw Error(ErrorCode::ParseError, "report has no fold lines");
  return summarize(folds);
}

} // namespace relsplit::metrics
