#ifndef RELSPLIT_TESTS_SUPPORT_HPP
#define RELSPLIT_TESTS_SUPPORT_HPP

#include "relsplit/corpus.hpp"
#include "relsplit/error.hpp"
#include "relsplit/rng.hpp"
#include "relsplit/splitkit.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <set>
#include <filesystem>
#include <optional>
#include <map>
#include <string>
#include <unistd.h>
#include <vector>

namespace testing {

class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("relsplit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline relsplit::Record rec(std::string id, relsplit::TaskKind task, std::string query,
                            std::string target, std::string lang = "en",
                            std::optional<int> label = 1) {
  auto r = relsplit::make_record(std::move(id), task, std::move(query), std::move(target),
                                 std::move(lang), label);
  if (!r)
    throw relsplit::Error(relsplit::ErrorCode::InvalidArgument, "test record cleans to nothing");
  return *r;
}

template <typename F> relsplit::ErrorCode code_of(F &&f) {
  try {
    f();
  } catch (const relsplit::Error &e) {
    return e.code();
  }
  throw std::logic_error("expected relsplit::Error");
}

/// QI dataset of `n_groups` query groups with random sizes in [1, max_size]
/// and random (language, label) per record.
inline relsplit::Dataset random_grouped(std::mt19937_64 &eng, std::size_t n_groups,
                                        std::size_t max_size, std::size_t n_languages = 3,
                                        double positive_rate = 0.4) {
  static const char *langs[] = {"en", "es", "tr", "de", "fr", "ar"};
  relsplit::Dataset ds;
  ds.task = relsplit::TaskKind::QueryItem;
  std::size_t next = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const auto size = 1 + relsplit::uniform_index(eng, max_size);
    for (std::uint64_t i = 0; i < size; ++i) {
      const auto lang = langs[relsplit::uniform_index(eng, n_languages)];
      const int label = relsplit::bernoulli(eng, positive_rate) ? 1 : 0;
      ds.push_back(rec("r" + std::to_string(next++), relsplit::TaskKind::QueryItem,
                       "query " + std::to_string(g), "item " + std::to_string(i), lang, label));
    }
  }
  return ds;
}

/// The stratification objective written out directly from its definition:
/// sum over folds and strata of (fold share - global share)^2 plus
/// (fold size - mean size)^2 / mean size. Empty folds add only the size term.
inline double reference_objective(const relsplit::Dataset &ds, const relsplit::split::Groups &groups,
                                  const std::map<relsplit::split::GroupKey, std::size_t> &fold_of,
                                  std::size_t k) {
  std::map<std::string, std::size_t> fold_of_record;
  for (const auto &[key, ids] : groups)
    for (const auto &id : ids)
      fold_of_record[id] = fold_of.at(key);
  std::set<std::string> languages;
  for (const auto &r : ds.records)
    languages.insert(r.language);
  std::vector<std::map<std::pair<std::string, int>, double>> counts(k);
  std::vector<double> totals(k, 0.0);
  std::map<std::pair<std::string, int>, double> global;
  for (const auto &r : ds.records) {
    const auto f = fold_of_record.at(r.id);
    counts[f][{r.language, *r.label}] += 1;
    totals[f] += 1;
    global[{r.language, *r.label}] += 1;
  }
  const double n = static_cast<double>(ds.size());
  const double mean = n / static_cast<double>(k);
  double j = 0.0;
  for (std::size_t f = 0; f < k; ++f) {
    if (totals[f] > 0)
      for (const auto &lang : languages)
        for (int label : {0, 1}) {
          const std::pair<std::string, int> s{lang, label};
          const double fold_share = counts[f].count(s) ? counts[f].at(s) / totals[f] : 0.0;
          const double global_share = global.count(s) ? global.at(s) / n : 0.0;
          j += (fold_share - global_share) * (fold_share - global_share);
        }
    j += (totals[f] - mean) * (totals[f] - mean) / mean;
  }
  return j;
}

/// Minimum of reference_objective over all k^groups assignments.
inline double brute_force_minimum(const relsplit::Dataset &ds, const relsplit::split::Groups &groups,
                                  std::size_t k) {
  std::vector<relsplit::split::GroupKey> keys;
  for (const auto &[key, ids] : groups)
    keys.push_back(key);
  std::size_t combos = 1;
  for (std::size_t i = 0; i < keys.size(); ++i)
    combos *= k;
  double best = std::numeric_limits<double>::infinity();
  std::map<relsplit::split::GroupKey, std::size_t> fold_of;
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c;
    for (const auto &key : keys) {
      fold_of[key] = rest % k;
      rest /= k;
    }
    best = std::min(best, reference_objective(ds, groups, fold_of, k));
  }
  return best;
}

} // namespace testing

#endif
