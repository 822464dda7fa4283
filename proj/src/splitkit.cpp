#include "relsplit/splitkit.hpp"

#include "relsplit/binio.hpp"
#include "relsplit/error.hpp"
#include "relsplit/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>

namespace relsplit::split {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(GroupKind kind) {
  return kind == GroupKind::QueryText ? "query_text" : "category_prefix";
}

GroupKind parse_group_kind(std::string_view s) {
  if (s == "query_text")
    return GroupKind::QueryText;
  if (s == "category_prefix")
    return GroupKind::CategoryPrefix;
  throw Error(ErrorCode::ParseError, "unknown group kind '" + std::string(s) + "'");
}

Groups group_by_query(const Dataset &ds, bool raw_text) {
  Groups groups;
  for (const auto &r : ds.records)
    groups[{GroupKind::QueryText, raw_text ? r.query : r.cleaned_query}].push_back(r.id);
  return groups;
}

Groups group_by_category_prefix(const Dataset &ds, std::size_t n, std::string_view delimiter) {
  if (n < 1)
    throw Error(ErrorCode::InvalidArgument, "prefix length must be >= 1");
  Groups groups;
  for (const auto &r : ds.records) {
    CategoryPath path;
    try {
      path = parse_category_path(r.cleaned_target, delimiter);
    } catch (const Error &e) {
      throw Error(e.code(), "record " + r.id + ": " + e.detail());
    }
    groups[{GroupKind::CategoryPrefix, render_prefix(path, n)}].push_back(r.id);
  }
  return groups;
}

Strata strata_of(const Dataset &ds) {
  Strata strata;
  for (const auto &r : ds.records) {
    if (!r.label)
      throw Error(ErrorCode::InvalidArgument, "record " + r.id + " has no label to stratify on");
    strata[r.id] = {r.language, *r.label};
  }
  return strata;
}

namespace {

// Stratum cells a record falls into under the given mode.
std::vector<StratumKey> cells_of(const StratumKey &s, StratifyMode mode) {
  if (mode == StratifyMode::Joint)
    return {s};
  return {StratumKey{s.language, -1}, StratumKey{"", s.label}};
}

// Cross product of observed languages x {0,1} (joint) or the two marginal
// families.
std::vector<StratumKey> stratum_universe(const std::set<std::string> &languages,
                                         StratifyMode mode) {
  std::vector<StratumKey> out;
  if (mode == StratifyMode::Joint) {
    for (const auto &lang : languages)
      for (int label : {0, 1})
        out.push_back({lang, label});
  } else {
    for (const auto &lang : languages)
      out.push_back({lang, -1});
    out.push_back({"", 0});
    out.push_back({"", 1});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t index_of(const std::vector<StratumKey> &universe, const StratumKey &s) {
  auto it = std::lower_bound(universe.begin(), universe.end(), s);
  return static_cast<std::size_t>(it - universe.begin());
}

} // namespace

double fold_term(const std::vector<double> &fold_counts, double fold_total,
                 const std::vector<double> &global_fraction, double mean_total) {
  double div = 0.0;
  if (fold_total > 0.0) {
    for (std::size_t s = 0; s < fold_counts.size(); ++s) {
      const double d = fold_counts[s] / fold_total - global_fraction[s];
      div += d * d;
    }
  }
  const double dev = fold_total - mean_total;
  return div + (mean_total > 0.0 ? dev * dev / mean_total : 0.0);
}

FoldObjective::FoldObjective(std::vector<std::vector<double>> group_counts,
                             std::vector<double> group_totals, std::size_t k)
    : counts_(std::move(group_counts)), totals_(std::move(group_totals)), k_(k) {
  if (counts_.size() != totals_.size())
    throw Error(ErrorCode::InvalidArgument, "group counts and totals differ in length");
  const std::size_t n_strata = counts_.empty() ? 0 : counts_.front().size();
  global_.assign(n_strata, 0.0);
  double n_records = 0.0;
  for (std::size_t g = 0; g < counts_.size(); ++g) {
    for (std::size_t s = 0; s < n_strata; ++s)
      global_[s] += counts_[g][s];
    n_records += totals_[g];
  }
  if (n_records > 0.0)
    for (auto &v : global_)
      v /= n_records;
  mean_total_ = k_ > 0 ? n_records / static_cast<double>(k_) : 0.0;
}

double FoldObjective::evaluate(const std::vector<std::size_t> &fold_of) const {
  const std::size_t n_strata = global_.size();
  std::vector<std::vector<double>> fold_counts(k_, std::vector<double>(n_strata, 0.0));
  std::vector<double> fold_totals(k_, 0.0);
  for (std::size_t g = 0; g < counts_.size(); ++g) {
    for (std::size_t s = 0; s < n_strata; ++s)
      fold_counts[fold_of[g]][s] += counts_[g][s];
    fold_totals[fold_of[g]] += totals_[g];
  }
  double j = 0.0;
  for (std::size_t f = 0; f < k_; ++f)
    j += fold_term(fold_counts[f], fold_totals[f], global_, mean_total_);
  return j;
}

namespace {

// Incremental fold state shared by the greedy pass and the descent.
class FoldState {
public:
  explicit FoldState(const FoldObjective &obj)
      : obj_(&obj), counts_(obj.k(), std::vector<double>(obj.strata(), 0.0)),
        totals_(obj.k(), 0.0), terms_(obj.k(), 0.0),
        fold_of_(obj.groups(), kUnassigned) {
    for (std::size_t f = 0; f < obj.k(); ++f)
      terms_[f] = term_with(f, kNone, +1.0);
  }

  static constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  // Term of fold f after adding (sign = +1) or removing (sign = -1) group g.
  double term_with(std::size_t f, std::size_t g, double sign) const {
    if (g == kNone)
      return fold_term(counts_[f], totals_[f], obj_->global_fraction(), obj_->mean_fold_total());
    scratch_ = counts_[f];
    const auto &gc = obj_->group_counts()[g];
    for (std::size_t s = 0; s < scratch_.size(); ++s)
      scratch_[s] += sign * gc[s];
    return fold_term(scratch_, totals_[f] + sign * obj_->group_totals()[g],
                     obj_->global_fraction(), obj_->mean_fold_total());
  }

  // Term of fold f after removing group `out` and adding group `in`.
  double term_swapped(std::size_t f, std::size_t out, std::size_t in) const {
    scratch_ = counts_[f];
    const auto &oc = obj_->group_counts()[out];
    const auto &ic = obj_->group_counts()[in];
    for (std::size_t s = 0; s < scratch_.size(); ++s)
      scratch_[s] += ic[s] - oc[s];
    return fold_term(scratch_, totals_[f] - obj_->group_totals()[out] + obj_->group_totals()[in],
                     obj_->global_fraction(), obj_->mean_fold_total());
  }

  void apply(std::size_t g, std::size_t f, double sign) {
    const auto &gc = obj_->group_counts()[g];
    for (std::size_t s = 0; s < gc.size(); ++s)
      counts_[f][s] += sign * gc[s];
    totals_[f] += sign * obj_->group_totals()[g];
    terms_[f] = term_with(f, kNone, +1.0);
  }

  void place(std::size_t g, std::size_t f) {
    apply(g, f, +1.0);
    fold_of_[g] = f;
  }

  void move(std::size_t g, std::size_t to) {
    apply(g, fold_of_[g], -1.0);
    place(g, to);
  }

  // Greedy step: fold with the smallest increase in J, ties to the lowest index.
  void place_greedy(std::size_t g) {
    std::size_t best = 0;
    double best_delta = 0.0;
    for (std::size_t f = 0; f < obj_->k(); ++f) {
      const double delta = term_with(f, g, +1.0) - terms_[f];
      if (f == 0 || delta < best_delta) {
        best = f;
        best_delta = delta;
      }
    }
    place(g, best);
  }

  double objective() const {
    return std::accumulate(terms_.begin(), terms_.end(), 0.0);
  }

  // One sweep of single-group moves and (for small instances) pairwise swaps,
  // accepting strict improvements. Returns whether anything changed.
  bool improve(const std::vector<std::size_t> &order) {
    bool changed = false;
    const double tol = 1e-12;
    for (std::size_t g : order) {
      const std::size_t from = fold_of_[g];
      const double removed = term_with(from, g, -1.0) - terms_[from];
      std::size_t best = from;
      double best_delta = -tol;
      for (std::size_t f = 0; f < obj_->k(); ++f) {
        if (f == from)
          continue;
        const double delta = removed + term_with(f, g, +1.0) - terms_[f];
        if (delta < best_delta) {
          best = f;
          best_delta = delta;
        }
      }
      if (best != from) {
        move(g, best);
        changed = true;
      }
    }
    if (order.size() > kMaxSwapGroups)
      return changed;
    changed |= improve_pairs(order, tol);
    if (order.size() > kMaxPairMoveGroups)
      return changed;
    for (std::size_t a = 0; a < order.size(); ++a)
      for (std::size_t b = a + 1; b < order.size(); ++b)
        changed |= improve_pair_move(order[a], order[b], tol);
    return changed;
  }

  bool improve_pairs(const std::vector<std::size_t> &order, double tol) {
    bool changed = false;
    for (std::size_t a = 0; a < order.size(); ++a) {
      for (std::size_t b = a + 1; b < order.size(); ++b) {
        const std::size_t ga = order[a], gb = order[b];
        const std::size_t fa = fold_of_[ga], fb = fold_of_[gb];
        if (fa == fb)
          continue;
        const double delta = term_swapped(fa, ga, gb) - terms_[fa] +
                             term_swapped(fb, gb, ga) - terms_[fb];
        if (delta < -tol) {
          move(ga, fb);
          move(gb, fa);
          changed = true;
        }
      }
    }
    return changed;
  }

  // Moves groups a and b together to any pair of folds.
  bool improve_pair_move(std::size_t a, std::size_t b, double tol) {
    const double before = objective();
    const std::size_t fa = fold_of_[a], fb = fold_of_[b];
    double best = before - tol;
    std::size_t best_a = fa, best_b = fb;
    for (std::size_t ta = 0; ta < obj_->k(); ++ta) {
      move(a, ta);
      for (std::size_t tb = 0; tb < obj_->k(); ++tb) {
        if (ta == fa || tb == fb)
          continue;
        move(b, tb);
        if (const double j = objective(); j < best) {
          best = j;
          best_a = ta;
          best_b = tb;
        }
      }
      move(b, fb);
    }
    move(a, best_a);
    move(b, best_b);
    return best_a != fa || best_b != fb;
  }

  const std::vector<std::size_t> &fold_of() const { return fold_of_; }

private:
  static constexpr std::size_t kMaxSwapGroups = 512;
  static constexpr std::size_t kMaxPairMoveGroups = 24;

  const FoldObjective *obj_;
  std::vector<std::vector<double>> counts_;
  std::vector<double> totals_;
  std::vector<double> terms_;
  std::vector<std::size_t> fold_of_;
  mutable std::vector<double> scratch_;
};

constexpr std::size_t kMaxKickGroups = 64;
constexpr std::size_t kMaxPairKickCells = 40; // groups x folds

std::pair<std::vector<std::size_t>, double> run_pass(const FoldObjective &obj,
                                                     const std::vector<std::size_t> &order,
                                                     bool refine) {
  FoldState state(obj);
  for (std::size_t g : order)
    state.place_greedy(g);
  if (!refine)
    return {state.fold_of(), state.objective()};
  auto descend = [&](FoldState &s) {
    for (int sweep = 0; sweep < 100 && s.improve(order); ++sweep) {
    }
  };
  descend(state);
  // Iterated descent on small instances: push each group to every other fold,
  // descend again, keep strict improvements.
  if (order.size() <= kMaxKickGroups) {
    for (int round = 0; round < 20; ++round) {
      bool improved = false;
      for (std::size_t g : order)
        for (std::size_t f = 0; f < obj.k(); ++f) {
          if (f == state.fold_of()[g])
            continue;
          FoldState trial = state;
          trial.move(g, f);
          descend(trial);
          if (trial.objective() < state.objective() - 1e-12) {
            state = trial;
            improved = true;
          }
        }
      if (!improved && order.size() * obj.k() <= kMaxPairKickCells) {
        for (std::size_t a = 0; a < order.size() && !improved; ++a)
          for (std::size_t b = a + 1; b < order.size() && !improved; ++b)
            for (std::size_t fa = 0; fa < obj.k() && !improved; ++fa)
              for (std::size_t fb = 0; fb < obj.k() && !improved; ++fb) {
                const std::size_t ga = order[a], gb = order[b];
                if (fa == state.fold_of()[ga] || fb == state.fold_of()[gb])
                  continue;
                FoldState trial = state;
                trial.move(ga, fa);
                trial.move(gb, fb);
                descend(trial);
                if (trial.objective() < state.objective() - 1e-12) {
                  state = trial;
                  improved = true;
                }
              }
      }
      if (!improved)
        break;
    }
  }
  return {state.fold_of(), state.objective()};
}

} // namespace

FoldAssignment assign_folds(const Groups &groups, const Strata &strata, std::size_t k,
                            std::uint64_t seed, const AssignOptions &opts) {
  if (k < 2)
    throw Error(ErrorCode::InvalidArgument, "k must be >= 2");
  if (groups.size() < k)
    throw Error(ErrorCode::TooFewGroups, std::to_string(groups.size()) + " groups for k = " +
                                             std::to_string(k));

  std::set<std::string> languages;
  std::vector<GroupKey> keys;
  keys.reserve(groups.size());
  for (const auto &[key, ids] : groups) {
    keys.push_back(key);
    for (const auto &id : ids) {
      auto it = strata.find(id);
      if (it == strata.end())
        throw Error(ErrorCode::CoverageError, "record " + id + " has no stratum");
      languages.insert(it->second.language);
    }
  }
  const auto universe = stratum_universe(languages, opts.mode);

  std::vector<std::vector<double>> counts;
  std::vector<double> totals;
  for (const auto &[key, ids] : groups) {
    std::vector<double> row(universe.size(), 0.0);
    for (const auto &id : ids)
      for (const auto &cell : cells_of(strata.at(id), opts.mode))
        row[index_of(universe, cell)] += 1.0;
    counts.push_back(std::move(row));
    totals.push_back(static_cast<double>(ids.size()));
  }
  const FoldObjective obj(std::move(counts), std::move(totals), k);

  // Descending size, then ascending key; `keys` is already key-sorted.
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return obj.group_totals()[a] > obj.group_totals()[b];
  });

  auto [best_folds, best_j] = run_pass(obj, order, opts.refine);
  for (std::size_t r = 1; r <= opts.restarts; ++r) {
    auto shuffled = order;
    auto eng = make_engine(seed, 1000 + r);
    shuffle(std::span(shuffled), eng);
    auto [folds, j] = run_pass(obj, shuffled, opts.refine);
    if (j < best_j) {
      best_folds = std::move(folds);
      best_j = j;
    }
  }

  FoldAssignment a;
  a.k = k;
  a.seed = seed;
  a.objective_value = best_j;
  a.per_fold_stats.assign(k, {});
  for (std::size_t f = 0; f < k; ++f)
    for (const auto &cell : universe)
      a.per_fold_stats[f][cell] = 0;
  for (std::size_t g = 0; g < keys.size(); ++g) {
    a.group_to_fold[keys[g]] = best_folds[g];
    for (std::size_t s = 0; s < universe.size(); ++s)
      a.per_fold_stats[best_folds[g]][universe[s]] +=
          static_cast<std::size_t>(obj.group_counts()[g][s]);
  }
  return a;
}

RecordFolds record_folds(const FoldAssignment &a, const Groups &groups) {
  RecordFolds out;
  for (const auto &[key, ids] : groups) {
    auto it = a.group_to_fold.find(key);
    if (it == a.group_to_fold.end())
      throw Error(ErrorCode::CoverageError,
                  "group '" + key.key + "' is missing from the assignment");
    for (const auto &id : ids)
      out[id] = it->second;
  }
  return out;
}

AuditReport audit(const RecordFolds &folds, std::size_t k, const Dataset &ds,
                  const Groups &groups, StratifyMode mode) {
  if (k < 2)
    throw Error(ErrorCode::InvalidArgument, "k must be >= 2");
  AuditReport rep;
  rep.k = k;
  rep.fold_sizes.assign(k, 0);
  rep.per_fold_label_rate.assign(k, 0.0);
  rep.per_fold_language_histogram.assign(k, {});

  std::map<std::string, const Record *> by_id;
  for (const auto &r : ds.records)
    by_id[r.id] = &r;

  auto fold_of = [&](const std::string &id) {
    auto it = folds.find(id);
    if (it == folds.end())
      throw Error(ErrorCode::CoverageError, "record " + id + " has no fold");
    if (it->second >= k)
      throw Error(ErrorCode::CoverageError,
                  "record " + id + " assigned to fold " + std::to_string(it->second) +
                      " outside [0, " + std::to_string(k) + ")");
    return it->second;
  };

  std::set<std::string> grouped;
  for (const auto &[key, ids] : groups) {
    std::set<std::size_t> span;
    for (const auto &id : ids) {
      span.insert(fold_of(id));
      grouped.insert(id);
    }
    if (span.size() > 1)
      rep.leakage_violations.push_back({key, span});
  }

  std::vector<std::size_t> positives(k, 0), labeled(k, 0);
  std::size_t total_pos = 0, total_labeled = 0;
  std::map<std::string, std::size_t> language_totals;
  for (const auto &r : ds.records) {
    if (!grouped.count(r.id))
      throw Error(ErrorCode::CoverageError, "record " + r.id + " belongs to no group");
    const std::size_t f = fold_of(r.id);
    ++rep.fold_sizes[f];
    ++rep.per_fold_language_histogram[f][r.language];
    ++language_totals[r.language];
    if (r.label) {
      ++labeled[f];
      ++total_labeled;
      positives[f] += static_cast<std::size_t>(*r.label);
      total_pos += static_cast<std::size_t>(*r.label);
    }
  }
  for (std::size_t f = 0; f < k; ++f)
    rep.per_fold_label_rate[f] =
        labeled[f] ? static_cast<double>(positives[f]) / static_cast<double>(labeled[f]) : 0.0;
  rep.global_label_rate =
      total_labeled ? static_cast<double>(total_pos) / static_cast<double>(total_labeled) : 0.0;
  for (const auto &[lang, n] : language_totals)
    rep.global_language_share[lang] =
        static_cast<double>(n) / static_cast<double>(ds.records.size());

  // Divergence over labeled records, as the record-level analogue of J.
  const auto universe = stratum_universe(ds.languages, mode);
  std::vector<std::vector<double>> fold_counts(k, std::vector<double>(universe.size(), 0.0));
  std::vector<double> fold_totals(k, 0.0), global(universe.size(), 0.0);
  for (const auto &r : ds.records) {
    if (!r.label)
      continue;
    const std::size_t f = fold_of(r.id);
    for (const auto &cell : cells_of({r.language, *r.label}, mode)) {
      const std::size_t s = index_of(universe, cell);
      fold_counts[f][s] += 1.0;
      global[s] += 1.0;
    }
    fold_totals[f] += 1.0;
  }
  if (total_labeled > 0) {
    for (auto &g : global)
      g /= static_cast<double>(total_labeled);
    const double mean = static_cast<double>(total_labeled) / static_cast<double>(k);
    for (std::size_t f = 0; f < k; ++f)
      rep.divergence += fold_term(fold_counts[f], fold_totals[f], global, mean);
  }
  return rep;
}

AuditReport audit(const FoldAssignment &a, const Dataset &ds, const Groups &groups,
                  StratifyMode mode) {
  return audit(record_folds(a, groups), a.k, ds, groups, mode);
}

std::string audit_to_json(const AuditReport &r) {
  ordered_json j;
  j["k"] = r.k;
  j["clean"] = r.clean();
  auto violations = ordered_json::array();
  for (const auto &v : r.leakage_violations)
    violations.push_back({{"group_key", v.group.key},
                          {"kind", to_string(v.group.kind)},
                          {"folds", std::vector<std::size_t>(v.folds.begin(), v.folds.end())}});
  j["leakage_violations"] = violations;
  j["fold_sizes"] = r.fold_sizes;
  j["global_label_rate"] = r.global_label_rate;
  j["per_fold_label_rate"] = r.per_fold_label_rate;
  j["global_language_share"] = r.global_language_share;
  j["per_fold_language_histogram"] = r.per_fold_language_histogram;
  j["divergence"] = r.divergence;
  return j.dump(2) + "\n";
}

namespace {
std::string_view mode_name(StratifyMode m) { return m == StratifyMode::Joint ? "joint" : "marginal"; }

StratifyMode parse_mode(std::string_view s) {
  if (s == "joint")
    return StratifyMode::Joint;
  if (s == "marginal")
    return StratifyMode::Marginal;
  throw Error(ErrorCode::ParseError, "unknown stratify mode '" + std::string(s) + "'");
}
} // namespace

std::string serialize_assignment(const FoldAssignment &a, const SplitMeta &meta) {
  std::string out;
  for (const auto &[key, fold] : a.group_to_fold) {
    ordered_json line;
    line["group_key"] = key.key;
    line["kind"] = to_string(key.kind);
    line["fold"] = fold;
    out += line.dump();
    out += '\n';
  }
  ordered_json footer;
  footer["k"] = a.k;
  footer["seed"] = a.seed;
  footer["objective_value"] = a.objective_value;
  footer["group_kind"] = to_string(meta.kind);
  footer["prefix_n"] = meta.prefix_n;
  footer["raw_query"] = meta.raw_query;
  footer["stratify"] = mode_name(meta.mode);
  auto stats = ordered_json::array();
  for (const auto &fold : a.per_fold_stats) {
    auto cells = ordered_json::array();
    for (const auto &[cell, n] : fold)
      cells.push_back({{"language", cell.language}, {"label", cell.label}, {"count", n}});
    stats.push_back(cells);
  }
  footer["per_fold_stats"] = stats;
  out += footer.dump();
  out += '\n';
  return out;
}

std::pair<FoldAssignment, SplitMeta> parse_assignment(std::string_view text) {
  FoldAssignment a;
  SplitMeta meta;
  bool have_footer = false;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty())
      continue;
    const std::string where = "fold file line " + std::to_string(i + 1);
    if (have_footer)
      throw Error(ErrorCode::ParseError, where + ": data after footer");
    ordered_json j;
    try {
      j = ordered_json::parse(lines[i]);
      if (j.contains("group_key")) {
        const GroupKey key{parse_group_kind(j.at("kind").get<std::string>()),
                           j.at("group_key").get<std::string>()};
        if (!a.group_to_fold.emplace(key, j.at("fold").get<std::size_t>()).second)
          throw Error(ErrorCode::ParseError, where + ": duplicate group '" + key.key + "'");
      } else {
        a.k = j.at("k").get<std::size_t>();
        a.seed = j.at("seed").get<std::uint64_t>();
        a.objective_value = j.at("objective_value").get<double>();
        meta.kind = parse_group_kind(j.at("group_kind").get<std::string>());
        meta.prefix_n = j.at("prefix_n").get<std::size_t>();
        meta.raw_query = j.at("raw_query").get<bool>();
        meta.mode = parse_mode(j.at("stratify").get<std::string>());
        for (const auto &fold : j.at("per_fold_stats")) {
          std::map<StratumKey, std::size_t> cells;
          for (const auto &c : fold)
            cells[{c.at("language").get<std::string>(), c.at("label").get<int>()}] =
                c.at("count").get<std::size_t>();
          a.per_fold_stats.push_back(std::move(cells));
        }
        have_footer = true;
      }
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
  }
  if (!have_footer)
    throw Error(ErrorCode::ParseError, "fold file has no footer");
  for (const auto &[key, fold] : a.group_to_fold)
    if (fold >= a.k)
      throw Error(ErrorCode::ParseError, "group '" + key.key + "' has fold outside [0, k)");
  return {std::move(a), meta};
}

std::string serialize_record_folds(const RecordFolds &folds, const Dataset &ds) {
  std::string out;
  for (const auto &r : ds.records) {
    auto it = folds.find(r.id);
    if (it == folds.end())
      throw Error(ErrorCode::CoverageError, "record " + r.id + " has no fold");
    ordered_json line;
    line["id"] = r.id;
    line["fold"] = it->second;
    out += line.dump();
    out += '\n';
  }
  return out;
}

RecordFolds parse_record_folds(std::string_view text) {
  RecordFolds out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty())
      continue;
    try {
      const auto j = ordered_json::parse(lines[i]);
      auto id = j.at("id").get<std::string>();
      if (!out.emplace(id, j.at("fold").get<std::size_t>()).second)
        throw Error(ErrorCode::ParseError, "record fold file line " + std::to_string(i + 1) +
                                               ": duplicate id " + id);
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::ParseError,
                  "record fold file line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

} // namespace relsplit::split
