#ifndef RELSPLIT_CORPUS_HPP
#define RELSPLIT_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace relsplit {

enum class TaskKind { QueryCategory, QueryItem };

/// "qc" / "qi".
std::string_view to_string(TaskKind task);
TaskKind parse_task(std::string_view s);

inline constexpr std::string_view kUnknownLanguage = "und";
inline constexpr std::string_view kDefaultPathDelimiter = ">";

/// One labeled (or unlabeled) relevance example. The raw text is kept next to
/// the cleaned text for auditing.
struct Record {
  std::string id;
  TaskKind task = TaskKind::QueryItem;
  std::string query;
  std::string target;
  std::string language{kUnknownLanguage};
  std::optional<int> label;
  std::string cleaned_query;
  std::string cleaned_target;

  bool operator==(const Record &) const = default;
};

/// Cleans query and target; nullopt if either cleans to nothing.
std::optional<Record> make_record(std::string id, TaskKind task, std::string query,
                                  std::string target, std::string language,
                                  std::optional<int> label);

struct CategoryPath {
  std::vector<std::string> segments;

  bool operator==(const CategoryPath &) const = default;
};

/// Splits on `delimiter` and cleans every segment. Throws EmptyPath or
/// EmptySegment.
CategoryPath parse_category_path(std::string_view s,
                                 std::string_view delimiter = kDefaultPathDelimiter);

/// Joins segments with " <delimiter> ".
std::string render(const CategoryPath &path,
                   std::string_view delimiter = kDefaultPathDelimiter);

/// Same as render() over the first min(n, size) segments.
std::string render_prefix(const CategoryPath &path, std::size_t n,
                          std::string_view delimiter = kDefaultPathDelimiter);

/// JSON field names of the line-delimited record format.
struct FieldNames {
  std::string id = "id";
  std::string query = "query";
  std::string target = "target";
  std::string language = "language";
  std::string label = "label";
};

struct Dataset {
  TaskKind task = TaskKind::QueryItem;
  std::vector<Record> records;
  std::set<std::string> languages;

  /// Appends, keeping `languages` current. Does not check id uniqueness.
  void push_back(Record r);
  std::size_t size() const { return records.size(); }
};

struct LoadResult {
  Dataset dataset;
  std::size_t dropped_count = 0;
  std::size_t dropped_empty_query = 0;
  std::size_t dropped_empty_target = 0;
};

/// Parses line-delimited JSON records. Blank lines are skipped. Throws
/// ParseError (with 1-based line number) or DuplicateId.
LoadResult parse_dataset(std::string_view text, TaskKind task, const FieldNames &fields = {});
LoadResult load_dataset(const std::filesystem::path &path, TaskKind task,
                        const FieldNames &fields = {});

/// Canonical serialization: one compact JSON object per record with the keys
/// id, query, target, language, [label], cleaned_query, cleaned_target.
std::string serialize_dataset(const Dataset &ds, const FieldNames &fields = {});
void save_dataset(const std::filesystem::path &path, const Dataset &ds,
                  const FieldNames &fields = {});

/// Knobs of the planted-signal generator.
struct SynthSpec {
  std::size_t vocab_size = 300;       // distinct content tokens per task
  std::size_t n_languages = 4;
  std::size_t n_category_roots = 6;
  std::size_t records_per_task = 5000;
  double overlap = 1.0;               // fraction of vocabulary shared by the two tasks
  double label_noise = 0.0;           // probability of flipping a planted label

  void validate() const;
};

struct SynthPair {
  Dataset aux;    // query-category
  Dataset target; // query-item
};

/// Deterministic planted-signal corpus pair. A record is relevant iff its
/// cleaned query and cleaned target share at least one token (before label
/// noise).
SynthPair gen_synthetic(const SynthSpec &spec, std::uint64_t seed);

/// Whitespace tokens of a cleaned text; category delimiters are dropped.
std::set<std::string> content_tokens(std::string_view cleaned,
                                     std::string_view delimiter = kDefaultPathDelimiter);

/// The planted rule: 1 iff query and target tokens intersect.
int overlap_rule(const Record &r);

} // namespace relsplit

#endif // RELSPLIT_CORPUS_HPP
