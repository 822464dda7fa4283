#include "relsplit/corpus.hpp"

#include "relsplit/binio.hpp"
#include "relsplit/error.hpp"
#include "relsplit/text.hpp"

#include <json.hpp>

#include <unordered_set>

namespace relsplit {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(TaskKind task) {
  return task == TaskKind::QueryCategory ? "qc" : "qi";
}

TaskKind parse_task(std::string_view s) {
  if (s == "qc")
    return TaskKind::QueryCategory;
  if (s == "qi")
    return TaskKind::QueryItem;
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + std::string(s) + "' (expected qc|qi)");
}

std::optional<Record> make_record(std::string id, TaskKind task, std::string query,
                                  std::string target, std::string language,
                                  std::optional<int> label) {
  auto cq = text::clean_text(query);
  auto ct = text::clean_text(target);
  if (!cq || !ct)
    return std::nullopt;
  Record r;
  r.id = std::move(id);
  r.task = task;
  r.query = std::move(query);
  r.target = std::move(target);
  r.language = language.empty() ? std::string(kUnknownLanguage) : std::move(language);
  r.label = label;
  r.cleaned_query = std::move(*cq);
  r.cleaned_target = std::move(*ct);
  return r;
}

CategoryPath parse_category_path(std::string_view s, std::string_view delimiter) {
  if (delimiter.empty())
    throw Error(ErrorCode::InvalidArgument, "empty category delimiter");
  if (!text::clean_text(s))
    throw Error(ErrorCode::EmptyPath, "category path is empty");
  CategoryPath path;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(delimiter, start);
    const auto piece = s.substr(start, pos == std::string_view::npos ? s.npos : pos - start);
    auto seg = text::clean_text(piece);
    if (!seg)
      throw Error(ErrorCode::EmptySegment,
                  "segment " + std::to_string(path.segments.size()) + " of '" +
                      std::string(s) + "' is empty");
    path.segments.push_back(std::move(*seg));
    if (pos == std::string_view::npos)
      break;
    start = pos + delimiter.size();
  }
  return path;
}

std::string render_prefix(const CategoryPath &path, std::size_t n, std::string_view delimiter) {
  std::string out;
  const std::size_t m = std::min(n, path.segments.size());
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0) {
      out += ' ';
      out += delimiter;
      out += ' ';
    }
    out += path.segments[i];
  }
  return out;
}

std::string render(const CategoryPath &path, std::string_view delimiter) {
  return render_prefix(path, path.segments.size(), delimiter);
}

void Dataset::push_back(Record r) {
  languages.insert(r.language);
  records.push_back(std::move(r));
}

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string &what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::string required_string(const ordered_json &obj, const std::string &key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null())
    parse_fail(line, "missing field '" + key + "'");
  if (!it->is_string())
    parse_fail(line, "field '" + key + "' is not a string");
  return it->get<std::string>();
}

} // namespace

LoadResult parse_dataset(std::string_view data, TaskKind task, const FieldNames &fields) {
  LoadResult result;
  result.dataset.task = task;
  std::unordered_set<std::string> seen;
  const auto lines = io::split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    std::string_view line = lines[i];
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos)
      continue;
    if (!text::is_valid_utf8(line))
      parse_fail(lineno, "invalid UTF-8");
    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      parse_fail(lineno, e.what());
    }
    if (!obj.is_object())
      parse_fail(lineno, "record is not a JSON object");

    std::string id;
    auto id_it = obj.find(fields.id);
    if (id_it == obj.end() || id_it->is_null())
      parse_fail(lineno, "missing field '" + fields.id + "'");
    if (id_it->is_string())
      id = id_it->get<std::string>();
    else if (id_it->is_number_integer())
      id = id_it->dump();
    else
      parse_fail(lineno, "field '" + fields.id + "' is not a string or integer");

    std::string query = required_string(obj, fields.query, lineno);
    std::string target = required_string(obj, fields.target, lineno);

    std::string language;
    if (auto it = obj.find(fields.language); it != obj.end() && !it->is_null()) {
      if (!it->is_string())
        parse_fail(lineno, "field '" + fields.language + "' is not a string");
      language = it->get<std::string>();
    }

    std::optional<int> label;
    if (auto it = obj.find(fields.label); it != obj.end() && !it->is_null()) {
      if (!it->is_number_integer())
        parse_fail(lineno, "field '" + fields.label + "' is not an integer");
      const auto v = it->get<std::int64_t>();
      if (v != 0 && v != 1)
        parse_fail(lineno, "label must be 0 or 1, got " + std::to_string(v));
      label = static_cast<int>(v);
    }

    if (!seen.insert(id).second)
      throw Error(ErrorCode::DuplicateId, id);

    const bool empty_query = !text::clean_text(query);
    auto rec = make_record(std::move(id), task, std::move(query), std::move(target),
                           std::move(language), label);
    if (!rec) {
      ++result.dropped_count;
      if (empty_query)
        ++result.dropped_empty_query;
      else
        ++result.dropped_empty_target;
      continue;
    }
    result.dataset.push_back(std::move(*rec));
  }
  return result;
}

LoadResult load_dataset(const std::filesystem::path &path, TaskKind task,
                        const FieldNames &fields) {
  return parse_dataset(io::read_file(path), task, fields);
}

std::string serialize_dataset(const Dataset &ds, const FieldNames &fields) {
  std::string out;
  for (const auto &r : ds.records) {
    ordered_json obj;
    obj[fields.id] = r.id;
    obj[fields.query] = r.query;
    obj[fields.target] = r.target;
    obj[fields.language] = r.language;
    if (r.label)
      obj[fields.label] = *r.label;
    obj["cleaned_query"] = r.cleaned_query;
    obj["cleaned_target"] = r.cleaned_target;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const std::filesystem::path &path, const Dataset &ds, const FieldNames &fields) {
  io::write_file(path, serialize_dataset(ds, fields));
}

std::set<std::string> content_tokens(std::string_view cleaned, std::string_view delimiter) {
  std::set<std::string> out;
  std::size_t start = 0;
  while (start < cleaned.size()) {
    std::size_t end = cleaned.find(' ', start);
    if (end == std::string_view::npos)
      end = cleaned.size();
    auto tok = cleaned.substr(start, end - start);
    if (!tok.empty() && tok != delimiter)
      out.emplace(tok);
    start = end + 1;
  }
  return out;
}

int overlap_rule(const Record &r) {
  const auto q = content_tokens(r.cleaned_query);
  const auto t = content_tokens(r.task == TaskKind::QueryCategory
                                    ? render(parse_category_path(r.cleaned_target))
                                    : r.cleaned_target);
  for (const auto &tok : q)
    if (t.count(tok))
      return 1;
  return 0;
}

} // namespace relsplit
