#include "relsplit/encode.hpp"

#include "relsplit/binio.hpp"
#include "relsplit/error.hpp"
#include "relsplit/rng.hpp"
#include "relsplit/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

namespace relsplit::encode {

using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? line.npos : tab - start));
    if (tab == std::string_view::npos)
      break;
    start = tab + 1;
  }
  return out;
}

std::string clean_or_throw(std::string_view s, const std::string &where) {
  auto c = text::clean_text(s);
  if (!c)
    throw Error(ErrorCode::ParseError, where + ": empty text");
  return *c;
}

} // namespace

TableProvider::TableProvider(std::map<Key, std::string> table, bool fallback_to_identity)
    : table_(std::move(table)), fallback_(fallback_to_identity) {}

std::map<TableProvider::Key, std::string> TableProvider::parse_table(std::string_view tsv) {
  std::map<Key, std::string> table;
  const auto lines = io::split_lines(tsv);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (line.empty())
      continue;
    const std::string where = "translation table line " + std::to_string(i + 1);
    if (!text::is_valid_utf8(line))
      throw Error(ErrorCode::ParseError, where + ": invalid UTF-8");
    const auto cols = split_tabs(line);
    if (cols.size() != 3)
      throw Error(ErrorCode::ParseError, where + ": expected 3 tab-separated columns");
    table[{std::string(cols[0]), clean_or_throw(cols[1], where)}] = clean_or_throw(cols[2], where);
  }
  return table;
}

TableProvider TableProvider::from_file(const std::filesystem::path &path,
                                       bool fallback_to_identity) {
  return TableProvider(parse_table(io::read_file(path)), fallback_to_identity);
}

std::string TableProvider::translate(std::string_view query, std::string_view source_language) {
  ++lookups_;
  auto it = table_.find({std::string(source_language), std::string(query)});
  if (it != table_.end())
    return it->second;
  if (fallback_)
    return std::string(query);
  throw Error(ErrorCode::MissingEntry,
              "no translation for (" + std::string(source_language) + ", " + std::string(query) + ")");
}

CachingProvider::CachingProvider(std::unique_ptr<TranslationProvider> inner,
                                 std::filesystem::path cache_file)
    : inner_(std::move(inner)), path_(std::move(cache_file)) {
  if (!std::filesystem::exists(path_))
    return;
  const std::string data = io::read_file(path_);
  const auto lines = io::split_lines(data);
  const std::string me = inner_->name();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty())
      continue;
    const auto cols = split_tabs(lines[i]);
    if (cols.size() != 4)
      throw Error(ErrorCode::ParseError,
                  "cache file line " + std::to_string(i + 1) + ": expected 4 columns");
    if (cols[0] == me)
      cache_[{std::string(cols[1]), std::string(cols[2])}] = std::string(cols[3]);
  }
}

std::string CachingProvider::translate(std::string_view query, std::string_view source_language) {
  std::pair<std::string, std::string> key{std::string(source_language), std::string(query)};
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end())
      return it->second;
  }
  std::unique_lock lock(mutex_);
  if (auto it = cache_.find(key); it != cache_.end())
    return it->second;
  std::string out = inner_->translate(query, source_language);
  ++inner_calls_;
  for (const auto *field : {&key.first, &key.second, &out})
    if (field->find_first_of("\t\n") != std::string::npos)
      throw Error(ErrorCode::ProviderError, "cannot cache text containing tab or newline");
  if (path_.has_parent_path())
    std::filesystem::create_directories(path_.parent_path());
  std::ofstream f(path_, std::ios::binary | std::ios::app);
  if (!f)
    throw Error(ErrorCode::IoError, "cannot append to " + path_.string());
  f << inner_->name() << '\t' << key.first << '\t' << key.second << '\t' << out << '\n';
  cache_.emplace(std::move(key), out);
  return out;
}

std::string translate_query(TranslationProvider &provider, const Record &record) {
  try {
    return provider.translate(record.cleaned_query, record.language);
  } catch (const Error &e) {
    const auto code = e.code() == ErrorCode::MissingEntry ? ErrorCode::MissingEntry
                                                           : ErrorCode::ProviderError;
    throw Error(code, "record " + record.id + ": " + e.detail());
  } catch (const std::exception &e) {
    throw Error(ErrorCode::ProviderError, "record " + record.id + ": " + e.what());
  }
}

InputSequence build_input(std::string_view q_orig, std::string_view q_en, std::string_view t) {
  const std::pair<const char *, std::string_view> parts[] = {
      {"q_orig", q_orig}, {"q_en", q_en}, {"target", t}};
  for (const auto &[name, part] : parts) {
    if (part.empty())
      throw Error(ErrorCode::EmptyField, name);
    if (part.find(kCls) != std::string_view::npos || part.find(kSep) != std::string_view::npos)
      throw Error(ErrorCode::ReservedMarker, std::string(name) + " contains a reserved marker");
  }
  InputSequence seq;
  seq.q_orig = q_orig;
  seq.q_en = q_en;
  seq.target = t;
  seq.text.reserve(q_orig.size() + q_en.size() + t.size() + 24);
  seq.text.append(kCls).append(" ").append(q_orig).append(kPivotSeparator).append(q_en);
  seq.text.append(" ").append(kSep).append(" ").append(t).append(" ").append(kSep);
  return seq;
}

std::string target_text(const Record &r, std::string_view delimiter) {
  if (r.task == TaskKind::QueryCategory)
    return render(parse_category_path(r.cleaned_target, delimiter), delimiter);
  return r.cleaned_target;
}

void FeaturizerConfig::validate() const {
  if (dims < (1u << 8) || dims > (1u << 20) || (dims & (dims - 1)) != 0)
    throw Error(ErrorCode::InvalidArgument, "dims must be a power of two in [2^8, 2^20]");
  if (n_min < 1 || n_min > n_max || n_max > 5)
    throw Error(ErrorCode::InvalidArgument, "need 1 <= n_min <= n_max <= 5");
}

namespace {
// Markers live above the Unicode range so they cannot collide with text.
constexpr char32_t kClsSymbol = 0x110001;
constexpr char32_t kSepSymbol = 0x110002;
} // namespace

std::u32string symbols_of(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t cls = s.find(kCls, i);
    const std::size_t sep = s.find(kSep, i);
    const std::size_t next = std::min(cls, sep);
    const auto plain = text::decode_utf8(s.substr(i, next == s.npos ? s.npos : next - i));
    out.append(plain.begin(), plain.end());
    if (next == s.npos)
      break;
    out.push_back(next == cls ? kClsSymbol : kSepSymbol);
    i = next + kCls.size();
  }
  return out;
}

std::uint64_t ngram_hash(std::u32string_view ngram, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (char32_t c : ngram)
    h = splitmix64(h ^ static_cast<std::uint64_t>(c));
  return splitmix64(h ^ ngram.size());
}

FeatureVector featurize_text(std::string_view text, const FeaturizerConfig &cfg) {
  cfg.validate();
  const std::u32string sym = symbols_of(text);
  std::vector<std::pair<std::uint32_t, double>> hits;
  for (std::size_t n = cfg.n_min; n <= cfg.n_max; ++n) {
    if (sym.size() < n)
      break;
    for (std::size_t i = 0; i + n <= sym.size(); ++i) {
      const std::uint64_t h = ngram_hash(std::u32string_view(sym).substr(i, n), cfg.seed);
      const auto bucket = static_cast<std::uint32_t>(h & (cfg.dims - 1));
      hits.emplace_back(bucket, (h >> 63) ? -1.0 : 1.0);
    }
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const auto &a, const auto &b) { return a.first < b.first; });

  FeatureVector v(cfg.dims);
  std::vector<std::pair<std::uint32_t, double>> merged;
  for (const auto &[bucket, sign] : hits) {
    if (!merged.empty() && merged.back().first == bucket)
      merged.back().second += sign;
    else
      merged.emplace_back(bucket, sign);
  }
  double sq = 0.0;
  std::size_t nnz = 0;
  for (const auto &[bucket, value] : merged) {
    sq += value * value;
    nnz += value != 0.0;
  }
  if (sq == 0.0)
    return v;
  const double norm = std::sqrt(sq);
  v.reserve(static_cast<Eigen::Index>(nnz));
  for (const auto &[bucket, value] : merged)
    if (value != 0.0)
      v.insertBack(static_cast<Eigen::Index>(bucket)) = value / norm;
  return v;
}

FeatureVector featurize(const InputSequence &seq, const FeaturizerConfig &cfg) {
  return featurize_text(seq.text, cfg);
}

std::string EncodedDataset::fingerprint() const {
  std::uint64_t h = io::fnv1a64("relsplit-encoded-v1");
  auto mix_u64 = [&](std::uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    h = io::fnv1a64(std::string_view(b, 8), h);
  };
  mix_u64(config.dims);
  mix_u64(config.n_min);
  mix_u64(config.n_max);
  mix_u64(config.seed);
  for (const auto &r : records) {
    mix_u64(r.id.size());
    h = io::fnv1a64(r.id, h);
    mix_u64(r.label ? static_cast<std::uint64_t>(*r.label) : 2u);
    for (FeatureVector::InnerIterator it(r.x); it; ++it) {
      mix_u64(static_cast<std::uint64_t>(it.index()));
      mix_u64(std::bit_cast<std::uint64_t>(it.value()));
    }
  }
  return io::hex64(h);
}

EncodedDataset encode_dataset(const Dataset &ds, TranslationProvider &provider,
                              const FeaturizerConfig &cfg, unsigned threads) {
  cfg.validate();
  std::vector<InputSequence> seqs;
  seqs.reserve(ds.records.size());
  for (const auto &r : ds.records) {
    try {
      seqs.push_back(build_input(r.cleaned_query, translate_query(provider, r), target_text(r)));
    } catch (const Error &e) {
      if (e.code() == ErrorCode::ProviderError || e.code() == ErrorCode::MissingEntry)
        throw;
      throw Error(e.code(), "record " + r.id + ": " + e.detail());
    }
  }

  EncodedDataset out;
  out.config = cfg;
  out.provider = provider.name();
  out.records.resize(ds.records.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto &r = ds.records[i];
      out.records[i] = {r.id, r.label, featurize(seqs[i], cfg)};
    }
  };
  const std::size_t n = seqs.size();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(work, std::min(n, t * chunk), std::min(n, (t + 1) * chunk));
    for (auto &th : pool)
      th.join();
  }
  return out;
}

std::string serialize_encoded(const EncodedDataset &ds) {
  ordered_json header;
  header["format"] = "relsplit-encoded";
  header["version"] = 1;
  header["dims"] = ds.config.dims;
  header["n_min"] = ds.config.n_min;
  header["n_max"] = ds.config.n_max;
  header["hash_seed"] = ds.config.seed;
  header["provider"] = ds.provider;
  header["encoding"] = "base64-f32le";
  std::string out = header.dump() + "\n";
  std::string dense(std::size_t{ds.config.dims} * 4, '\0');
  for (const auto &r : ds.records) {
    std::fill(dense.begin(), dense.end(), '\0');
    for (FeatureVector::InnerIterator it(r.x); it; ++it) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(it.value()));
      std::memcpy(dense.data() + 4 * it.index(), &bits, 4);
    }
    ordered_json line;
    line["id"] = r.id;
    line["label"] = r.label ? ordered_json(*r.label) : ordered_json(nullptr);
    line["vector"] = io::base64_encode(dense);
    out += line.dump();
    out += '\n';
  }
  return out;
}

EncodedDataset parse_encoded(std::string_view text) {
  const auto lines = io::split_lines(text);
  if (lines.empty())
    throw Error(ErrorCode::FormatError, "encoded file is empty");
  EncodedDataset ds;
  try {
    const auto header = ordered_json::parse(lines[0]);
    if (header.value("format", "") != "relsplit-encoded" || header.value("version", 0) != 1)
      throw Error(ErrorCode::FormatError, "not a relsplit encoded file (version 1)");
    ds.config.dims = header.at("dims").get<std::uint32_t>();
    ds.config.n_min = header.at("n_min").get<std::uint32_t>();
    ds.config.n_max = header.at("n_max").get<std::uint32_t>();
    ds.config.seed = header.at("hash_seed").get<std::uint64_t>();
    ds.provider = header.at("provider").get<std::string>();
    ds.config.validate();
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty())
        continue;
      const auto j = ordered_json::parse(lines[i]);
      EncodedRecord r;
      r.id = j.at("id").get<std::string>();
      if (!j.at("label").is_null())
        r.label = j.at("label").get<int>();
      const std::string dense = io::base64_decode(j.at("vector").get<std::string>());
      if (dense.size() != std::size_t{ds.config.dims} * 4)
        throw Error(ErrorCode::FormatError,
                    "line " + std::to_string(i + 1) + ": vector length does not match dims");
      r.x.resize(ds.config.dims);
      for (std::uint32_t d = 0; d < ds.config.dims; ++d) {
        std::uint32_t bits;
        std::memcpy(&bits, dense.data() + 4 * std::size_t{d}, 4);
        const float v = std::bit_cast<float>(bits);
        if (v != 0.0f)
          r.x.insertBack(d) = static_cast<double>(v);
      }
      ds.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::FormatError, e.what());
  }
  return ds;
}

} // namespace relsplit::encode
