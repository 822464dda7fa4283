#ifndef RELSPLIT_ENCODE_HPP
#define RELSPLIT_ENCODE_HPP

#include "relsplit/corpus.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace relsplit::encode {

// ---------------------------------------------------------------------------
// Translation

class TranslationProvider {
public:
  virtual ~TranslationProvider() = default;
  virtual std::string name() const = 0;
  /// Must be deterministic for a given instance.
  virtual std::string translate(std::string_view query, std::string_view source_language) = 0;
};

class IdentityProvider final : public TranslationProvider {
public:
  std::string name() const override { return "identity"; }
  std::string translate(std::string_view query, std::string_view) override {
    return std::string(query);
  }
};

/// Exact-match lookup in a (source_language, source_text) -> english table.
/// Source and English text are cleaned on load, so lookups use cleaned
/// queries. Misses throw MissingEntry unless `fallback_to_identity`.
class TableProvider final : public TranslationProvider {
public:
  using Key = std::pair<std::string, std::string>;

  explicit TableProvider(std::map<Key, std::string> table, bool fallback_to_identity = false);

  /// Tab-separated (source_language, source_text, english_text) lines.
  static TableProvider from_file(const std::filesystem::path &path,
                                 bool fallback_to_identity = false);
  static std::map<Key, std::string> parse_table(std::string_view tsv);

  std::string name() const override { return "table"; }
  std::string translate(std::string_view query, std::string_view source_language) override;

  std::size_t lookups() const { return lookups_; }

private:
  std::map<Key, std::string> table_;
  bool fallback_;
  std::size_t lookups_ = 0;
};

/// Memoizes another provider into an append-only cache file of
/// (provider, source_language, source_text, english_text) lines. Entries of
/// other providers in the same file are left alone.
class CachingProvider final : public TranslationProvider {
public:
  CachingProvider(std::unique_ptr<TranslationProvider> inner, std::filesystem::path cache_file);

  std::string name() const override { return inner_->name(); }
  std::string translate(std::string_view query, std::string_view source_language) override;

  /// Number of calls forwarded to the wrapped provider.
  std::size_t inner_calls() const { return inner_calls_; }
  TranslationProvider &inner() { return *inner_; }

private:
  std::unique_ptr<TranslationProvider> inner_;
  std::filesystem::path path_;
  std::map<std::pair<std::string, std::string>, std::string> cache_;
  mutable std::shared_mutex mutex_;
  std::size_t inner_calls_ = 0;
};

/// q_en for a record's cleaned query. Provider failures are rethrown as
/// ProviderError (MissingEntry is kept) with the record id attached.
std::string translate_query(TranslationProvider &provider, const Record &record);

// ---------------------------------------------------------------------------
// Input sequence

inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kPivotSeparator = " - ";

struct InputSequence {
  std::string text;
  std::string q_orig;
  std::string q_en;
  std::string target;
};

/// "[CLS] q_orig - q_en [SEP] t [SEP]". Throws EmptyField naming the part, or
/// ReservedMarker if a part contains [CLS]/[SEP].
InputSequence build_input(std::string_view q_orig, std::string_view q_en, std::string_view t);

/// Rendered category path for query-category records, cleaned item text
/// otherwise.
std::string target_text(const Record &r, std::string_view delimiter = kDefaultPathDelimiter);

// ---------------------------------------------------------------------------
// Featurization

struct FeaturizerConfig {
  std::uint32_t dims = 1u << 16;
  std::uint32_t n_min = 2;
  std::uint32_t n_max = 4;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const FeaturizerConfig &) const = default;
};

/// L2-normalized signed hashed n-gram counts; logically dense of length dims.
template <typename Scalar = double> using SparseFeatures = Eigen::SparseVector<Scalar>;
using FeatureVector = SparseFeatures<double>;

/// Sequence symbols: code points, with [CLS] and [SEP] as single symbols.
std::u32string symbols_of(std::string_view text);

/// Seeded 64-bit hash of one n-gram of symbols.
std::uint64_t ngram_hash(std::u32string_view ngram, std::uint64_t seed);

FeatureVector featurize(const InputSequence &seq, const FeaturizerConfig &cfg);
FeatureVector featurize_text(std::string_view text, const FeaturizerConfig &cfg);

struct EncodedRecord {
  std::string id;
  std::optional<int> label;
  FeatureVector x;
};

struct EncodedDataset {
  FeaturizerConfig config;
  std::string provider = "identity";
  std::vector<EncodedRecord> records;

  /// Hex digest over config, ids, labels and feature bytes.
  std::string fingerprint() const;
  std::size_t size() const { return records.size(); }
};

/// Translates (sequentially) then featurizes with up to `threads` workers.
/// Output is identical for any thread count.
EncodedDataset encode_dataset(const Dataset &ds, TranslationProvider &provider,
                              const FeaturizerConfig &cfg, unsigned threads = 1);

/// Header line followed by {"id", "label", "vector"} lines; "vector" is the
/// base-64 of the dense little-endian float32 values.
std::string serialize_encoded(const EncodedDataset &ds);
EncodedDataset parse_encoded(std::string_view text);

} // namespace relsplit::encode

#endif // RELSPLIT_ENCODE_HPP
