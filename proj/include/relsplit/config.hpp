#ifndef RELSPLIT_CONFIG_HPP
#define RELSPLIT_CONFIG_HPP

#include "relsplit/corpus.hpp"
#include "relsplit/encode.hpp"
#include "relsplit/model.hpp"

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace relsplit::config {

/// Environment variable naming a default config file.
inline constexpr const char *kConfigEnv = "RELSPLIT_CONFIG";

using KeyValues = std::map<std::string, std::string>;

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// ignored; keys must be known (see is_known_key) and appear once.
/// Throws InvalidArgument with the line number.
KeyValues parse_config(std::string_view text);
KeyValues load_config(const std::filesystem::path &path);

bool is_known_key(std::string_view key);

/// Layered lookup: flags override the config file, which overrides defaults.
class Settings {
public:
  void set_default(const std::string &key, std::string value);
  void merge_file(const KeyValues &kv);
  void set_flag(const std::string &key, std::string value);

  bool has(const std::string &key) const;
  std::optional<std::string> raw(const std::string &key) const;
  /// Which layer supplied the value: "flag", "config", "default" or "".
  std::string_view source(const std::string &key) const;

  std::string str(const std::string &key) const;
  std::int64_t integer(const std::string &key) const;
  std::uint64_t u64(const std::string &key) const;
  double real(const std::string &key) const;
  bool boolean(const std::string &key) const;

  /// Effective values, one `key = value` line each, sorted by key, minus `omit`.
  std::string dump(std::initializer_list<std::string_view> omit = {}) const;

private:
  KeyValues defaults_, file_, flags_;
};

/// Keys `<prefix>.optimizer`, `<prefix>.learning_rate`, ... over the
/// optimizer's own defaults.
model::TrainConfig train_config(const Settings &s, std::string_view prefix);
void set_train_defaults(Settings &s, std::string_view prefix, const model::TrainConfig &cfg);

encode::FeaturizerConfig featurizer_config(const Settings &s);
FieldNames field_names(const Settings &s);
SynthSpec synth_spec(const Settings &s);

} // namespace relsplit::config

#endif // RELSPLIT_CONFIG_HPP
