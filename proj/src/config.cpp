#include "relsplit/config.hpp"

#include "relsplit/binio.hpp"
#include "relsplit/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace relsplit::config {

namespace {

constexpr std::array<std::string_view, 32> kPlainKeys = {
    "task",       "in",        "out",        "report",     "folds",       "record_folds",
    "fold",       "k",         "prefix_n",   "seed",       "group",       "raw_query",
    "stratify",   "restarts",  "refine",     "delimiter",  "dims",        "n_min",
    "n_max",      "hash_seed", "provider",   "table",      "cache",       "fallback_identity",
    "threads",    "threshold", "limit",      "init",       "ckpt",        "workdir",
    "replicates", "tune_threshold"};

constexpr std::array<std::string_view, 5> kFieldKeys = {"id", "query", "target", "language",
                                                        "label"};

constexpr std::array<std::string_view, 10> kTrainKeys = {
    "optimizer", "learning_rate", "epochs", "batch_size", "seed",
    "l2",        "beta1",         "beta2",  "adam_epsilon", "weight_decay"};

constexpr std::array<std::string_view, 3> kTrainPrefixes = {"train", "stage1", "stage2"};

constexpr std::array<std::string_view, 6> kSynthKeys = {"vocab_size", "languages", "roots",
                                                        "records", "overlap", "noise"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string &key, const std::string &value, const char *what) {
  throw Error(ErrorCode::InvalidArgument, key + " = '" + value + "' is not " + what);
}

std::string format_real(double v) {
  char buf[32];
  for (int prec = 1; prec < 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v)
      return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

bool is_known_key(std::string_view key) {
  if (std::find(kPlainKeys.begin(), kPlainKeys.end(), key) != kPlainKeys.end())
    return true;
  const auto dot = key.find('.');
  if (dot == std::string_view::npos)
    return false;
  const auto head = key.substr(0, dot), tail = key.substr(dot + 1);
  if (head == "field")
    return std::find(kFieldKeys.begin(), kFieldKeys.end(), tail) != kFieldKeys.end();
  if (head == "synth")
    return std::find(kSynthKeys.begin(), kSynthKeys.end(), tail) != kSynthKeys.end();
  if (std::find(kTrainPrefixes.begin(), kTrainPrefixes.end(), head) != kTrainPrefixes.end())
    return std::find(kTrainKeys.begin(), kTrainKeys.end(), tail) != kTrainKeys.end();
  return false;
}

KeyValues parse_config(std::string_view text) {
  KeyValues out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#')
      continue;
    const auto where = "config line " + std::to_string(i + 1) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::InvalidArgument, where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!is_known_key(key))
      throw Error(ErrorCode::InvalidArgument, where + "unknown key '" + key + "'");
    if (!out.emplace(key, value).second)
      throw Error(ErrorCode::InvalidArgument, where + "duplicate key '" + key + "'");
  }
  return out;
}

KeyValues load_config(const std::filesystem::path &path) {
  return parse_config(io::read_file(path));
}

void Settings::set_default(const std::string &key, std::string value) {
  defaults_[key] = std::move(value);
}

void Settings::merge_file(const KeyValues &kv) {
  for (const auto &[k, v] : kv)
    file_[k] = v;
}

void Settings::set_flag(const std::string &key, std::string value) {
  flags_[key] = std::move(value);
}

bool Settings::has(const std::string &key) const { return raw(key).has_value(); }

std::optional<std::string> Settings::raw(const std::string &key) const {
  for (const KeyValues *layer : {&flags_, &file_, &defaults_})
    if (auto it = layer->find(key); it != layer->end())
      return it->second;
  return std::nullopt;
}

std::string_view Settings::source(const std::string &key) const {
  if (flags_.count(key))
    return "flag";
  if (file_.count(key))
    return "config";
  if (defaults_.count(key))
    return "default";
  return "";
}

std::string Settings::str(const std::string &key) const {
  auto v = raw(key);
  if (!v)
    throw Error(ErrorCode::InvalidArgument, "missing required setting '" + key + "'");
  return *v;
}

std::int64_t Settings::integer(const std::string &key) const {
  const auto v = str(key);
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    bad_value(key, v, "an integer");
  return out;
}

std::uint64_t Settings::u64(const std::string &key) const {
  const auto v = str(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    bad_value(key, v, "a non-negative integer");
  return out;
}

double Settings::real(const std::string &key) const {
  const auto v = str(key);
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    bad_value(key, v, "a finite number");
  return out;
}

bool Settings::boolean(const std::string &key) const {
  const auto v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on")
    return true;
  if (v == "false" || v == "0" || v == "no" || v == "off")
    return false;
  bad_value(key, v, "a boolean");
}

std::string Settings::dump(std::initializer_list<std::string_view> omit) const {
  KeyValues merged = defaults_;
  for (const KeyValues *layer : {&file_, &flags_})
    for (const auto &[k, v] : *layer)
      merged[k] = v;
  std::string out;
  for (const auto &[k, v] : merged)
    if (std::find(omit.begin(), omit.end(), k) == omit.end())
      out += k + " = " + v + "\n";
  return out;
}

model::TrainConfig train_config(const Settings &s, std::string_view prefix) {
  const std::string p = std::string(prefix) + ".";
  model::Optimizer opt = model::Optimizer::AdamW;
  if (s.has(p + "optimizer"))
    opt = model::parse_optimizer(s.str(p + "optimizer"));
  auto cfg = model::TrainConfig::defaults(opt);
  if (s.has(p + "learning_rate"))
    cfg.learning_rate = s.real(p + "learning_rate");
  if (s.has(p + "epochs"))
    cfg.epochs = static_cast<std::size_t>(s.u64(p + "epochs"));
  if (s.has(p + "batch_size"))
    cfg.batch_size = static_cast<std::size_t>(s.u64(p + "batch_size"));
  if (s.has(p + "seed"))
    cfg.seed = s.u64(p + "seed");
  if (s.has(p + "l2"))
    cfg.l2 = s.real(p + "l2");
  if (s.has(p + "beta1"))
    cfg.beta1 = s.real(p + "beta1");
  if (s.has(p + "beta2"))
    cfg.beta2 = s.real(p + "beta2");
  if (s.has(p + "adam_epsilon"))
    cfg.adam_epsilon = s.real(p + "adam_epsilon");
  if (s.has(p + "weight_decay"))
    cfg.weight_decay = s.real(p + "weight_decay");
  cfg.validate();
  return cfg;
}

void set_train_defaults(Settings &s, std::string_view prefix, const model::TrainConfig &cfg) {
  const std::string p = std::string(prefix) + ".";
  s.set_default(p + "optimizer", std::string(model::to_string(cfg.optimizer)));
  s.set_default(p + "learning_rate", format_real(cfg.learning_rate));
  s.set_default(p + "epochs", std::to_string(cfg.epochs));
  s.set_default(p + "batch_size", std::to_string(cfg.batch_size));
  s.set_default(p + "seed", std::to_string(cfg.seed));
  s.set_default(p + "l2", format_real(cfg.l2));
  if (cfg.optimizer == model::Optimizer::AdamW) {
    s.set_default(p + "beta1", format_real(cfg.beta1));
    s.set_default(p + "beta2", format_real(cfg.beta2));
    s.set_default(p + "adam_epsilon", format_real(cfg.adam_epsilon));
    s.set_default(p + "weight_decay", format_real(cfg.weight_decay));
  }
}

encode::FeaturizerConfig featurizer_config(const Settings &s) {
  encode::FeaturizerConfig cfg;
  auto narrow = [&](const std::string &key) {
    const auto v = s.u64(key);
    if (v > UINT32_MAX)
      bad_value(key, s.str(key), "a 32-bit value");
    return static_cast<std::uint32_t>(v);
  };
  if (s.has("dims"))
    cfg.dims = narrow("dims");
  if (s.has("n_min"))
    cfg.n_min = narrow("n_min");
  if (s.has("n_max"))
    cfg.n_max = narrow("n_max");
  if (s.has("hash_seed"))
    cfg.seed = s.u64("hash_seed");
  cfg.validate();
  return cfg;
}

FieldNames field_names(const Settings &s) {
  FieldNames f;
  for (auto [key, slot] : {std::pair{"field.id", &f.id}, std::pair{"field.query", &f.query},
                           std::pair{"field.target", &f.target},
                           std::pair{"field.language", &f.language},
                           std::pair{"field.label", &f.label}})
    if (s.has(key))
      *slot = s.str(key);
  return f;
}

SynthSpec synth_spec(const Settings &s) {
  SynthSpec spec;
  if (s.has("synth.vocab_size"))
    spec.vocab_size = static_cast<std::size_t>(s.u64("synth.vocab_size"));
  if (s.has("synth.languages"))
    spec.n_languages = static_cast<std::size_t>(s.u64("synth.languages"));
  if (s.has("synth.roots"))
    spec.n_category_roots = static_cast<std::size_t>(s.u64("synth.roots"));
  if (s.has("synth.records"))
    spec.records_per_task = static_cast<std::size_t>(s.u64("synth.records"));
  if (s.has("synth.overlap"))
    spec.overlap = s.real("synth.overlap");
  if (s.has("synth.noise"))
    spec.label_noise = s.real("synth.noise");
  spec.validate();
  return spec;
}

} // namespace relsplit::config
