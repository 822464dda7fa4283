#include "relsplit/corpus.hpp"

#include "relsplit/error.hpp"
#include "relsplit/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <unordered_set>

namespace relsplit {

// Planted-signal generator. Every content token has a latent role:
//   anchor     - appears in queries and in relevant targets
//   distractor - appears only in irrelevant targets
//   neutral    - filler and taxonomy names, label-independent
// A relevant target always copies at least one query token, an irrelevant one
// never does, so the token-overlap rule recovers the planted labels exactly.
// Tokens are spelled from letter pools that are disjoint between the shared
// vocabulary and each task's private vocabulary, so at overlap 0 the two
// tasks share no character n-grams inside tokens either.

void SynthSpec::validate() const {
  auto bad = [](const std::string &what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (n_languages < 1 || n_languages > 16)
    bad("n_languages must be in [1, 16]");
  if (n_category_roots < 1 || n_category_roots > 64)
    bad("n_category_roots must be in [1, 64]");
  if (vocab_size < 20 * n_languages || vocab_size < 50 * n_category_roots || vocab_size > 200000)
    bad("vocab_size must be in [max(20*n_languages, 50*n_category_roots), 200000]");
  if (records_per_task < 1 || records_per_task > 10000000)
    bad("records_per_task must be in [1, 1e7]");
  if (!(overlap >= 0.0 && overlap <= 1.0))
    bad("overlap must be in [0, 1]");
  if (!(label_noise >= 0.0 && label_noise <= 0.5))
    bad("label_noise must be in [0, 0.5]");
}

namespace {

struct Letter {
  const char *lower;
  const char *upper;
};

struct LetterPool {
  std::vector<Letter> consonants;
  std::vector<Letter> vowels;
};

LetterPool pool_of(std::initializer_list<const char *> consonants,
                   std::initializer_list<const char *> vowels) {
  // Entries alternate lower, upper.
  auto pairs = [](std::initializer_list<const char *> l) {
    std::vector<Letter> out;
    for (auto it = l.begin(); it != l.end(); it += 2)
      out.push_back({it[0], it[1]});
    return out;
  };
  return {pairs(consonants), pairs(vowels)};
}

const LetterPool &shared_letters() {
  static const LetterPool p = pool_of(
      {"b", "B", "c", "C", "d", "D", "f", "F", "g", "G", "h", "H", "j", "J", "k", "K", "l", "L",
       "m", "M", "n", "N", "p", "P", "r", "R", "s", "S", "t", "T", "v", "V", "w", "W", "z", "Z"},
      {"a", "A", "e", "E", "i", "I", "o", "O", "u", "U"});
  return p;
}

const LetterPool &aux_letters() {
  static const LetterPool p = pool_of(
      {"б", "Б", "в", "В", "г", "Г", "д", "Д", "ж", "Ж", "з", "З", "к", "К", "л", "Л",
       "м", "М", "н", "Н", "п", "П", "р", "Р", "с", "С", "т", "Т", "ф", "Ф", "х", "Х"},
      {"а", "А", "е", "Е", "и", "И", "о", "О", "у", "У"});
  return p;
}

const LetterPool &target_letters() {
  static const LetterPool p = pool_of(
      {"β", "Β", "γ", "Γ", "δ", "Δ", "ζ", "Ζ", "θ", "Θ", "κ", "Κ", "λ", "Λ", "μ", "Μ",
       "ν", "Ν", "ξ", "Ξ", "π", "Π", "ρ", "Ρ", "σ", "Σ", "τ", "Τ", "φ", "Φ", "χ", "Χ"},
      {"α", "Α", "ε", "Ε", "ι", "Ι", "ο", "Ο", "υ", "Υ"});
  return p;
}

constexpr std::array<const char *, 16> kLanguages = {"en", "es", "fr", "de", "pt", "tr",
                                                     "ko", "ja", "vi", "th", "id", "ar",
                                                     "ru", "it", "pl", "nl"};

struct Token {
  std::vector<Letter> letters;
  std::string lower;
  std::size_t language = 0;
};

std::vector<Token> make_tokens(const LetterPool &pool, std::size_t count, std::size_t n_languages,
                               std::mt19937_64 &eng) {
  std::vector<Token> out;
  std::unordered_set<std::string> used;
  out.reserve(count);
  while (out.size() < count) {
    Token t;
    const std::size_t syllables = 2 + uniform_index(eng, 2);
    for (std::size_t s = 0; s < syllables; ++s) {
      t.letters.push_back(pool.consonants[uniform_index(eng, pool.consonants.size())]);
      t.letters.push_back(pool.vowels[uniform_index(eng, pool.vowels.size())]);
    }
    for (const auto &l : t.letters)
      t.lower += l.lower;
    t.language = uniform_index(eng, n_languages);
    if (used.insert(t.lower).second)
      out.push_back(std::move(t));
  }
  return out;
}

struct RoleSizes {
  std::size_t anchors, distractors, neutrals;
};

RoleSizes role_sizes(const SynthSpec &spec) {
  const std::size_t neutrals = std::max(spec.vocab_size / 5, 10 * spec.n_category_roots + 4);
  const std::size_t anchors = (spec.vocab_size - neutrals) / 2;
  return {anchors, spec.vocab_size - neutrals - anchors, neutrals};
}

struct Vocabulary {
  std::vector<std::vector<const Token *>> anchors;     // by language
  std::vector<std::vector<const Token *>> distractors; // by language
  std::vector<const Token *> neutrals;
};

struct SharedPool {
  std::vector<Token> anchors, distractors, neutrals;
};

// Takes the first round(overlap * n) tokens from the shared list and tops up
// from the private list.
std::vector<const Token *> mix(const std::vector<Token> &shared, const std::vector<Token> &priv,
                               std::size_t n, double overlap) {
  const auto n_shared = static_cast<std::size_t>(std::llround(overlap * static_cast<double>(n)));
  std::vector<const Token *> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n_shared; ++i)
    out.push_back(&shared[i]);
  for (std::size_t i = 0; i < n - n_shared; ++i)
    out.push_back(&priv[i]);
  return out;
}

Vocabulary build_vocabulary(const SynthSpec &spec, const SharedPool &shared,
                            const SharedPool &priv) {
  const auto sizes = role_sizes(spec);
  Vocabulary v;
  v.anchors.resize(spec.n_languages);
  v.distractors.resize(spec.n_languages);
  for (const Token *t : mix(shared.anchors, priv.anchors, sizes.anchors, spec.overlap))
    v.anchors[t->language].push_back(t);
  for (const Token *t : mix(shared.distractors, priv.distractors, sizes.distractors, spec.overlap))
    v.distractors[t->language].push_back(t);
  v.neutrals = mix(shared.neutrals, priv.neutrals, sizes.neutrals, spec.overlap);
  // Languages that drew no token borrow from the next non-empty one.
  for (auto *lists : {&v.anchors, &v.distractors}) {
    for (std::size_t l = 0; l < lists->size(); ++l) {
      for (std::size_t k = 1; (*lists)[l].empty() && k < lists->size(); ++k)
        (*lists)[l] = (*lists)[(l + k) % lists->size()];
      if ((*lists)[l].empty())
        throw Error(ErrorCode::InvalidSpec, "vocabulary too small for the language count");
    }
  }
  return v;
}

SharedPool make_pool(const LetterPool &letters, const RoleSizes &sizes, std::size_t n_languages,
                     std::mt19937_64 &eng) {
  auto all = make_tokens(letters, sizes.anchors + sizes.distractors + sizes.neutrals,
                         n_languages, eng);
  SharedPool p;
  auto it = all.begin();
  p.anchors.assign(std::make_move_iterator(it), std::make_move_iterator(it + sizes.anchors));
  it += sizes.anchors;
  p.distractors.assign(std::make_move_iterator(it),
                       std::make_move_iterator(it + sizes.distractors));
  it += sizes.distractors;
  p.neutrals.assign(std::make_move_iterator(it), std::make_move_iterator(all.end()));
  return p;
}

// Raw-text noise so that cleaning has work to do.
class RawWriter {
public:
  explicit RawWriter(std::mt19937_64 &eng) : eng_(eng) {}

  std::string token(const Token &t) {
    const double u = uniform_real(eng_);
    std::string out;
    for (std::size_t i = 0; i < t.letters.size(); ++i) {
      const bool upper = (u < 0.05) || (u < 0.20 && i == 0);
      out += upper ? t.letters[i].upper : t.letters[i].lower;
    }
    return out;
  }

  std::string separator() {
    const double u = uniform_real(eng_);
    if (u < 0.04)
      return "\t";
    if (u < 0.12)
      return "  ";
    return " ";
  }

  std::string phrase(const std::vector<const Token *> &tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0)
        out += separator();
      out += token(*tokens[i]);
    }
    return out;
  }

  std::string pad(std::string s) {
    if (bernoulli(eng_, 0.05))
      s.insert(0, " ");
    if (bernoulli(eng_, 0.05))
      s += "  ";
    return s;
  }

  std::string path_delimiter() {
    const double u = uniform_real(eng_);
    if (u < 0.10)
      return ">";
    if (u < 0.20)
      return "  > ";
    return " > ";
  }

private:
  std::mt19937_64 &eng_;
};

// Distinct picks from `from`, skipping anything in `exclude`.
std::vector<const Token *> pick(const std::vector<const Token *> &from, std::size_t n,
                                std::mt19937_64 &eng,
                                const std::vector<const Token *> &exclude = {}) {
  std::vector<const Token *> out;
  std::size_t attempts = 0;
  while (out.size() < n && attempts < 50 * (n + 1)) {
    ++attempts;
    const Token *t = from[uniform_index(eng, from.size())];
    if (std::find(out.begin(), out.end(), t) != out.end() ||
        std::find(exclude.begin(), exclude.end(), t) != exclude.end())
      continue;
    out.push_back(t);
  }
  return out;
}

double relevance_rate(std::size_t language, std::size_t n_languages) {
  if (n_languages == 1)
    return 0.5;
  return 0.3 + 0.4 * static_cast<double>(language) / static_cast<double>(n_languages - 1);
}

std::string make_id(TaskKind task, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06zu", task == TaskKind::QueryCategory ? "qc" : "qi", i);
  return buf;
}

struct Taxonomy {
  std::vector<const Token *> roots;
  std::vector<std::vector<const Token *>> mids; // per root
  std::vector<std::vector<const Token *>> subs; // per root, shared by its mids
};

Taxonomy build_taxonomy(const Vocabulary &v, std::size_t n_roots) {
  Taxonomy tx;
  std::size_t next = 0;
  for (std::size_t r = 0; r < n_roots; ++r)
    tx.roots.push_back(v.neutrals[next++]);
  tx.mids.resize(n_roots);
  tx.subs.resize(n_roots);
  for (std::size_t r = 0; r < n_roots; ++r) {
    for (int m = 0; m < 3; ++m)
      tx.mids[r].push_back(v.neutrals[next++]);
    for (int s = 0; s < 6; ++s)
      tx.subs[r].push_back(v.neutrals[next++]);
  }
  return tx;
}

Dataset generate_task(TaskKind task, const SynthSpec &spec, const Vocabulary &vocab,
                      std::mt19937_64 &eng) {
  Dataset ds;
  ds.task = task;
  RawWriter raw(eng);
  const Taxonomy tx = build_taxonomy(vocab, spec.n_category_roots);
  // Filler excludes taxonomy names so QI items never look like paths.
  const std::vector<const Token *> filler(vocab.neutrals.begin() + 10 * spec.n_category_roots,
                                          vocab.neutrals.end());

  std::size_t n = 0;
  while (n < spec.records_per_task) {
    const std::size_t lang = uniform_index(eng, spec.n_languages);
    const auto &anchors = vocab.anchors[lang];
    const auto &distractors = vocab.distractors[lang];
    const auto query_tokens = pick(anchors, 1 + uniform_index(eng, 2), eng);
    const std::string query = raw.pad(raw.phrase(query_tokens));
    const std::size_t items = 1 + uniform_index(eng, 5);

    for (std::size_t j = 0; j < items && n < spec.records_per_task; ++j) {
      const bool relevant = bernoulli(eng, relevance_rate(lang, spec.n_languages));
      std::string target;
      if (task == TaskKind::QueryItem) {
        std::vector<const Token *> body;
        if (relevant) {
          auto copied = query_tokens;
          shuffle(std::span(copied), eng);
          copied.resize(1 + uniform_index(eng, copied.size()));
          body = copied;
          for (const Token *t : pick(anchors, 1 + uniform_index(eng, 2), eng, query_tokens))
            body.push_back(t);
        } else {
          body = pick(distractors, 2 + uniform_index(eng, 3), eng);
        }
        for (const Token *t : pick(filler, uniform_index(eng, 3), eng))
          body.push_back(t);
        shuffle(std::span(body), eng);
        target = raw.pad(raw.phrase(body));
      } else {
        std::vector<const Token *> leaf;
        if (relevant) {
          leaf.push_back(query_tokens[uniform_index(eng, query_tokens.size())]);
          if (bernoulli(eng, 0.5))
            for (const Token *t : pick(anchors, 1, eng, query_tokens))
              leaf.push_back(t);
        } else {
          leaf = pick(distractors, 1 + uniform_index(eng, 2), eng);
        }
        const std::size_t root = uniform_index(eng, tx.roots.size());
        const double depth_roll = uniform_real(eng);
        std::vector<std::string> segments{raw.token(*tx.roots[root])};
        if (depth_roll >= 0.10) {
          segments.push_back(raw.token(*tx.mids[root][uniform_index(eng, tx.mids[root].size())]));
          if (depth_roll >= 0.85)
            segments.push_back(
                raw.token(*tx.subs[root][uniform_index(eng, tx.subs[root].size())]));
        }
        segments.push_back(raw.phrase(leaf));
        for (std::size_t s = 0; s < segments.size(); ++s) {
          if (s > 0)
            target += raw.path_delimiter();
          target += segments[s];
        }
        target = raw.pad(target);
      }

      int label = relevant ? 1 : 0;
      if (spec.label_noise > 0.0 && bernoulli(eng, spec.label_noise))
        label = 1 - label;
      auto rec = make_record(make_id(task, n), task, query, target, kLanguages[lang], label);
      if (!rec)
        throw Error(ErrorCode::InvariantViolation, "generator produced an empty record");
      ds.push_back(std::move(*rec));
      ++n;
    }
  }
  return ds;
}

} // namespace

SynthPair gen_synthetic(const SynthSpec &spec, std::uint64_t seed) {
  spec.validate();
  const RoleSizes sizes = role_sizes(spec);

  auto shared_eng = make_engine(seed, 1);
  auto aux_vocab_eng = make_engine(seed, 2);
  auto target_vocab_eng = make_engine(seed, 3);
  const SharedPool shared = make_pool(shared_letters(), sizes, spec.n_languages, shared_eng);
  const SharedPool aux_priv = make_pool(aux_letters(), sizes, spec.n_languages, aux_vocab_eng);
  const SharedPool target_priv =
      make_pool(target_letters(), sizes, spec.n_languages, target_vocab_eng);

  const Vocabulary aux_vocab = build_vocabulary(spec, shared, aux_priv);
  const Vocabulary target_vocab = build_vocabulary(spec, shared, target_priv);

  auto aux_eng = make_engine(seed, 4);
  auto target_eng = make_engine(seed, 5);
  SynthPair out;
  out.aux = generate_task(TaskKind::QueryCategory, spec, aux_vocab, aux_eng);
  out.target = generate_task(TaskKind::QueryItem, spec, target_vocab, target_eng);
  return out;
}

} // namespace relsplit
