#include "relsplit/binio.hpp"
#include "relsplit/encode.hpp"
#include "relsplit/rng.hpp"
#include "relsplit/text.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace relsplit;
using namespace relsplit::encode;
using testing::code_of;
using testing::rec;

namespace {

double cosine(const FeatureVector &a, const FeatureVector &b) {
  return a.dot(b) / (a.norm() * b.norm());
}

class CountingProvider final : public TranslationProvider {
public:
  std::string name() const override { return "counting"; }
  std::string translate(std::string_view q, std::string_view lang) override {
    ++calls;
    return "en:" + std::string(lang) + ":" + std::string(q);
  }
  int calls = 0;
};

} // namespace

TEST_SUITE("encode") {

TEST_CASE("build_input examples") {
  const auto seq = build_input("zapatos rojos", "red shoes", "shoes > sneakers");
  CHECK(seq.text == "[CLS] zapatos rojos - red shoes [SEP] shoes > sneakers [SEP]");
  CHECK(seq.q_orig == "zapatos rojos");
  CHECK(seq.q_en == "red shoes");
  CHECK(seq.target == "shoes > sneakers");
  CHECK(build_input("red shoes", "red shoes", "t").text == "[CLS] red shoes - red shoes [SEP] t [SEP]");

  try {
    build_input("a", "b", "");
    FAIL("expected EmptyField");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::EmptyField);
    CHECK(e.detail() == "target");
  }
  CHECK(code_of([] { build_input("", "b", "c"); }) == ErrorCode::EmptyField);
  CHECK(code_of([] { build_input("a", "", "c"); }) == ErrorCode::EmptyField);
  CHECK(code_of([] { build_input("a [SEP] b", "b", "c"); }) == ErrorCode::ReservedMarker);
  CHECK(code_of([] { build_input("a", "[CLS]", "c"); }) == ErrorCode::ReservedMarker);
}

TEST_CASE("build_input markers") {
  auto eng = make_engine(2);
  const std::vector<std::string> words = {"a", "red", "-", "shoes", ">", "kırmızı", "[", "]", "sep"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string parts[3];
    for (auto &p : parts) {
      const auto n = 1 + uniform_index(eng, 4);
      for (std::uint64_t i = 0; i < n; ++i)
        p += (i ? " " : "") + words[uniform_index(eng, words.size())];
    }
    const auto seq = build_input(parts[0], parts[1], parts[2]);
    CHECK(seq.text.rfind("[CLS] ", 0) == 0);
    std::size_t seps = 0;
    for (auto pos = seq.text.find("[SEP]"); pos != std::string::npos; pos = seq.text.find("[SEP]", pos + 1))
      ++seps;
    CHECK(seps == 2);
    CHECK(seq.text.size() >= 5);
    CHECK(seq.text.substr(seq.text.size() - 5) == "[SEP]");
    CHECK(build_input(seq.q_orig, seq.q_en, seq.target).text == seq.text);
  }
}

TEST_CASE("translation providers") {
  IdentityProvider id;
  CHECK(id.translate("kırmızı ayakkabı", "tr") == "kırmızı ayakkabı");

  TableProvider table({{{"tr", "kırmızı ayakkabı"}, "red shoes"}});
  CHECK(table.translate("kırmızı ayakkabı", "tr") == "red shoes");
  CHECK(code_of([&] { table.translate("mavi", "tr"); }) == ErrorCode::MissingEntry);
  TableProvider lenient({}, true);
  CHECK(lenient.translate("mavi", "tr") == "mavi");

  const auto parsed = TableProvider::parse_table("tr\tKırmızı  Ayakkabı\tRed Shoes\n");
  CHECK(parsed.at({"tr", "kırmızı ayakkabı"}) == "red shoes");
  CHECK(code_of([] { TableProvider::parse_table("tr\tonly two\n"); }) == ErrorCode::ParseError);
}

TEST_CASE("caching provider calls through once") {
  testing::TempDir dir;
  const auto cache = dir / "cache.tsv";
  {
    auto inner = std::make_unique<TableProvider>(
        std::map<TableProvider::Key, std::string>{{{"tr", "kırmızı ayakkabı"}, "red shoes"}});
    auto *table = inner.get();
    CachingProvider cached(std::move(inner), cache);
    CHECK(cached.translate("kırmızı ayakkabı", "tr") == "red shoes");
    CHECK(cached.translate("kırmızı ayakkabı", "tr") == "red shoes");
    CHECK(cached.inner_calls() == 1);
    CHECK(table->lookups() == 1);
    CHECK(cached.name() == "table");
  }
  const auto bytes = io::read_file(cache);
  CHECK(bytes == "table\ttr\tkırmızı ayakkabı\tred shoes\n");
  {
    auto inner = std::make_unique<CountingProvider>();
    auto *counting = inner.get();
    CachingProvider cached(std::move(inner), cache);
    CHECK(cached.translate("kırmızı ayakkabı", "tr") == "en:tr:kırmızı ayakkabı");
    CHECK(counting->calls == 1);
  }
  {
    auto inner = std::make_unique<TableProvider>(std::map<TableProvider::Key, std::string>{});
    auto *table = inner.get();
    CachingProvider cached(std::move(inner), cache);
    CHECK(cached.translate("kırmızı ayakkabı", "tr") == "red shoes");
    CHECK(table->lookups() == 0);
  }
}

TEST_CASE("translate_query attaches record id") {
  TableProvider table({});
  const auto r = rec("r9", TaskKind::QueryItem, "mavi", "t", "tr");
  try {
    translate_query(table, r);
    FAIL("expected MissingEntry");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::MissingEntry);
    CHECK(e.detail().find("r9") != std::string::npos);
  }
}

TEST_CASE("symbols treat markers as atoms") {
  const auto s = symbols_of("[CLS] a [SEP]");
  CHECK(s.size() == 5);
  CHECK(s[1] == U' ');
  CHECK(s[2] == U'a');
  CHECK(symbols_of("kı").size() == 2);
}

TEST_CASE("featurize norm and determinism") {
  FeaturizerConfig cfg;
  const auto pair = gen_synthetic(SynthSpec{.records_per_task = 200}, 9);
  IdentityProvider id;
  for (const auto &r : pair.aux.records) {
    const auto seq = build_input(r.cleaned_query, translate_query(id, r), target_text(r));
    const auto v = featurize(seq, cfg);
    CHECK(std::abs(v.norm() - 1.0) < 1e-9);
    CHECK(v.size() == cfg.dims);
    const auto w = featurize(seq, cfg);
    CHECK(v.nonZeros() == w.nonZeros());
    CHECK((v - w).norm() == 0.0);
  }
  const auto zero = featurize_text("a", cfg);
  CHECK(zero.nonZeros() == 0);
  FeaturizerConfig other = cfg;
  other.seed = 1;
  const auto a = featurize_text("[CLS] red shoes - red shoes [SEP] t [SEP]", cfg);
  const auto b = featurize_text("[CLS] red shoes - red shoes [SEP] t [SEP]", other);
  CHECK(cosine(a, b) < 0.5);
}

TEST_CASE("featurize config validation") {
  FeaturizerConfig cfg;
  cfg.dims = 1000;
  CHECK(code_of([&] { featurize_text("abc", cfg); }) == ErrorCode::InvalidArgument);
  cfg.dims = 1u << 7;
  CHECK(code_of([&] { featurize_text("abc", cfg); }) == ErrorCode::InvalidArgument);
  cfg = {};
  cfg.n_min = 3;
  cfg.n_max = 2;
  CHECK(code_of([&] { featurize_text("abc", cfg); }) == ErrorCode::InvalidArgument);
  cfg = {};
  cfg.n_max = 6;
  CHECK(code_of([&] { featurize_text("abc", cfg); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("featurize is permutation sensitive") {
  FeaturizerConfig cfg;
  const std::pair<std::string, std::string> pairs[] = {
      {"[CLS] red shoes - red shoes [SEP] shoes [SEP]", "[CLS] shoes red - shoes red [SEP] shoes [SEP]"},
      {"[CLS] a b - a b [SEP] c [SEP]", "[CLS] b a - b a [SEP] c [SEP]"},
      {"[CLS] q - q [SEP] home > garden [SEP]", "[CLS] q - q [SEP] garden > home [SEP]"}};
  for (const auto &[x, y] : pairs) {
    const auto a = featurize_text(x, cfg), b = featurize_text(y, cfg);
    CHECK((a - b).norm() > 1e-6);
  }
}

TEST_CASE("one-character perturbations stay similar") {
  FeaturizerConfig cfg;
  const auto pair = gen_synthetic(SynthSpec{.records_per_task = 400}, 13);
  auto eng = make_engine(13, 1);
  IdentityProvider id;
  double lo = 1.0, hi = 0.0;
  int measured = 0;
  for (const auto &r : pair.target.records) {
    if (measured == 100)
      break;
    const auto seq = build_input(r.cleaned_query, translate_query(id, r), target_text(r));
    auto cps = text::decode_utf8(seq.text);
    if (cps.size() < 40)
      continue;
    // Change one character inside the item text, keeping the markers intact.
    const auto start = seq.text.size() - seq.target.size() - 6;
    const auto prefix_cps = text::decode_utf8(std::string_view(seq.text).substr(0, start)).size();
    const auto span = cps.size() - prefix_cps - 6;
    const auto pos = prefix_cps + uniform_index(eng, span);
    cps[pos] = cps[pos] == U'q' ? U'x' : U'q';
    const auto a = featurize(seq, cfg), b = featurize_text(text::encode_utf8(cps), cfg);
    const double c = cosine(a, b);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    ++measured;
  }
  REQUIRE(measured == 100);
  MESSAGE("one-character cosine range [" << lo << ", " << hi << "]");
  CHECK(hi < 1.0);
  CHECK(lo > 0.5);
}

TEST_CASE("sign hash is balanced") {
  auto eng = make_engine(77);
  std::size_t plus = 0;
  const std::size_t n = 100000;
  std::vector<std::size_t> buckets(256, 0);
  std::set<std::u32string> seen;
  while (seen.size() < n) {
    std::u32string g;
    const auto len = 2 + uniform_index(eng, 4);
    for (std::uint64_t j = 0; j < len; ++j)
      g.push_back(static_cast<char32_t>(0x61 + uniform_index(eng, 0x500)));
    if (!seen.insert(g).second)
      continue;
    const auto h = ngram_hash(g, 0);
    plus += (h >> 63) == 0;
    ++buckets[h & 255];
  }
  const double frac = double(plus) / n;
  CHECK(frac >= 0.49);
  CHECK(frac <= 0.51);
  for (auto c : buckets) {
    CHECK(c > n / 256 * 0.8);
    CHECK(c < n / 256 * 1.2);
  }
}

TEST_CASE("encode_dataset is thread-count invariant") {
  const auto pair = gen_synthetic(SynthSpec{.records_per_task = 300}, 2);
  IdentityProvider id;
  FeaturizerConfig cfg;
  cfg.dims = 1u << 12;
  const auto one = encode_dataset(pair.aux, id, cfg, 1);
  const auto four = encode_dataset(pair.aux, id, cfg, 4);
  CHECK(one.fingerprint() == four.fingerprint());
  CHECK(serialize_encoded(one) == serialize_encoded(four));
  CHECK(one.size() == pair.aux.size());
  CHECK(one.provider == "identity");
}

TEST_CASE("encoded file round-trip") {
  const auto pair = gen_synthetic(SynthSpec{.records_per_task = 50}, 6);
  IdentityProvider id;
  FeaturizerConfig cfg;
  cfg.dims = 1u << 10;
  cfg.n_max = 3;
  auto ds = encode_dataset(pair.target, id, cfg);
  ds.records[3].label.reset();
  const auto text = serialize_encoded(ds);
  const auto back = parse_encoded(text);
  CHECK(back.config == cfg);
  CHECK(back.size() == ds.size());
  CHECK_FALSE(back.records[3].label.has_value());
  CHECK(serialize_encoded(back) == text);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK((back.records[i].x - ds.records[i].x).norm() < 1e-6);
  CHECK(code_of([] { parse_encoded(""); }) == ErrorCode::FormatError);
  CHECK(code_of([] { parse_encoded("{\"format\":\"other\"}\n"); }) == ErrorCode::FormatError);
}

} // TEST_SUITE
