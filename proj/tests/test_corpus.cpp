#include "relsplit/binio.hpp"
#include "relsplit/corpus.hpp"
#include "relsplit/rng.hpp"
#include "relsplit/text.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace relsplit;
using testing::code_of;

TEST_SUITE("corpus") {

TEST_CASE("clean_text examples") {
  CHECK(text::clean_text("  Red  SHOES ") == std::optional<std::string>("red shoes"));
  CHECK_FALSE(text::clean_text("   ").has_value());
  CHECK_FALSE(text::clean_text("").has_value());
  CHECK(text::clean_text("Kulaklık\t BLUETOOTH") == std::optional<std::string>("kulaklık bluetooth"));
}

TEST_CASE("clean_text unicode whitespace and case") {
  // U+00A0 no-break space, U+3000 ideographic space, U+0130 capital I with dot
  CHECK(*text::clean_text("\xC2\xA0" "A\xE3\x80\x80" "B ") == "a b");
  CHECK(*text::clean_text("\xC4\xB0STANBUL") == "istanbul");
  CHECK(*text::clean_text("ЗАПАТОС Ὀδυσσεύς") == "запатос ὀδυσσεύς");
}

TEST_CASE("clean_text is idempotent") {
  auto eng = make_engine(11);
  const std::vector<std::string> atoms = {"a", "B", " ", "\t", "\n", "Ä", "ß", "İ", "Σ", "ı",
                                          "  ", "x", "Ω", "\xC2\xA0", "Z"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const auto len = uniform_index(eng, 12);
    for (std::uint64_t i = 0; i < len; ++i)
      s += atoms[uniform_index(eng, atoms.size())];
    const auto once = text::clean_text(s);
    if (!once)
      continue;
    REQUIRE(text::clean_text(*once) == once);
    CHECK(once->front() != ' ');
    CHECK(once->back() != ' ');
    CHECK(once->find("  ") == std::string::npos);
  }
}

TEST_CASE("utf8 validation") {
  CHECK(text::is_valid_utf8("plain"));
  CHECK(text::is_valid_utf8("kırmızı"));
  CHECK_FALSE(text::is_valid_utf8("\xC0\xAF"));         // overlong
  CHECK_FALSE(text::is_valid_utf8("\xED\xA0\x80"));     // surrogate
  CHECK_FALSE(text::is_valid_utf8("\xF4\x90\x80\x80")); // above U+10FFFF
  CHECK_FALSE(text::is_valid_utf8("abc\xE2\x82"));      // truncated
}

TEST_CASE("category path examples") {
  CHECK(parse_category_path("Electronics > Audio Devices > Headphones").segments ==
        std::vector<std::string>{"electronics", "audio devices", "headphones"});
  CHECK(parse_category_path("A").segments == std::vector<std::string>{"a"});
  CHECK(code_of([] { parse_category_path("A >  > C"); }) == ErrorCode::EmptySegment);
  CHECK(code_of([] { parse_category_path("   "); }) == ErrorCode::EmptyPath);
  CHECK(code_of([] { parse_category_path("A >"); }) == ErrorCode::EmptySegment);
  CHECK(parse_category_path("a>b", ">").segments == std::vector<std::string>{"a", "b"});
  CHECK(parse_category_path("a | b", "|").segments == std::vector<std::string>{"a", "b"});
}

TEST_CASE("category path render round-trip") {
  auto eng = make_engine(3);
  const std::vector<std::string> words = {"audio", "home garden", "kırmızı", "sneakers", "tv",
                                          "çocuk giyim", "a"};
  for (int trial = 0; trial < 500; ++trial) {
    CategoryPath p;
    const auto depth = 1 + uniform_index(eng, 5);
    for (std::uint64_t i = 0; i < depth; ++i)
      p.segments.push_back(words[uniform_index(eng, words.size())]);
    const auto text = render(p);
    REQUIRE(parse_category_path(text) == p);
    CHECK(render(parse_category_path(text)) == text);
  }
  CategoryPath p{{"e", "a", "h"}};
  CHECK(render_prefix(p, 2) == "e > a");
  CHECK(render_prefix(p, 9) == "e > a > h");
}

TEST_CASE("load_dataset drops empty queries") {
  const std::string text =
      R"({"id":"r1","query":"Red Shoes","target":"shoes > sneakers","language":"en","label":1})"
      "\n"
      R"({"id":"r2","query":"   ","target":"shoes","language":"en","label":0})"
      "\n"
      R"({"id":"r3","query":"zapatos","target":"shoes","language":"es","label":1})"
      "\n"
      R"({"id":"r4","query":"tv","target":"electronics","label":0})"
      "\n";
  const auto r = parse_dataset(text, TaskKind::QueryCategory);
  CHECK(r.dataset.size() == 3);
  CHECK(r.dropped_count == 1);
  CHECK(r.dropped_empty_query == 1);
  CHECK(r.dataset.records[0].cleaned_query == "red shoes");
  CHECK(r.dataset.records[0].query == "Red Shoes");
  CHECK(r.dataset.records[2].language == "und");
  CHECK(r.dataset.languages == std::set<std::string>{"en", "es", "und"});
}

TEST_CASE("load_dataset errors") {
  const std::string dup = R"({"id":"r1","query":"a","target":"b"})"
                          "\n"
                          R"({"id":"r1","query":"c","target":"d"})"
                          "\n";
  try {
    parse_dataset(dup, TaskKind::QueryItem);
    FAIL("expected DuplicateId");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::DuplicateId);
    CHECK(e.detail() == "r1");
  }
  try {
    parse_dataset("{\"id\":\"a\",\"query\":\"q\",\"target\":\"t\"}\n{oops\n", TaskKind::QueryItem);
    FAIL("expected ParseError");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(e.detail().rfind("line 2", 0) == 0);
  }
  CHECK(code_of([] {
          parse_dataset(R"({"id":"a","query":"q","target":"t","label":2})", TaskKind::QueryItem);
        }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_dataset("{\"id\":\"a\",\"query\":\"\xFF\"}", TaskKind::QueryItem); }) ==
        ErrorCode::ParseError);
}

TEST_CASE("load_dataset empty file") {
  testing::TempDir dir;
  io::write_file(dir / "empty.jsonl", "");
  const auto r = load_dataset(dir / "empty.jsonl", TaskKind::QueryItem);
  CHECK(r.dataset.size() == 0);
  CHECK(r.dropped_count == 0);
}

TEST_CASE("custom field names") {
  FieldNames f;
  f.id = "rid";
  f.query = "q";
  f.target = "item";
  f.label = "y";
  const auto r = parse_dataset(R"({"rid":7,"q":"A","item":"B","y":0})", TaskKind::QueryItem, f);
  REQUIRE(r.dataset.size() == 1);
  CHECK(r.dataset.records[0].id == "7");
  CHECK(r.dataset.records[0].label == 0);
  CHECK(serialize_dataset(r.dataset, f).find("\"item\":\"B\"") != std::string::npos);
}

TEST_CASE("dataset save is a fixed point of load") {
  const auto pair = gen_synthetic(SynthSpec{.records_per_task = 200}, 5);
  for (const Dataset *ds : {&pair.aux, &pair.target}) {
    const auto bytes = serialize_dataset(*ds);
    const auto back = parse_dataset(bytes, ds->task);
    CHECK(back.dataset.records == ds->records);
    CHECK(serialize_dataset(back.dataset) == bytes);
  }
}

TEST_CASE("synth determinism") {
  SynthSpec spec;
  spec.records_per_task = 100;
  const auto a = gen_synthetic(spec, 7), b = gen_synthetic(spec, 7);
  CHECK(serialize_dataset(a.aux) == serialize_dataset(b.aux));
  CHECK(serialize_dataset(a.target) == serialize_dataset(b.target));
  const auto c = gen_synthetic(spec, 8);
  CHECK(serialize_dataset(a.target) != serialize_dataset(c.target));
  CHECK(a.aux.task == TaskKind::QueryCategory);
  CHECK(a.target.task == TaskKind::QueryItem);
  CHECK(a.aux.size() == 100);
  CHECK(a.target.size() == 100);
}

std::set<std::string> vocabulary(const Dataset &ds) {
  std::set<std::string> out;
  for (const auto &r : ds.records) {
    out.merge(content_tokens(r.cleaned_query));
    out.merge(content_tokens(r.cleaned_target));
  }
  return out;
}

TEST_CASE("synth overlap zero shares no tokens") {
  SynthSpec spec;
  spec.overlap = 0.0;
  for (std::uint64_t seed : {1, 7, 42}) {
    const auto pair = gen_synthetic(spec, seed);
    const auto va = vocabulary(pair.aux), vt = vocabulary(pair.target);
    std::size_t shared = 0;
    for (const auto &t : va)
      shared += vt.count(t);
    CHECK(shared == 0);
  }
  spec.overlap = 1.0;
  const auto pair = gen_synthetic(spec, 7);
  const auto va = vocabulary(pair.aux), vt = vocabulary(pair.target);
  std::size_t shared = 0;
  for (const auto &t : vt)
    shared += va.count(t);
  CHECK(shared > vt.size() / 2);
}

TEST_CASE("synth planted rule recovers labels") {
  const auto pair = gen_synthetic(SynthSpec{}, 7);
  for (const Dataset *ds : {&pair.aux, &pair.target}) {
    std::size_t tp = 0, fp = 0, fn = 0, pos = 0;
    for (const auto &r : ds->records) {
      const int rule = overlap_rule(r);
      pos += *r.label;
      tp += rule == 1 && *r.label == 1;
      fp += rule == 1 && *r.label == 0;
      fn += rule == 0 && *r.label == 1;
    }
    const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
    CHECK(f1 >= 0.99);
    const double rate = double(pos) / ds->size();
    CHECK(rate > 0.2);
    CHECK(rate < 0.8);
  }
}

TEST_CASE("synth invalid spec") {
  SynthSpec spec;
  spec.overlap = 1.5;
  CHECK(code_of([&] { gen_synthetic(spec, 1); }) == ErrorCode::InvalidSpec);
  spec = {};
  spec.label_noise = -0.1;
  CHECK(code_of([&] { gen_synthetic(spec, 1); }) == ErrorCode::InvalidSpec);
  spec = {};
  spec.records_per_task = 0;
  CHECK(code_of([&] { gen_synthetic(spec, 1); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("synth label noise flips labels") {
  SynthSpec spec;
  spec.records_per_task = 2000;
  spec.label_noise = 0.2;
  const auto pair = gen_synthetic(spec, 3);
  std::size_t flipped = 0;
  for (const auto &r : pair.target.records)
    flipped += overlap_rule(r) != *r.label;
  const double rate = double(flipped) / pair.target.size();
  CHECK(rate > 0.15);
  CHECK(rate < 0.25);
}

} // TEST_SUITE
