#include "relsplit/metrics.hpp"
#include "relsplit/rng.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace relsplit;
using namespace relsplit::metrics;
using testing::code_of;

TEST_SUITE("metrics") {

TEST_CASE("f1_average examples") {
  const auto exact = f1_average(Ratio::from_decimal("0.8936"), Ratio::from_decimal("0.8881"));
  CHECK(exact == Ratio::from_decimal("0.89085"));
  CHECK(exact == Ratio(17817, 20000));
  CHECK(f1_average(0.8936, 0.8881) == doctest::Approx(0.89085).epsilon(1e-15));
  CHECK(f1_average(1.0, 0.0) == 0.5);
  CHECK(f1_average(Ratio(1, 1), Ratio(0, 1)) == Ratio(1, 2));
  auto eng = make_engine(1);
  for (int i = 0; i < 100; ++i) {
    const double x = uniform_real(eng);
    CHECK(f1_average(x, x) == x);
    const Ratio r(static_cast<std::int64_t>(uniform_index(eng, 1000)), 1000);
    CHECK(f1_average(r, r) == r);
  }
  CHECK(code_of([] { f1_average(1.5, 0.2); }) == ErrorCode::OutOfRange);
  CHECK(code_of([] { f1_average(0.5, -0.1); }) == ErrorCode::OutOfRange);
  CHECK(code_of([] { f1_average(Ratio(3, 2), Ratio(0, 1)); }) == ErrorCode::OutOfRange);
}

TEST_CASE("f1_average symmetry and linearity") {
  auto eng = make_engine(2);
  for (int i = 0; i < 200; ++i) {
    const Ratio a(static_cast<std::int64_t>(uniform_index(eng, 97)), 97);
    const Ratio b(static_cast<std::int64_t>(uniform_index(eng, 89)), 89);
    const Ratio c(static_cast<std::int64_t>(uniform_index(eng, 83)), 83);
    CHECK(f1_average(a, b) == f1_average(b, a));
    // avg(a, b) - avg(c, b) = (a - c) / 2, checked as avg(a, b) + c/2 = avg(c, b) + a/2.
    const Ratio half(1, 2);
    CHECK(f1_average(a, b) + half * c == f1_average(c, b) + half * a);
  }
}

TEST_CASE("ratio arithmetic") {
  CHECK(Ratio(2, 4) == Ratio(1, 2));
  CHECK(Ratio(0, 7) == Ratio(0, 1));
  CHECK(Ratio::from_decimal("1") == Ratio(1, 1));
  CHECK(Ratio::from_decimal("0.5") == Ratio(1, 2));
  CHECK(Ratio::from_decimal(".25") == Ratio(1, 4));
  CHECK(Ratio(1, 3).to_double() == 1.0 / 3.0);
  CHECK(Ratio(17817, 20000).to_double() == 0.89085);
  CHECK(code_of([] { Ratio::from_decimal("abc"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { Ratio(1, 0); }) == ErrorCode::OutOfRange);
}

TEST_CASE("confusion examples") {
  LabeledIds truth, flipped;
  for (int i = 0; i < 15; ++i) {
    truth.emplace_back("r" + std::to_string(i), i < 10 ? 1 : 0);
    flipped.emplace_back("r" + std::to_string(i), i < 10 ? 0 : 1);
  }
  const auto perfect = confusion(truth, truth);
  CHECK(perfect == ConfusionCounts{10, 0, 5, 0});
  const auto c = confusion(flipped, truth);
  CHECK(c.tp == perfect.fn);
  CHECK(c.fn == perfect.tp);
  CHECK(c.tn == perfect.fp);
  CHECK(c.fp == perfect.tn);
  CHECK(c.total() == 15);

  auto missing = truth;
  missing.pop_back();
  try {
    confusion(missing, truth);
    FAIL("expected IdMismatch");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::IdMismatch);
    CHECK(e.detail().find("r14") != std::string::npos);
  }
  auto bad = truth;
  bad[0].second = 2;
  CHECK(code_of([&] { confusion(bad, truth); }) == ErrorCode::OutOfRange);
  auto dup = truth;
  dup.push_back(truth[0]);
  CHECK(code_of([&] { confusion(dup, truth); }) == ErrorCode::IdMismatch);
}

TEST_CASE("f1_positive examples") {
  auto m = f1_positive({2, 1, 0, 1});
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1_exact == Ratio(2, 3));
  CHECK(m.support_positive == 3);

  m = f1_positive({0, 0, 10, 0});
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.f1_exact == Ratio(0, 1));

  m = f1_positive({5, 0, 0, 0});
  CHECK(m.f1 == 1.0);
  CHECK(m.f1_exact == Ratio(1, 1));
}

TEST_CASE("f1 properties") {
  auto eng = make_engine(3);
  for (int i = 0; i < 500; ++i) {
    ConfusionCounts c{uniform_index(eng, 50), uniform_index(eng, 50), uniform_index(eng, 50),
                      uniform_index(eng, 50)};
    const auto base = f1_positive(c);
    auto more_tn = c;
    more_tn.tn += 1 + uniform_index(eng, 1000);
    CHECK(f1_positive(more_tn).f1 == base.f1);
    CHECK(f1_positive(more_tn).f1_exact == base.f1_exact);
    auto more_tp = c;
    more_tp.tp += 1 + uniform_index(eng, 10);
    CHECK(f1_positive(more_tp).f1 >= base.f1);
    const double p = base.precision, r = base.recall;
    CHECK(base.f1 == doctest::Approx(p + r > 0 ? 2 * p * r / (p + r) : 0.0));
    CHECK(base.f1_exact.to_double() == doctest::Approx(base.f1));
    CHECK(base.f1 >= 0.0);
    CHECK(base.f1 <= 1.0);
  }
}

TEST_CASE("fold summary") {
  std::map<std::size_t, ConfusionCounts> folds{{0, {8, 2, 10, 0}}, {1, {6, 2, 10, 2}}, {2, {9, 1, 9, 1}}};
  const auto s = summarize(folds);
  const double f0 = 16.0 / 18.0, f1 = 12.0 / 16.0, f2 = 18.0 / 20.0;
  const double mean = (f0 + f1 + f2) / 3.0;
  CHECK(s.mean_f1 == doctest::Approx(mean));
  const double var = ((f0 - mean) * (f0 - mean) + (f1 - mean) * (f1 - mean) + (f2 - mean) * (f2 - mean)) / 2.0;
  CHECK(s.std_f1 == doctest::Approx(std::sqrt(var)));
  CHECK(s.best_fold == 2);
  CHECK(s.best_f1 == doctest::Approx(f2));
  CHECK(s.pooled_counts == ConfusionCounts{23, 5, 29, 3});
  CHECK(s.pooled.f1_exact == Ratio(46, 54));

  std::string task;
  const auto back = parse_report_jsonl(report_jsonl(s, "qi"), &task);
  CHECK(task == "qi");
  CHECK(back.folds == s.folds);
  CHECK(back.mean_f1 == s.mean_f1);
  CHECK(back.pooled.f1_exact == s.pooled.f1_exact);
  CHECK(report_jsonl(back, "qi") == report_jsonl(s, "qi"));
  const auto text = report_text(s, "direct");
  CHECK(text.find("direct") != std::string::npos);
  CHECK(text.find("pooled") != std::string::npos);

  const auto single = summarize({{0, {1, 0, 0, 0}}});
  CHECK(single.std_f1 == 0.0);
}

} // TEST_SUITE
