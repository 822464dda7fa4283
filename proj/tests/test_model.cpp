#include "relsplit/binio.hpp"
#include "relsplit/model.hpp"
#include "relsplit/rng.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace relsplit;
using namespace relsplit::model;
using encode::EncodedDataset;
using encode::FeatureVector;
using testing::code_of;

namespace {

using Dense = VectorX<double>;

Dense random_dense(std::mt19937_64 &eng, Eigen::Index dims, double scale) {
  Dense x(dims);
  for (Eigen::Index i = 0; i < dims; ++i)
    x[i] = scale * (2.0 * uniform_real(eng) - 1.0);
  return x;
}

EncodedDataset encode_target(const Dataset &ds, std::uint32_t dims = 1u << 12) {
  encode::IdentityProvider id;
  encode::FeaturizerConfig cfg;
  cfg.dims = dims;
  return encode::encode_dataset(ds, id, cfg);
}

double f1_of(const std::vector<Prediction> &preds, const EncodedDataset &ds) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int y = *ds.records[i].label;
    tp += preds[i].label == 1 && y == 1;
    fp += preds[i].label == 1 && y == 0;
    fn += preds[i].label == 0 && y == 1;
  }
  return tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("predict_proba examples") {
  ModelParams p(8);
  auto eng = make_engine(1);
  CHECK(predict_proba(p, random_dense(eng, 8, 1.0)) == 0.5);

  Dense x = Dense::Zero(8);
  x[0] = 1.0;
  p.w[0] = 50.0;
  const double hi = predict_proba(p, x);
  CHECK(std::isfinite(hi));
  CHECK(hi > 1.0 - 1e-9);
  CHECK(hi < 1.0);
  p.w[0] = -1e4;
  const double lo = predict_proba(p, x);
  CHECK(lo > 0.0);
  CHECK(std::isfinite(lo));
  p.w[0] = 1e4;
  CHECK(predict_proba(p, x) < 1.0);

  CHECK(code_of([&] { predict_proba(p, Dense::Zero(9).eval()); }) == ErrorCode::DimMismatch);
  FeatureVector sparse(16);
  CHECK(code_of([&] { predict_proba(p, sparse); }) == ErrorCode::DimMismatch);
}

TEST_CASE("loss anchors") {
  auto eng = make_engine(2);
  ModelParams p(16);
  std::vector<Dense> xs;
  for (int i = 0; i < 10; ++i)
    xs.push_back(random_dense(eng, 16, 1.0));
  std::vector<Sample<Dense>> batch;
  for (int i = 0; i < 10; ++i)
    batch.push_back({&xs[i], i % 2});
  CHECK(std::abs(batch_loss(p, std::span<const Sample<Dense>>(batch)) - std::log(2.0)) <= 1e-12);

  // Single positive at p = 0.25: logit = ln(1/3).
  ModelParams q(1);
  q.b = std::log(1.0 / 3.0);
  Dense one = Dense::Zero(1);
  std::vector<Sample<Dense>> single{{&one, 1}};
  CHECK(std::abs(batch_loss(q, std::span<const Sample<Dense>>(single)) - 1.386294) <= 1e-6);

  // Perfect saturated predictions hit the clamp floor.
  q.b = 100.0;
  const double floor = batch_loss(q, std::span<const Sample<Dense>>(single));
  CHECK(floor > 0.0);
  CHECK(floor < 2.8e-11);
  CHECK(floor == doctest::Approx(-std::log(1.0 - 1e-12)).epsilon(1e-6));

  std::vector<Sample<Dense>> empty;
  CHECK(code_of([&] { batch_loss(q, std::span<const Sample<Dense>>(empty)); }) == ErrorCode::EmptyBatch);
  CHECK(code_of([&] { batch_grad(q, std::span<const Sample<Dense>>(empty)); }) == ErrorCode::EmptyBatch);
}

TEST_CASE("loss is non-negative") {
  auto eng = make_engine(3);
  for (int trial = 0; trial < 200; ++trial) {
    ModelParams p;
    p.w = random_dense(eng, 8, 20.0);
    p.b = 20.0 * (uniform_real(eng) - 0.5);
    std::vector<Dense> xs;
    for (int i = 0; i < 5; ++i)
      xs.push_back(random_dense(eng, 8, 3.0));
    std::vector<Sample<Dense>> batch;
    for (int i = 0; i < 5; ++i)
      batch.push_back({&xs[i], bernoulli(eng, 0.5)});
    const double l = batch_loss(p, std::span<const Sample<Dense>>(batch), 0.01);
    CHECK(l >= 0.0);
    CHECK(std::isfinite(l));
  }
}

TEST_CASE("gradient examples") {
  ModelParams p(4);
  Dense x = Dense::Ones(4);
  std::vector<Sample<Dense>> batch{{&x, 1}, {&x, 0}};
  const auto g = batch_grad(p, std::span<const Sample<Dense>>(batch));
  CHECK(g.b == 0.0);
  CHECK(g.w.isZero());

  // With y equal to p exactly nothing but the regularizer remains: use a
  // batch whose residuals cancel (two identical x, labels 1 and 0, p = 0.5).
  auto eng = make_engine(4);
  ModelParams q;
  q.w = random_dense(eng, 4, 1.0);
  q.b = -q.w.dot(x);
  const auto gr = batch_grad(q, std::span<const Sample<Dense>>(batch), 0.1);
  CHECK((gr.w - 0.1 * q.w).norm() < 1e-15);
  CHECK(std::abs(gr.b) < 1e-15);
}

TEST_CASE("gradient matches central differences") {
  auto eng = make_engine(5);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index dims = 64;
    ModelParams p;
    p.w = random_dense(eng, dims, 0.5);
    p.b = uniform_real(eng) - 0.5;
    const double l2 = trial % 2 ? 0.05 : 0.0;
    std::vector<Dense> xs;
    const auto n = 1 + uniform_index(eng, 16);
    for (std::uint64_t i = 0; i < n; ++i)
      xs.push_back(random_dense(eng, dims, 1.0));
    std::vector<Sample<Dense>> batch;
    for (std::uint64_t i = 0; i < n; ++i)
      batch.push_back({&xs[i], bernoulli(eng, 0.5)});
    const std::span<const Sample<Dense>> view(batch);
    const auto g = batch_grad(p, view, l2);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); };
    for (int c = 0; c < 20; ++c) {
      const auto j = static_cast<Eigen::Index>(uniform_index(eng, dims));
      ModelParams plus = p, minus = p;
      plus.w[j] += h;
      minus.w[j] -= h;
      const double fd = (batch_loss(plus, view, l2) - batch_loss(minus, view, l2)) / (2 * h);
      CHECK(rel(fd, g.w[j]) < 1e-4);
    }
    ModelParams plus = p, minus = p;
    plus.b += h;
    minus.b -= h;
    CHECK(rel((batch_loss(plus, view, l2) - batch_loss(minus, view, l2)) / (2 * h), g.b) < 1e-4);
  }
}

TEST_CASE("sparse and dense features agree") {
  auto eng = make_engine(6);
  ModelParams p;
  p.w = random_dense(eng, 32, 1.0);
  p.b = 0.3;
  FeatureVector s(32);
  s.insert(3) = 0.5;
  s.insert(17) = -0.25;
  const Dense d = Dense(s);
  CHECK(logit(p, s) == doctest::Approx(logit(p, d)));
  std::vector<Sample<FeatureVector>> sb{{&s, 1}};
  std::vector<Sample<Dense>> db{{&d, 1}};
  const auto gs = batch_grad(p, std::span<const Sample<FeatureVector>>(sb), 0.1);
  const auto gd = batch_grad(p, std::span<const Sample<Dense>>(db), 0.1);
  CHECK((gs.w - gd.w).norm() < 1e-15);
}

TEST_CASE("train with zero epochs returns init") {
  const auto ds = encode_target(gen_synthetic(SynthSpec{.records_per_task = 60}, 1).target);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto zero = train(ds, cfg);
  CHECK(zero.params.w.isZero());
  CHECK(zero.params.b == 0.0);

  TrainConfig one;
  one.epochs = 2;
  const auto init = train(ds, one);
  const auto same = train(ds, cfg, &init);
  CHECK(same.params.w == init.params.w);
  CHECK(same.params.b == init.params.b);
  CHECK(same.provenance.size() == 2);
}

TEST_CASE("train is deterministic") {
  const auto ds = encode_target(gen_synthetic(SynthSpec{.records_per_task = 150}, 2).target);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 9;
  const auto a = train(ds, cfg), b = train(ds, cfg);
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
  cfg.seed = 10;
  CHECK(serialize_checkpoint(train(ds, cfg)) != serialize_checkpoint(a));
  for (Optimizer o : {Optimizer::SGD, Optimizer::AdamW}) {
    auto c = TrainConfig::defaults(o);
    c.epochs = 3;
    CHECK(serialize_checkpoint(train(ds, c)) == serialize_checkpoint(train(ds, c)));
  }
}

TEST_CASE("defaults fit a separable set") {
  const auto pair = gen_synthetic(SynthSpec{.records_per_task = 200}, 7);
  for (const auto &r : pair.target.records)
    REQUIRE(overlap_rule(r) == *r.label);
  const auto ds = encode_target(pair.target, 1u << 16);
  for (Optimizer o : {Optimizer::AdamW, Optimizer::SGD}) {
    const auto ckpt = train(ds, TrainConfig::defaults(o));
    const double f1 = f1_of(classify(ckpt, ds), ds);
    MESSAGE(model::to_string(o) << " training F1 " << f1);
    CHECK(f1 >= 0.99);
  }
}

TEST_CASE("trailing loss average does not increase at defaults") {
  const auto pair = gen_synthetic(SynthSpec{.records_per_task = 200}, 7);
  const auto ds = encode_target(pair.target, 1u << 16);
  for (Optimizer o : {Optimizer::AdamW, Optimizer::SGD}) {
    const auto cfg = TrainConfig::defaults(o);
    const auto ckpt = train(ds, cfg);
    const auto &losses = ckpt.provenance.back().epoch_losses;
    REQUIRE(losses.size() == cfg.epochs);
    for (std::size_t e = 3; e < losses.size(); ++e) {
      const double prev = (losses[e - 3] + losses[e - 2] + losses[e - 1]) / 3.0;
      const double cur = (losses[e - 2] + losses[e - 1] + losses[e]) / 3.0;
      CHECK(cur <= prev);
    }
  }
}

TEST_CASE("train checks inputs") {
  auto ds = encode_target(gen_synthetic(SynthSpec{.records_per_task = 20}, 3).target);
  auto cfg = TrainConfig{};
  cfg.epochs = 1;
  auto other = ds;
  other.config.seed = 5;
  const auto init = train(other, cfg);
  CHECK(code_of([&] { train(ds, cfg, &init); }) == ErrorCode::ConfigMismatch);
  CHECK(code_of([&] { tapt_train(other, ds, cfg, cfg); }) == ErrorCode::ConfigMismatch);
  auto bad = ds;
  bad.records[0].x = FeatureVector(8);
  CHECK(code_of([&] { train(bad, cfg); }) == ErrorCode::DimMismatch);
  auto unlabeled = ds;
  unlabeled.records[1].label.reset();
  CHECK(code_of([&] { train(unlabeled, cfg); }) == ErrorCode::InvalidArgument);
  cfg.learning_rate = -1;
  CHECK(code_of([&] { train(ds, cfg); }) == ErrorCode::InvalidArgument);
  cfg = TrainConfig::defaults(Optimizer::SGD);
  cfg.learning_rate = 1e300;
  cfg.epochs = 50;
  CHECK(code_of([&] { train(ds, cfg); }) == ErrorCode::NonFiniteLoss);
}

TEST_CASE("tapt with an empty first stage is direct training") {
  const auto pair = gen_synthetic(SynthSpec{.records_per_task = 120}, 4);
  const auto aux = encode_target(pair.aux), target = encode_target(pair.target);
  TrainConfig s1, s2;
  s1.epochs = 0;
  s2.epochs = 4;
  s2.seed = 3;
  const auto tapt = tapt_train(aux, target, s1, s2);
  const auto direct = train(target, s2);
  CHECK(tapt.params.w == direct.params.w);
  CHECK(tapt.params.b == direct.params.b);
  REQUIRE(tapt.provenance.size() == 2);
  CHECK(tapt.provenance[0].dataset_fingerprint == aux.fingerprint());
  CHECK(tapt.provenance[1].dataset_fingerprint == target.fingerprint());

  s1.epochs = 3;
  const auto pre = train(aux, s1);
  CHECK(serialize_checkpoint(tapt_train(aux, target, s1, s2)) ==
        serialize_checkpoint(train(target, s2, &pre)));
}

TEST_CASE("classify thresholds") {
  const auto ds = encode_target(gen_synthetic(SynthSpec{.records_per_task = 30}, 5).target);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto uniform = train(ds, cfg);
  for (const auto &p : classify(uniform, ds, 0.5)) {
    CHECK(p.probability == 0.5);
    CHECK(p.label == 1);
  }
  for (const auto &p : classify(uniform, ds, 1.0 - 1e-9))
    CHECK(p.label == 0);
  CHECK(code_of([&] { classify(uniform, ds, 1.0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { classify(uniform, ds, 0.0); }) == ErrorCode::InvalidArgument);
  auto other = ds;
  other.config.n_max = 3;
  CHECK(code_of([&] { classify(uniform, other); }) == ErrorCode::ConfigMismatch);
}

TEST_CASE("tuned threshold maximizes F1") {
  const auto ds = encode_target(gen_synthetic(SynthSpec{.records_per_task = 300}, 6).target);
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto ckpt = train(ds, cfg);
  const double t = tune_threshold(ckpt, ds);
  CHECK(t > 0.0);
  CHECK(t < 1.0);
  const double tuned = f1_of(classify(ckpt, ds, t), ds);
  for (double other : {0.1, 0.3, 0.5, 0.7, 0.9})
    CHECK(tuned >= f1_of(classify(ckpt, ds, other), ds));
}

TEST_CASE("checkpoint round-trip") {
  testing::TempDir dir;
  const auto ds = encode_target(gen_synthetic(SynthSpec{.records_per_task = 80}, 7).target);
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto ckpt = train(ds, cfg);
  const auto bytes = serialize_checkpoint(ckpt);
  const auto back = parse_checkpoint(bytes);
  CHECK(back == ckpt);
  CHECK(serialize_checkpoint(back) == bytes);
  save_checkpoint(dir / "m.ckpt", ckpt);
  CHECK(io::read_file(dir / "m.ckpt") == bytes);
  CHECK(load_checkpoint(dir / "m.ckpt") == ckpt);
  CHECK(bytes.substr(0, 4) == "RSCK");

  auto corrupt = bytes;
  corrupt[10] ^= 1;
  CHECK(code_of([&] { parse_checkpoint(corrupt); }) == ErrorCode::FormatError);
  CHECK(code_of([&] { parse_checkpoint(bytes.substr(0, 12)); }) == ErrorCode::FormatError);
}

TEST_CASE("predictions file round-trip") {
  const std::vector<Prediction> preds{{"a", 1, 0.75}, {"b", 0, 0.1}, {"c", 1, 0.5}};
  const auto text = serialize_predictions(preds);
  const auto back = parse_predictions(text);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == preds[i].id);
    CHECK(back[i].label == preds[i].label);
    CHECK(back[i].probability == preds[i].probability);
  }
  CHECK(serialize_predictions(back) == text);
}

} // TEST_SUITE
