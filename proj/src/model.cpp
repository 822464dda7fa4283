#include "relsplit/model.hpp"

#include "relsplit/binio.hpp"
#include "relsplit/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace relsplit::model {

using ordered_json = nlohmann::ordered_json;
using encode::EncodedDataset;
using encode::FeatureVector;

std::string_view to_string(Optimizer o) { return o == Optimizer::SGD ? "sgd" : "adamw"; }

Optimizer parse_optimizer(std::string_view s) {
  if (s == "sgd")
    return Optimizer::SGD;
  if (s == "adamw")
    return Optimizer::AdamW;
  throw Error(ErrorCode::InvalidArgument, "unknown optimizer '" + std::string(s) + "'");
}

TrainConfig TrainConfig::defaults(Optimizer o) {
  TrainConfig c;
  c.optimizer = o;
  c.learning_rate = o == Optimizer::SGD ? 0.1 : 1e-3;
  return c;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string &what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(std::isfinite(learning_rate) && learning_rate > 0.0))
    bad("learning_rate must be positive and finite");
  if (batch_size < 1)
    bad("batch_size must be >= 1");
  if (!(std::isfinite(l2) && l2 >= 0.0))
    bad("l2 must be non-negative and finite");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    bad("betas must be in [0, 1)");
  if (!(std::isfinite(adam_epsilon) && adam_epsilon > 0.0))
    bad("adam_epsilon must be positive");
  if (!(std::isfinite(weight_decay) && weight_decay >= 0.0))
    bad("weight_decay must be non-negative");
}

namespace {

ordered_json config_json(const TrainConfig &c) {
  ordered_json j;
  j["optimizer"] = to_string(c.optimizer);
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["l2"] = c.l2;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["weight_decay"] = c.weight_decay;
  return j;
}

TrainConfig config_from_json(const ordered_json &j) {
  TrainConfig c;
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.l2 = j.at("l2").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_epsilon = j.at("adam_epsilon").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  return c;
}

constexpr char kMagic[4] = {'R', 'S', 'C', 'K'};

} // namespace

std::string serialize_checkpoint(const Checkpoint &ckpt) {
  io::ByteWriter out;
  out.bytes(std::string_view(kMagic, 4));
  out.u32(ckpt.format_version);
  out.u32(static_cast<std::uint32_t>(ckpt.params.dims()));
  for (Eigen::Index i = 0; i < ckpt.params.dims(); ++i)
    out.f32(static_cast<float>(ckpt.params.w[i]));
  out.f64(ckpt.params.b);

  ordered_json meta;
  meta["featurizer"] = {{"dims", ckpt.featurizer.dims},
                        {"n_min", ckpt.featurizer.n_min},
                        {"n_max", ckpt.featurizer.n_max},
                        {"hash_seed", ckpt.featurizer.seed}};
  auto stages = ordered_json::array();
  for (const auto &s : ckpt.provenance) {
    ordered_json st;
    st["dataset_fingerprint"] = s.dataset_fingerprint;
    st["examples"] = s.examples;
    st["config"] = config_json(s.config);
    st["final_loss"] = s.final_loss;
    st["epoch_losses"] = s.epoch_losses;
    stages.push_back(std::move(st));
  }
  meta["stages"] = stages;
  const std::string meta_text = meta.dump();
  out.u32(static_cast<std::uint32_t>(meta_text.size()));
  out.bytes(meta_text);

  std::string bytes = out.str();
  io::ByteWriter crc;
  crc.u32(io::crc32(bytes));
  bytes += crc.str();
  return bytes;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 + 4 + 4 + 8 + 4 + 4)
    throw Error(ErrorCode::FormatError, "checkpoint too short");
  const auto body = bytes.substr(0, bytes.size() - 4);
  io::ByteReader trailer(bytes.substr(bytes.size() - 4));
  if (trailer.u32() != io::crc32(body))
    throw Error(ErrorCode::FormatError, "checkpoint CRC mismatch");

  io::ByteReader in(body);
  if (in.bytes(4) != std::string_view(kMagic, 4))
    throw Error(ErrorCode::FormatError, "bad checkpoint magic");
  Checkpoint ckpt;
  ckpt.format_version = in.u32();
  if (ckpt.format_version != Checkpoint::kFormatVersion)
    throw Error(ErrorCode::FormatError,
                "unsupported checkpoint version " + std::to_string(ckpt.format_version));
  const std::uint32_t dims = in.u32();
  if (in.remaining() < std::size_t{dims} * 4)
    throw Error(ErrorCode::FormatError, "truncated weight block");
  ckpt.params = ModelParams(dims);
  for (std::uint32_t i = 0; i < dims; ++i)
    ckpt.params.w[i] = static_cast<double>(in.f32());
  ckpt.params.b = in.f64();
  const std::uint32_t meta_len = in.u32();
  const auto meta_text = in.bytes(meta_len);
  if (in.remaining() != 0)
    throw Error(ErrorCode::FormatError, "trailing bytes before CRC");
  try {
    const auto meta = ordered_json::parse(meta_text);
    const auto &f = meta.at("featurizer");
    ckpt.featurizer.dims = f.at("dims").get<std::uint32_t>();
    ckpt.featurizer.n_min = f.at("n_min").get<std::uint32_t>();
    ckpt.featurizer.n_max = f.at("n_max").get<std::uint32_t>();
    ckpt.featurizer.seed = f.at("hash_seed").get<std::uint64_t>();
    for (const auto &st : meta.at("stages")) {
      StageRecord s;
      s.dataset_fingerprint = st.at("dataset_fingerprint").get<std::string>();
      s.examples = st.at("examples").get<std::size_t>();
      s.config = config_from_json(st.at("config"));
      s.final_loss = st.at("final_loss").get<double>();
      s.epoch_losses = st.at("epoch_losses").get<std::vector<double>>();
      ckpt.provenance.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::FormatError, std::string("checkpoint provenance: ") + e.what());
  }
  if (ckpt.featurizer.dims != dims)
    throw Error(ErrorCode::FormatError, "featurizer dims disagree with weight block");
  if (!ckpt.params.all_finite())
    throw Error(ErrorCode::FormatError, "non-finite parameters");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  io::write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  return parse_checkpoint(io::read_file(path));
}

namespace {

class AdamState {
public:
  explicit AdamState(Eigen::Index dims)
      : m_w(VectorX<double>::Zero(dims)), v_w(VectorX<double>::Zero(dims)) {}

  void step(ModelParams &p, const LinearGradient<double> &g, const TrainConfig &c) {
    ++t_;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t_));
    m_w = c.beta1 * m_w + (1.0 - c.beta1) * g.w;
    v_w = c.beta2 * v_w + (1.0 - c.beta2) * g.w.cwiseAbs2();
    if (c.weight_decay > 0.0)
      p.w *= 1.0 - c.learning_rate * c.weight_decay;
    p.w.array() -= c.learning_rate * (m_w.array() / bc1) /
                   ((v_w.array() / bc2).sqrt() + c.adam_epsilon);
    m_b = c.beta1 * m_b + (1.0 - c.beta1) * g.b;
    v_b = c.beta2 * v_b + (1.0 - c.beta2) * g.b * g.b;
    p.b -= c.learning_rate * (m_b / bc1) / (std::sqrt(v_b / bc2) + c.adam_epsilon);
  }

private:
  VectorX<double> m_w, v_w;
  double m_b = 0.0, v_b = 0.0;
  std::uint64_t t_ = 0;
};

} // namespace

Checkpoint train(const EncodedDataset &ds, const TrainConfig &cfg, const Checkpoint *init) {
  cfg.validate();
  ds.config.validate();
  const auto dims = static_cast<Eigen::Index>(ds.config.dims);
  for (const auto &r : ds.records) {
    if (r.x.size() != dims)
      throw Error(ErrorCode::DimMismatch, "record " + r.id + " has " +
                                              std::to_string(r.x.size()) + " dims, expected " +
                                              std::to_string(dims));
    if (!r.label)
      throw Error(ErrorCode::InvalidArgument, "record " + r.id + " has no label");
  }

  Checkpoint ckpt;
  ckpt.featurizer = ds.config;
  if (init) {
    if (!(init->featurizer == ds.config))
      throw Error(ErrorCode::ConfigMismatch, "init checkpoint featurizer differs from dataset");
    if (init->params.dims() != dims)
      throw Error(ErrorCode::DimMismatch, "init checkpoint dims differ from dataset");
    ckpt.params = init->params;
    ckpt.provenance = init->provenance;
  } else {
    ckpt.params = ModelParams(dims);
  }

  std::vector<Sample<FeatureVector>> samples;
  samples.reserve(ds.records.size());
  for (const auto &r : ds.records)
    samples.push_back({&r.x, *r.label});

  StageRecord stage;
  stage.dataset_fingerprint = ds.fingerprint();
  stage.examples = ds.records.size();
  stage.config = cfg;

  AdamState adam(dims);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample<FeatureVector>> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs && !samples.empty(); ++epoch) {
    auto eng = make_engine(cfg.seed, epoch);
    shuffle(std::span(order), eng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
        batch.push_back(samples[order[i]]);
      const std::span<const Sample<FeatureVector>> view(batch);
      const double loss = batch_loss(ckpt.params, view, cfg.l2);
      if (!std::isfinite(loss))
        throw Error(ErrorCode::NonFiniteLoss,
                    "epoch " + std::to_string(epoch) + " batch " + std::to_string(n_batches));
      const auto grad = batch_grad(ckpt.params, view, cfg.l2);
      if (cfg.optimizer == Optimizer::SGD) {
        ckpt.params.w.noalias() -= cfg.learning_rate * grad.w;
        ckpt.params.b -= cfg.learning_rate * grad.b;
      } else {
        adam.step(ckpt.params, grad, cfg);
      }
      loss_sum += loss;
      ++n_batches;
    }
    stage.epoch_losses.push_back(loss_sum / static_cast<double>(n_batches));
  }
  if (!ckpt.params.all_finite())
    throw Error(ErrorCode::NonFiniteLoss, "parameters diverged");

  ckpt.params.w = ckpt.params.w.cast<float>().cast<double>();
  if (!samples.empty())
    stage.final_loss = batch_loss(ckpt.params, std::span<const Sample<FeatureVector>>(samples), cfg.l2);
  ckpt.provenance.push_back(std::move(stage));
  return ckpt;
}

Checkpoint tapt_train(const EncodedDataset &aux, const EncodedDataset &target,
                      const TrainConfig &stage1, const TrainConfig &stage2) {
  if (!(aux.config == target.config))
    throw Error(ErrorCode::ConfigMismatch, "auxiliary and target featurizers differ");
  const Checkpoint pre = train(aux, stage1);
  return train(target, stage2, &pre);
}

std::vector<Prediction> classify(const Checkpoint &ckpt, const EncodedDataset &ds,
                                 double threshold) {
  if (!(ckpt.featurizer == ds.config))
    throw Error(ErrorCode::ConfigMismatch, "checkpoint featurizer differs from dataset");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw Error(ErrorCode::InvalidArgument, "threshold must be in (0, 1)");
  std::vector<Prediction> out;
  out.reserve(ds.records.size());
  for (const auto &r : ds.records) {
    const double p = predict_proba(ckpt.params, r.x);
    out.push_back({r.id, p >= threshold ? 1 : 0, p});
  }
  return out;
}

double tune_threshold(const Checkpoint &ckpt, const EncodedDataset &ds) {
  std::vector<std::pair<double, int>> scored;
  for (const auto &r : ds.records)
    if (r.label)
      scored.emplace_back(predict_proba(ckpt.params, r.x), *r.label);
  if (scored.empty())
    throw Error(ErrorCode::EmptyBatch, "threshold tuning needs labeled records");
  std::sort(scored.begin(), scored.end(), std::greater<>());
  std::size_t positives = 0;
  for (const auto &[p, y] : scored)
    positives += static_cast<std::size_t>(y);

  // Sweep cut points from the top; predicting the first i records positive.
  double best_f1 = -1.0, best = 0.5;
  std::size_t tp = 0;
  for (std::size_t i = 1; i <= scored.size(); ++i) {
    tp += static_cast<std::size_t>(scored[i - 1].second);
    if (i < scored.size() && scored[i].first == scored[i - 1].first)
      continue;
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(i + positives);
    if (f1 > best_f1) {
      best_f1 = f1;
      const double lo = i < scored.size() ? scored[i].first : 0.0;
      best = 0.5 * (scored[i - 1].first + lo);
    }
  }
  return std::clamp(best, std::numeric_limits<double>::min(), 1.0 - 1e-12);
}

std::string serialize_predictions(const std::vector<Prediction> &preds) {
  std::string out;
  for (const auto &p : preds) {
    ordered_json j;
    j["id"] = p.id;
    j["label"] = p.label;
    j["probability"] = p.probability;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Prediction> parse_predictions(std::string_view text) {
  std::vector<Prediction> out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty())
      continue;
    try {
      const auto j = ordered_json::parse(lines[i]);
      out.push_back({j.at("id").get<std::string>(), j.at("label").get<int>(),
                     j.value("probability", 0.0)});
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::ParseError,
                  "prediction line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

} // namespace relsplit::model
