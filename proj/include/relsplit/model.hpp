#ifndef RELSPLIT_MODEL_HPP
#define RELSPLIT_MODEL_HPP

#include "relsplit/encode.hpp"
#include "relsplit/linear.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace relsplit::model {

using ModelParams = LinearParams<double>;

enum class Optimizer { SGD, AdamW };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

struct TrainConfig {
  Optimizer optimizer = Optimizer::AdamW;
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double l2 = 1e-4;
  // AdamW only.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;

  /// Desk defaults for the given optimizer (learning rate 0.1 for SGD, 1e-3
  /// for AdamW).
  static TrainConfig defaults(Optimizer o);
  void validate() const;
  bool operator==(const TrainConfig &) const = default;
};

/// One training stage in a checkpoint's history.
struct StageRecord {
  std::string dataset_fingerprint;
  std::size_t examples = 0;
  TrainConfig config;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;

  bool operator==(const StageRecord &) const = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  ModelParams params;
  encode::FeaturizerConfig featurizer;
  std::vector<StageRecord> provenance;

  bool operator==(const Checkpoint &o) const {
    return format_version == o.format_version && params.w == o.params.w &&
           params.b == o.params.b && featurizer == o.featurizer && provenance == o.provenance;
  }
};

/// Little-endian layout:
///   "RSCK" | u32 format_version | u32 dims | f32[dims] w | f64 b |
///   u32 n | n bytes UTF-8 JSON {featurizer, stages} | u32 CRC-32 of all
///   preceding bytes
std::string serialize_checkpoint(const Checkpoint &ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::filesystem::path &path);

/// Mini-batch training from `init` (or zeros). Batch order is reshuffled each
/// epoch from cfg.seed; weights are stored at float32 precision on return so
/// the in-memory checkpoint equals its reloaded file.
Checkpoint train(const encode::EncodedDataset &ds, const TrainConfig &cfg,
                 const Checkpoint *init = nullptr);

/// train(target, stage2, train(aux, stage1)).
Checkpoint tapt_train(const encode::EncodedDataset &aux, const encode::EncodedDataset &target,
                      const TrainConfig &stage1, const TrainConfig &stage2);

struct Prediction {
  std::string id;
  int label = 0;
  double probability = 0.0;
};

/// label = 1 iff probability >= threshold. Throws ConfigMismatch when the
/// featurizer differs from the checkpoint's.
std::vector<Prediction> classify(const Checkpoint &ckpt, const encode::EncodedDataset &ds,
                                 double threshold = 0.5);

/// Threshold maximizing positive-class F1 on the labeled records of `ds`,
/// placed midway between adjacent scores.
double tune_threshold(const Checkpoint &ckpt, const encode::EncodedDataset &ds);

std::string serialize_predictions(const std::vector<Prediction> &preds);
std::vector<Prediction> parse_predictions(std::string_view text);

} // namespace relsplit::model

#endif // RELSPLIT_MODEL_HPP
