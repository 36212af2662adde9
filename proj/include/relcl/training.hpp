#pragma once

#include "relcl/models.hpp"
#include "relcl/optim.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace relcl {

struct TrainConfig {
  ModelKind model = ModelKind::cldr;
  std::size_t batch_size = 8;
  double learning_rate = 1e-5;
  std::size_t epochs = 30;
  double tau = 0.1;
  double lambda = 0.8;
  /// Candidates per anchor: the positive plus z - 1 sampled negatives.
  std::size_t z = 8;
  std::uint64_t seed = 1;
  PoolingMode graph_pool = PoolingMode::mean;
  PoolingMode text_pool = PoolingMode::mean;
  bool projection = false;
  bool symmetric = false;
  double validation_fraction = 0.10;
  std::size_t head_layers = 2;
  Index hidden = 0;
  Activation activation = Activation::relu;
  bool context_mixer = false;
  bool residual = true;
  std::size_t ner_quota = 8;

  /// Defaults for `kind` (batch 16 and one identity dense layer for
  /// the entity model, batch 8 and two ReLU layers otherwise).
  static TrainConfig defaults(ModelKind kind);
};

void validate(const TrainConfig& config);

/// Flat `key = value` document; `#` starts a comment. Keys not present keep
/// the defaults of the model kind given by `model` (or `fallback`).
TrainConfig parse_train_config(std::istream& in, ModelKind fallback = ModelKind::cldr);
TrainConfig train_config_from_pairs(const std::map<std::string, std::string>& pairs,
                                    ModelKind fallback = ModelKind::cldr);
/// Reads `key = value` lines into a map; later keys win.
std::map<std::string, std::string> read_config_pairs(std::istream& in);
TrainConfig load_train_config(const std::filesystem::path& path, ModelKind fallback = ModelKind::cldr);
std::string format_train_config(const TrainConfig& config);

using AnyModel = std::variant<ClgsModel, CldrModel, ClnerModel>;

AnyModel make_model(const TrainConfig& config, std::shared_ptr<const EmbeddingSource> base);
std::vector<Parameter*> parameters_of(AnyModel& model);
EncoderStack& encoder_of(AnyModel& model);

struct TrainHistory {
  std::vector<double> epoch_loss;
  std::vector<double> validation_loss;
  /// 1-based epoch whose parameters were kept.
  std::size_t best_epoch = 0;
};

struct TrainResult {
  AnyModel model;
  TrainHistory history;
};

/// Shuffles with `seed` and moves round(fraction * n) records (half away from
/// zero) into the validation side. Throws if either side would be empty.
std::pair<std::vector<SentenceRecord>, std::vector<SentenceRecord>> split_validation(
    const std::vector<SentenceRecord>& records, double fraction, std::uint64_t seed);

/// Records a contrastive model can train on: with relations, and every
/// relation corruptible. The entity model trains on every record.
std::vector<SentenceRecord> eligible_records(const std::vector<SentenceRecord>& records, ModelKind kind);

/// Mean loss of `records` under fixed sampling seeds; no gradient.
double evaluate_loss(AnyModel& model, const TrainConfig& config, const std::vector<SentenceRecord>& records,
                     std::uint64_t seed);

/// Fixed-epoch training with ADAM. Sentences are reshuffled and negatives
/// resampled each epoch. When a validation split is possible the returned
/// parameters are those of the epoch with the lowest validation loss,
/// otherwise those of the last epoch. With `out_dir`, writes one checkpoint
/// per epoch plus model.ckpt, manifest.txt and history.tsv.
TrainResult train(const TrainConfig& config, const std::vector<SentenceRecord>& records,
                  std::shared_ptr<const EmbeddingSource> base,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// model.ckpt + manifest.txt (architecture, hyperparameters and the
/// embedding-source fingerprint).
void save_model(AnyModel& model, const TrainConfig& config, const EmbeddingSource& base,
                const std::filesystem::path& dir);

struct LoadedModel {
  TrainConfig config;
  AnyModel model;
};

/// Rebuilds a model from `dir`. A fingerprint mismatch with `base` is an error.
LoadedModel load_model(const std::filesystem::path& dir, std::shared_ptr<const EmbeddingSource> base);

}  // namespace relcl
