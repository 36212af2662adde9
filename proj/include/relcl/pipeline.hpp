#pragma once

#include "relcl/inference.hpp"
#include "relcl/training.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace relcl {

struct PipelineManifest {
  std::filesystem::path data_dir;
  /// Empty: synthesize embeddings from the corpus.
  std::filesystem::path embedding_dir;
  /// Empty: seed our own folds.
  std::filesystem::path split_dir;
  /// Empty: defaults for both models.
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::uint64_t seed = 1;
};

enum class Stage { prep, train_cldr, train_clner, extract, knn, score };

inline const std::vector<Stage> kAllStages{Stage::prep,    Stage::train_cldr, Stage::train_clner,
                                           Stage::extract, Stage::knn,        Stage::score};

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);
/// Comma-separated stage names, or "all".
std::vector<Stage> parse_stages(std::string_view text);

/// Run-level settings read from `pipeline.*` keys of the config file.
/// Keys prefixed `cldr.` or `clner.` apply to one model only; unprefixed
/// keys apply to both.
struct PipelineSettings {
  int folds = 10;
  /// 0 runs every fold.
  int run_folds = 0;
  Index embedding_dim = 64;
  /// Hard negatives per relation in the relation space.
  std::size_t space_negatives = 7;
  std::vector<std::size_t> k_grid = kDefaultKGrid;
  Metric metric = Metric::cosine;
  TrainConfig cldr = TrainConfig::defaults(ModelKind::cldr);
  TrainConfig clner = TrainConfig::defaults(ModelKind::clner);
};

PipelineSettings load_pipeline_settings(const std::filesystem::path& config_path, std::uint64_t seed);

/// Candidate relations from the two KNN outputs: a pair is kept when the
/// relation space says relation and its endpoints end predicted DRUG and AE
/// entities respectively.
Annotation combine_predictions(const SentenceRecord& record, const std::vector<BioTag>& token_tags,
                               const std::vector<RelationPair>& related_pairs);

/// Runs `stages` in the fixed order prep, train-cldr, train-clner, extract,
/// knn, score. On failure writes <out>/FAILED naming the stage, then rethrows.
void run_pipeline(const PipelineManifest& manifest, const std::vector<Stage>& stages);

}  // namespace relcl
