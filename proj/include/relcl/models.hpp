#pragma once

#include "relcl/contrastive.hpp"
#include "relcl/encoder.hpp"
#include "relcl/graphs.hpp"

#include <array>
#include <memory>
#include <optional>
#include <vector>

namespace relcl {

/// One graph convolution: act(A_norm X W), no bias.
struct GcnLayer {
  Parameter weight;
  Activation activation = Activation::relu;

  Var forward(Tape& tape, const Matrix& propagation, Var features);
  Matrix forward(const Matrix& propagation, const Matrix& features) const;
};

GcnLayer make_gcn(const std::string& name, Index in, Index out, Activation act, Rng& rng);

/// act(A_norm X W) with shape checks on all three operands.
Var gcn_forward(Tape& tape, GcnLayer& layer, const Matrix& propagation, Var features);

enum class ModelKind { clgs, cldr, clner };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct ClgsConfig {
  EncoderConfig encoder;
  PoolingMode graph_pool = PoolingMode::mean;
  PoolingMode text_pool = PoolingMode::mean;
  bool projection = false;
  /// Adds the graph-to-sentence direction over the sentences of a batch.
  bool symmetric = false;
  double tau = 0.1;
};

/// Sentence/graph alignment: pooled encoder output against pooled tanh-GCN
/// output of the positive and corrupted subgraphs.
struct ClgsModel {
  ClgsModel(std::shared_ptr<const EmbeddingSource> base, const ClgsConfig& config, std::uint64_t seed);

  Var sentence_rep(Tape& tape, const SentenceRecord& record);
  Var graph_rep(Tape& tape, const RelationGraph& graph);
  RowVector sentence_rep(const SentenceRecord& record) const;
  RowVector graph_rep(const RelationGraph& graph) const;

  std::vector<Parameter*> parameters();

  ClgsConfig config;
  EncoderStack encoder;
  GcnLayer gcn;
  std::optional<DenseLayer> text_projection;
  std::optional<DenseLayer> graph_projection;
};

/// -log softmax of the positive graph among all candidates, anchored on the
/// sentence representation.
Var clgs_loss(Tape& tape, ClgsModel& model, const SentenceRecord& record, const ClgsSamples& samples);

/// Mean of clgs_loss over a batch; with `config.symmetric` each positive
/// graph is also contrasted against every sentence of the batch.
Var clgs_batch_loss(Tape& tape, ClgsModel& model, const std::vector<const SentenceRecord*>& batch,
                    const std::vector<ClgsSamples>& samples);

struct CldrConfig {
  EncoderConfig encoder;
  double lambda = 0.8;
  double tau = 0.1;
};

/// Relation-level alignment: concatenated encoder rows of a head pair
/// against concatenated ReLU-GCN rows of two-node graphs.
struct CldrModel {
  CldrModel(std::shared_ptr<const EmbeddingSource> base, const CldrConfig& config, std::uint64_t seed);

  /// (drug part | AE part) of a two-node graph after the GCN.
  Var graph_relation_rep(Tape& tape, const RelationGraph& graph);
  std::vector<Parameter*> parameters();

  CldrConfig config;
  EncoderStack encoder;
  GcnLayer gcn;
};

/// Concatenation of the encoder rows of `pair` (drug row first).
Var text_relation_rep(Var token_reps, const RelationPair& pair);
RowVector text_relation_rep(const Matrix& token_reps, const RelationPair& pair);

/// Sum over the record's relations of the per-relation contrastive loss.
Var cldr_loss(Tape& tape, CldrModel& model, const SentenceRecord& record, const CldrSamples& samples);

struct ClnerConfig {
  EncoderConfig encoder{1, 0, Activation::identity, false};
  double tau = 0.1;
  std::size_t quota = 8;
};

/// Token-level entity space: one trainable dense layer over the base.
struct ClnerModel {
  ClnerModel(std::shared_ptr<const EmbeddingSource> base, const ClnerConfig& config, std::uint64_t seed);

  std::vector<Parameter*> parameters();

  ClnerConfig config;
  EncoderStack encoder;
};

/// Tokens drawn from a batch for the entity loss. `batch_index` refers to the
/// position in the batch passed to the sampler.
struct EntitySample {
  struct Item {
    std::size_t batch_index = 0;
    std::size_t token = 0;
    BioTag tag = BioTag::O;
  };
  std::vector<Item> items;
  /// Tag counts of the whole batch, computed before sampling.
  std::array<std::size_t, kBioTagCount> available{};
};

/// Draws min(quota, available) tokens of each tag class without replacement.
/// Classes with fewer than two tokens cannot provide a positive and are
/// skipped with a warning.
EntitySample sample_balanced_entities(const std::vector<const SentenceRecord*>& batch, std::size_t quota,
                                      std::uint64_t seed);

/// Sum over sampled anchors of the multi-positive loss; the candidates of an
/// anchor are every other sampled token, the positives those sharing its tag.
Var clner_loss(Tape& tape, ClnerModel& model, const std::vector<const SentenceRecord*>& batch,
               const EntitySample& sample);

}  // namespace relcl
