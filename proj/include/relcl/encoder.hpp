#pragma once

#include "relcl/autodiff.hpp"
#include "relcl/corpus.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace relcl {

enum class EmbeddingMode { file, synthetic };

/// Frozen per-record token embeddings (one row per real token, F columns).
/// Nothing in the library ever writes to these matrices after insertion.
class EmbeddingSource {
 public:
  EmbeddingSource(EmbeddingMode mode, Index dimension);

  void insert(const std::string& id, Matrix rows);

  /// Rows for `record`; throws if the record is unknown or short of rows.
  const Matrix& rows(const SentenceRecord& record) const;
  bool contains(const std::string& id) const { return table_.count(id) != 0; }

  EmbeddingMode mode() const { return mode_; }
  Index dimension() const { return dimension_; }
  std::size_t size() const { return table_.size(); }
  const std::map<std::string, Matrix>& table() const { return table_; }

  /// Hash of every id and exact matrix content.
  std::uint64_t fingerprint() const;

 private:
  EmbeddingMode mode_;
  Index dimension_;
  std::map<std::string, Matrix> table_;
};

struct SynthEmbeddingConfig {
  /// Weight of the latent class direction shared by tokens of one role
  /// (drug head, drug modifier, AE head, AE modifier, outside).
  double type_signal = 0.5;
  /// Weight of the per-position jitter added to each token instance.
  double jitter = 0.1;
  /// Weight of a per-sentence vector drawn from a shared low-rank subspace.
  /// It is common to every token of a sentence and carries no label.
  double context_weight = 1.0;
  Index context_rank = 4;
};

/// Each vocabulary type maps to a seeded unit vector; an instance is its
/// type vector plus a small positional jitter, renormalized. Types carry a
/// weak shared component per role, derived from corpus tags.
EmbeddingSource synth_embeddings(const std::vector<SentenceRecord>& corpus, Index dimension, std::uint64_t seed,
                                 const SynthEmbeddingConfig& config = {});

enum class SidecarFormat { binary, text };

/// Per-record embedding file. Binary layout (little-endian):
///   magic "RELCLEMB", u32 version, u32 id length, id bytes,
///   u64 rows, u64 cols, rows*cols f64 row-major,
///   u64 adjacency size N, N*N f64 row-major.
/// Text layout:
///   line 1 "RELCLEMB-TEXT 1", line 2 "id <id>", line 3 "shape <rows> <cols>",
///   one line per embedding row, then "adjacency <N>" and N rows.
struct EmbeddingSidecar {
  std::string id;
  Matrix embeddings;
  /// Normalized subgraph adjacency; empty when the record has no relations.
  Matrix adjacency;
};

void write_sidecar(const std::filesystem::path& path, const EmbeddingSidecar& sidecar,
                   SidecarFormat format = SidecarFormat::binary);
EmbeddingSidecar read_sidecar(const std::filesystem::path& path);

/// Writes `<id>.emb` for every record, including the normalized subgraph.
void write_embedding_dir(const EmbeddingSource& source, const std::vector<SentenceRecord>& records,
                         const std::filesystem::path& dir, SidecarFormat format = SidecarFormat::binary);
/// Loads every `*.emb` file; the result is a file-mode source.
EmbeddingSource load_embedding_dir(const std::filesystem::path& dir);

enum class PoolingMode { mean, max, first_token };

std::string_view to_string(PoolingMode mode);
PoolingMode parse_pooling(std::string_view text);

/// Pools the rows selected by `mask` (all rows when empty).
RowVector pool(const Matrix& rows, PoolingMode mode, const std::vector<int>& mask = {});
Var pool(Var rows, PoolingMode mode, const std::vector<int>& mask = {});

struct DenseLayer {
  Parameter weight;
  Parameter bias;
  Activation activation = Activation::relu;

  Var forward(Tape& tape, Var x);
  Matrix forward(const Matrix& x) const;
};

DenseLayer make_dense(const std::string& name, Index in, Index out, Activation act, Rng& rng);

/// Residual single-head self-attention over the tokens of one sentence:
///   H + softmax(H Wq (H Wk)^T / sqrt(d)) H Wv
struct ContextMixer {
  Parameter query;
  Parameter key;
  Parameter value;

  Var forward(Tape& tape, Var h);
  Matrix forward(const Matrix& h) const;
};

struct EncoderConfig {
  std::size_t head_layers = 2;
  /// Width of every head layer; 0 means the base dimension.
  Index hidden = 0;
  Activation activation = Activation::relu;
  bool context_mixer = false;
  /// Square layers add their output to their input and start near zero, so
  /// an untrained stack is close to the frozen base.
  bool residual = true;
};

/// Frozen base embeddings followed by trainable dense head layers and an
/// optional context mixer. Output row t is the representation of token t.
class EncoderStack {
 public:
  EncoderStack(std::shared_ptr<const EmbeddingSource> base, const EncoderConfig& config, std::uint64_t seed,
               const std::string& prefix = "encoder");

  /// Differentiable through the head parameters only.
  Var forward(Tape& tape, const SentenceRecord& record);
  Matrix embed(const SentenceRecord& record) const;

  std::vector<Parameter*> parameters();
  Index output_dim() const;
  Index input_dim() const { return base_->dimension(); }
  const EncoderConfig& config() const { return config_; }
  const EmbeddingSource& base() const { return *base_; }
  std::shared_ptr<const EmbeddingSource> base_ptr() const { return base_; }
  std::vector<DenseLayer>& layers() { return layers_; }

 private:
  bool residual_at(std::size_t layer) const;

  std::shared_ptr<const EmbeddingSource> base_;
  EncoderConfig config_;
  std::vector<DenseLayer> layers_;
  std::optional<ContextMixer> mixer_;
};

}  // namespace relcl
