#pragma once

#include "relcl/common.hpp"
#include "relcl/corpus.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace relcl {

/// Graph over sentence tokens. `adjacency` holds the raw 0/1 matrix until
/// `normalized` is set, after which it is the propagation matrix fed to a GCN.
struct RelationGraph {
  std::vector<std::size_t> node_token_indices;
  std::vector<RelationPair> relations;
  Matrix node_features;
  Matrix adjacency;
  bool normalized = false;

  std::size_t node_count() const { return node_token_indices.size(); }
  std::size_t edge_count() const;
};

/// One two-node graph per relation with a lambda-weighted self-loop.
struct DisjointGraphSet {
  std::vector<RelationGraph> graphs;
  double lambda = 0.8;
};

/// Symmetric normalization D^-1/2 (A + I) D^-1/2 with D the degree matrix of
/// A + I. Entries are computed as (A+I)_ij / sqrt(d_i d_j), so degree pairs
/// with an exact square root give exact results.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> normalize_adjacency(
    const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Index n = a.rows();
  if (a.cols() != n) {
    throw ShapeError("normalize_adjacency: matrix is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     ", expected square");
  }
  for (Index i = 0; i < n; ++i) {
    if (a(i, i) != Scalar(0)) throw ValidationError("normalize_adjacency: nonzero diagonal at " + std::to_string(i));
    for (Index j = 0; j < n; ++j) {
      if (a(i, j) != a(j, i)) throw ValidationError("normalize_adjacency: matrix is not symmetric");
      if (a(i, j) != Scalar(0) && a(i, j) != Scalar(1)) {
        throw ValidationError("normalize_adjacency: entries must be 0 or 1");
      }
    }
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> hat = a;
  hat.diagonal().array() += Scalar(1);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> degree = hat.rowwise().sum();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      using std::sqrt;
      out(i, j) = hat(i, j) / sqrt(degree(i) * degree(j));
    }
  }
  return out;
}

/// The propagation matrix of a graph, normalizing on the fly if needed.
Matrix propagation_matrix(const RelationGraph& graph);

/// Graph whose nodes are the union of the pairs' endpoints (ascending token
/// order) with one undirected edge per pair. Adjacency is left raw.
RelationGraph graph_from_pairs(const std::vector<RelationPair>& pairs, const Matrix& token_embeddings);

/// Essential subgraph of a record: relation head tokens only.
RelationGraph build_subgraph(const SentenceRecord& record, const Matrix& token_embeddings);

Matrix lambda_adjacency(double lambda);

/// Node order is (drug head, AE head); adjacency [[l, 1-l], [1-l, l]].
RelationGraph disjoint_graph(const RelationPair& pair, const Matrix& token_embeddings, double lambda);
DisjointGraphSet build_disjoint_graphs(const SentenceRecord& record, const Matrix& token_embeddings, double lambda);

/// Positive graph plus `count` hard negatives, each with the same number of
/// relations. Every relation of a negative has exactly one corrupted endpoint.
struct ClgsSamples {
  RelationGraph positive;
  std::vector<RelationGraph> negatives;

  std::size_t candidate_count() const { return negatives.size() + 1; }
};

/// `negatives[k].graphs[r]` is the k-th corrupted version of relation r.
struct CldrSamples {
  DisjointGraphSet positive;
  std::vector<DisjointGraphSet> negatives;

  std::size_t candidate_count() const { return negatives.size() + 1; }
};

/// Tokens that may replace each endpoint: anything outside spans of the
/// corrupted entity type.
struct CorruptionPool {
  std::vector<std::size_t> drug_replacements;
  std::vector<std::size_t> ae_replacements;

  static CorruptionPool of(const SentenceRecord& record);
};

/// Corrupts one endpoint of `pair`, chosen by a fair coin. The other side is
/// used when the chosen side has no eligible token.
RelationPair corrupt_pair(const SentenceRecord& record, const CorruptionPool& pool, const RelationPair& pair,
                          Rng& rng);

ClgsSamples sample_negatives_clgs(const SentenceRecord& record, const Matrix& token_embeddings,
                                  const RelationGraph& positive, std::size_t count, std::uint64_t seed);

CldrSamples sample_negatives_cldr(const SentenceRecord& record, const Matrix& token_embeddings,
                                  const DisjointGraphSet& positive, std::size_t count, std::uint64_t seed);

}  // namespace relcl
