#include "relcl/graphs.hpp"

#include <algorithm>
#include <set>

namespace relcl {

std::size_t RelationGraph::edge_count() const {
  if (normalized) {
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& p : relations) edges.emplace(std::min(p.drug, p.ae), std::max(p.drug, p.ae));
    return edges.size();
  }
  std::size_t count = 0;
  for (Index i = 0; i < adjacency.rows(); ++i) {
    for (Index j = i + 1; j < adjacency.cols(); ++j) count += adjacency(i, j) != 0.0 ? 1 : 0;
  }
  return count;
}

Matrix propagation_matrix(const RelationGraph& graph) {
  return graph.normalized ? graph.adjacency : normalize_adjacency(graph.adjacency);
}

namespace {

void check_embeddings(const SentenceRecord& record, const Matrix& token_embeddings) {
  if (static_cast<std::size_t>(token_embeddings.rows()) < record.size()) {
    throw ShapeError("record '" + record.id + "': embedding matrix has " + std::to_string(token_embeddings.rows()) +
                     " rows for " + std::to_string(record.size()) + " tokens");
  }
}

}  // namespace

RelationGraph graph_from_pairs(const std::vector<RelationPair>& pairs, const Matrix& token_embeddings) {
  RelationGraph g;
  g.relations = pairs;
  for (const auto& p : pairs) {
    g.node_token_indices.push_back(p.drug);
    g.node_token_indices.push_back(p.ae);
  }
  auto& nodes = g.node_token_indices;
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  auto position = [&](std::size_t token) {
    return static_cast<Index>(std::lower_bound(nodes.begin(), nodes.end(), token) - nodes.begin());
  };
  const auto n = static_cast<Index>(nodes.size());
  g.adjacency = Matrix::Zero(n, n);
  for (const auto& p : pairs) {
    if (p.drug == p.ae) throw ValidationError("relation pair joins token " + std::to_string(p.drug) + " to itself");
    const Index i = position(p.drug);
    const Index j = position(p.ae);
    g.adjacency(i, j) = 1.0;
    g.adjacency(j, i) = 1.0;
  }
  g.node_features.resize(n, token_embeddings.cols());
  for (Index i = 0; i < n; ++i) {
    const auto token = static_cast<Index>(nodes[static_cast<std::size_t>(i)]);
    if (token >= token_embeddings.rows()) throw ShapeError("node token index outside the embedding matrix");
    g.node_features.row(i) = token_embeddings.row(token);
  }
  return g;
}

RelationGraph build_subgraph(const SentenceRecord& record, const Matrix& token_embeddings) {
  if (record.relations.empty()) {
    throw ValidationError("record '" + record.id + "' has no relations; its graph is undefined");
  }
  check_embeddings(record, token_embeddings);
  return graph_from_pairs(record.relations, token_embeddings);
}

Matrix lambda_adjacency(double lambda) {
  if (!(lambda > 0.5 && lambda <= 1.0)) {
    throw ValidationError("lambda must lie in (0.5, 1.0]; got " + format_double(lambda) +
                          " (at 0.5 both node outputs coincide)");
  }
  Matrix a(2, 2);
  a << lambda, 1.0 - lambda, 1.0 - lambda, lambda;
  return a;
}

RelationGraph disjoint_graph(const RelationPair& pair, const Matrix& token_embeddings, double lambda) {
  RelationGraph g;
  g.node_token_indices = {pair.drug, pair.ae};
  g.relations = {pair};
  g.adjacency = lambda_adjacency(lambda);
  g.normalized = true;
  g.node_features.resize(2, token_embeddings.cols());
  g.node_features.row(0) = token_embeddings.row(static_cast<Index>(pair.drug));
  g.node_features.row(1) = token_embeddings.row(static_cast<Index>(pair.ae));
  return g;
}

DisjointGraphSet build_disjoint_graphs(const SentenceRecord& record, const Matrix& token_embeddings, double lambda) {
  lambda_adjacency(lambda);
  if (record.relations.empty()) {
    throw ValidationError("record '" + record.id + "' has no relations; its graph is undefined");
  }
  check_embeddings(record, token_embeddings);
  DisjointGraphSet set;
  set.lambda = lambda;
  for (const auto& rel : record.relations) set.graphs.push_back(disjoint_graph(rel, token_embeddings, lambda));
  return set;
}

CorruptionPool CorruptionPool::of(const SentenceRecord& record) {
  CorruptionPool pool;
  for (std::size_t i = 0; i < record.size(); ++i) {
    const auto type = entity_type_of(record.tags[i]);
    if (type != EntityType::drug) pool.drug_replacements.push_back(i);
    if (type != EntityType::ae) pool.ae_replacements.push_back(i);
  }
  return pool;
}

namespace {

std::vector<std::size_t> without(const std::vector<std::size_t>& items, std::size_t excluded) {
  std::vector<std::size_t> out;
  out.reserve(items.size());
  for (auto i : items) {
    if (i != excluded) out.push_back(i);
  }
  return out;
}

void check_corruptible(const SentenceRecord& record, const CorruptionPool& pool) {
  for (const auto& rel : record.relations) {
    if (without(pool.drug_replacements, rel.ae).empty() && without(pool.ae_replacements, rel.drug).empty()) {
      throw ValidationError("record '" + record.id + "': no eligible token to corrupt relation (" +
                            std::to_string(rel.drug) + ", " + std::to_string(rel.ae) + ")");
    }
  }
}

}  // namespace

RelationPair corrupt_pair(const SentenceRecord& record, const CorruptionPool& pool, const RelationPair& pair,
                          Rng& rng) {
  const auto drug_options = without(pool.drug_replacements, pair.ae);
  const auto ae_options = without(pool.ae_replacements, pair.drug);
  bool corrupt_drug = rng.coin();
  if (corrupt_drug && drug_options.empty()) corrupt_drug = false;
  if (!corrupt_drug && ae_options.empty()) corrupt_drug = true;
  if (corrupt_drug && drug_options.empty()) {
    throw ValidationError("record '" + record.id + "': no eligible token to corrupt relation (" +
                          std::to_string(pair.drug) + ", " + std::to_string(pair.ae) + ")");
  }
  RelationPair out = pair;
  if (corrupt_drug) {
    out.drug = drug_options[rng.uniform_index(drug_options.size())];
  } else {
    out.ae = ae_options[rng.uniform_index(ae_options.size())];
  }
  return out;
}

ClgsSamples sample_negatives_clgs(const SentenceRecord& record, const Matrix& token_embeddings,
                                  const RelationGraph& positive, std::size_t count, std::uint64_t seed) {
  ClgsSamples out;
  out.positive = positive;
  if (count == 0) return out;
  check_embeddings(record, token_embeddings);
  const auto pool = CorruptionPool::of(record);
  check_corruptible(record, pool);
  Rng rng(seed);
  out.negatives.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<RelationPair> pairs;
    pairs.reserve(positive.relations.size());
    for (const auto& rel : positive.relations) pairs.push_back(corrupt_pair(record, pool, rel, rng));
    out.negatives.push_back(graph_from_pairs(pairs, token_embeddings));
  }
  return out;
}

CldrSamples sample_negatives_cldr(const SentenceRecord& record, const Matrix& token_embeddings,
                                  const DisjointGraphSet& positive, std::size_t count, std::uint64_t seed) {
  CldrSamples out;
  out.positive = positive;
  if (count == 0) return out;
  check_embeddings(record, token_embeddings);
  const auto pool = CorruptionPool::of(record);
  check_corruptible(record, pool);
  Rng rng(seed);
  out.negatives.resize(count);
  for (auto& negative : out.negatives) {
    negative.lambda = positive.lambda;
    for (const auto& g : positive.graphs) {
      const auto pair = corrupt_pair(record, pool, g.relations.front(), rng);
      negative.graphs.push_back(disjoint_graph(pair, token_embeddings, positive.lambda));
    }
  }
  return out;
}

}  // namespace relcl
