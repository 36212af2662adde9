#include "relcl/models.hpp"

#include <algorithm>
#include <cmath>

namespace relcl {

GcnLayer make_gcn(const std::string& name, Index in, Index out, Activation act, Rng& rng) {
  const double stddev = std::sqrt((act == Activation::relu ? 2.0 : 1.0) / static_cast<double>(in));
  Matrix w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = stddev * rng.normal();
  return GcnLayer{Parameter(name + ".weight", std::move(w)), act};
}

Var gcn_forward(Tape& tape, GcnLayer& layer, const Matrix& propagation, Var features) {
  if (propagation.rows() != propagation.cols() || propagation.rows() != features.rows()) {
    throw ShapeError("gcn_forward: propagation matrix " + std::to_string(propagation.rows()) + "x" +
                     std::to_string(propagation.cols()) + " does not match " + std::to_string(features.rows()) +
                     " nodes");
  }
  if (layer.weight.value.rows() != features.cols()) {
    throw ShapeError("gcn_forward: weight expects " + std::to_string(layer.weight.value.rows()) +
                     " features, got " + std::to_string(features.cols()));
  }
  const Var mixed = matmul(tape.constant(propagation), features);
  return activate(matmul(mixed, tape.parameter(layer.weight)), layer.activation);
}

Var GcnLayer::forward(Tape& tape, const Matrix& propagation, Var features) {
  return gcn_forward(tape, *this, propagation, features);
}

Matrix GcnLayer::forward(const Matrix& propagation, const Matrix& features) const {
  if (propagation.rows() != features.rows() || weight.value.rows() != features.cols()) {
    throw ShapeError("GcnLayer::forward: shape mismatch");
  }
  const Matrix z = propagation * features * weight.value;
  switch (activation) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::identity: break;
  }
  return z;
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::clgs: return "clgs";
    case ModelKind::cldr: return "cldr";
    case ModelKind::clner: return "clner";
  }
  return "cldr";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "clgs" || text == "CLGS") return ModelKind::clgs;
  if (text == "cldr" || text == "CLDR") return ModelKind::cldr;
  if (text == "clner" || text == "CLNER") return ModelKind::clner;
  throw ParseError("unknown model kind '" + std::string(text) + "'");
}

namespace {

void require_start_token(const SentenceRecord& record) {
  if (record.tokens.empty() || record.tokens.front() != kStartToken) {
    throw ValidationError("record '" + record.id + "': first-token pooling needs a leading " +
                          std::string(kStartToken) + " token");
  }
}

}  // namespace

ClgsModel::ClgsModel(std::shared_ptr<const EmbeddingSource> base, const ClgsConfig& cfg, std::uint64_t seed)
    : config(cfg), encoder(base, cfg.encoder, mix_seed(seed, 1), "encoder") {
  if (cfg.graph_pool == PoolingMode::first_token) throw ValidationError("graph pooling must be mean or max");
  if (!(cfg.tau > 0.0)) throw ValidationError("temperature must be positive");
  Rng rng(mix_seed(seed, 2));
  const Index width = encoder.output_dim();
  gcn = make_gcn("gcn", base->dimension(), width, Activation::tanh, rng);
  if (cfg.projection) {
    text_projection = make_dense("projection.text", width, width, Activation::relu, rng);
    graph_projection = make_dense("projection.graph", width, width, Activation::relu, rng);
  }
}

Var ClgsModel::sentence_rep(Tape& tape, const SentenceRecord& record) {
  if (config.text_pool == PoolingMode::first_token) require_start_token(record);
  Var s = pool(encoder.forward(tape, record), config.text_pool);
  if (text_projection) s = text_projection->forward(tape, s);
  return s;
}

Var ClgsModel::graph_rep(Tape& tape, const RelationGraph& graph) {
  const Var nodes = gcn.forward(tape, propagation_matrix(graph), tape.constant(graph.node_features));
  Var g = pool(nodes, config.graph_pool);
  if (graph_projection) g = graph_projection->forward(tape, g);
  return g;
}

RowVector ClgsModel::sentence_rep(const SentenceRecord& record) const {
  if (config.text_pool == PoolingMode::first_token) require_start_token(record);
  RowVector s = pool(encoder.embed(record), config.text_pool);
  if (text_projection) s = text_projection->forward(Matrix(s)).row(0);
  return s;
}

RowVector ClgsModel::graph_rep(const RelationGraph& graph) const {
  RowVector g = pool(gcn.forward(propagation_matrix(graph), graph.node_features), config.graph_pool);
  if (graph_projection) g = graph_projection->forward(Matrix(g)).row(0);
  return g;
}

std::vector<Parameter*> ClgsModel::parameters() {
  auto out = encoder.parameters();
  out.push_back(&gcn.weight);
  for (auto* proj : {&text_projection, &graph_projection}) {
    if (*proj) {
      out.push_back(&(*proj)->weight);
      out.push_back(&(*proj)->bias);
    }
  }
  return out;
}

Var clgs_loss(Tape& tape, ClgsModel& model, const SentenceRecord& record, const ClgsSamples& samples) {
  const Var sentence = model.sentence_rep(tape, record);
  std::vector<Var> graphs;
  graphs.reserve(samples.candidate_count());
  graphs.push_back(model.graph_rep(tape, samples.positive));
  for (const auto& g : samples.negatives) graphs.push_back(model.graph_rep(tape, g));
  return contrastive_nll(sentence, graphs, {0}, model.config.tau);
}

Var clgs_batch_loss(Tape& tape, ClgsModel& model, const std::vector<const SentenceRecord*>& batch,
                    const std::vector<ClgsSamples>& samples) {
  if (batch.empty() || batch.size() != samples.size()) throw Error("clgs_batch_loss: batch/sample size mismatch");
  std::vector<Var> sentences;
  std::vector<Var> positives;
  std::vector<Var> losses;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Var sentence = model.sentence_rep(tape, *batch[i]);
    std::vector<Var> graphs;
    graphs.push_back(model.graph_rep(tape, samples[i].positive));
    for (const auto& g : samples[i].negatives) graphs.push_back(model.graph_rep(tape, g));
    losses.push_back(contrastive_nll(sentence, graphs, {0}, model.config.tau));
    sentences.push_back(sentence);
    positives.push_back(graphs.front());
  }
  if (model.config.symmetric) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      losses.push_back(contrastive_nll(positives[i], sentences, {static_cast<Index>(i)}, model.config.tau));
    }
  }
  return scale(sum(hconcat(losses)), 1.0 / static_cast<double>(batch.size()));
}

CldrModel::CldrModel(std::shared_ptr<const EmbeddingSource> base, const CldrConfig& cfg, std::uint64_t seed)
    : config(cfg), encoder(base, cfg.encoder, mix_seed(seed, 1), "encoder") {
  lambda_adjacency(cfg.lambda);
  if (!(cfg.tau > 0.0)) throw ValidationError("temperature must be positive");
  Rng rng(mix_seed(seed, 2));
  gcn = make_gcn("gcn", base->dimension(), encoder.output_dim(), Activation::relu, rng);
}

Var CldrModel::graph_relation_rep(Tape& tape, const RelationGraph& graph) {
  if (graph.node_count() != 2) throw ShapeError("CLDR graphs must have exactly two nodes");
  const Var nodes = gcn.forward(tape, propagation_matrix(graph), tape.constant(graph.node_features));
  return hconcat({select_rows(nodes, {0}), select_rows(nodes, {1})});
}

std::vector<Parameter*> CldrModel::parameters() {
  auto out = encoder.parameters();
  out.push_back(&gcn.weight);
  return out;
}

Var text_relation_rep(Var token_reps, const RelationPair& pair) {
  return hconcat({select_rows(token_reps, {static_cast<Index>(pair.drug)}),
                  select_rows(token_reps, {static_cast<Index>(pair.ae)})});
}

RowVector text_relation_rep(const Matrix& token_reps, const RelationPair& pair) {
  RowVector out(2 * token_reps.cols());
  out << token_reps.row(static_cast<Index>(pair.drug)), token_reps.row(static_cast<Index>(pair.ae));
  return out;
}

Var cldr_loss(Tape& tape, CldrModel& model, const SentenceRecord& record, const CldrSamples& samples) {
  if (record.relations.empty() || samples.positive.graphs.empty()) {
    throw ValidationError("record '" + record.id + "' has no relations; CLDR loss is undefined");
  }
  const Var tokens = model.encoder.forward(tape, record);
  std::vector<Var> per_relation;
  for (std::size_t r = 0; r < samples.positive.graphs.size(); ++r) {
    const auto& positive = samples.positive.graphs[r];
    const Var anchor = text_relation_rep(tokens, positive.relations.front());
    std::vector<Var> candidates;
    candidates.reserve(samples.candidate_count());
    candidates.push_back(model.graph_relation_rep(tape, positive));
    for (const auto& negative : samples.negatives) candidates.push_back(model.graph_relation_rep(tape, negative.graphs[r]));
    per_relation.push_back(contrastive_nll(anchor, candidates, {0}, model.config.tau));
  }
  return per_relation.size() == 1 ? per_relation.front() : sum(hconcat(per_relation));
}

ClnerModel::ClnerModel(std::shared_ptr<const EmbeddingSource> base, const ClnerConfig& cfg, std::uint64_t seed)
    : config(cfg), encoder(base, cfg.encoder, mix_seed(seed, 1), "encoder") {
  if (cfg.encoder.head_layers != 1) throw ValidationError("the entity model takes exactly one dense layer");
  if (!(cfg.tau > 0.0)) throw ValidationError("temperature must be positive");
}

std::vector<Parameter*> ClnerModel::parameters() { return encoder.parameters(); }

EntitySample sample_balanced_entities(const std::vector<const SentenceRecord*>& batch, std::size_t quota,
                                      std::uint64_t seed) {
  std::array<std::vector<EntitySample::Item>, kBioTagCount> by_tag;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& r = *batch[b];
    for (std::size_t t = 0; t < r.size(); ++t) by_tag[static_cast<std::size_t>(r.tags[t])].push_back({b, t, r.tags[t]});
  }
  EntitySample sample;
  Rng rng(seed);
  for (std::size_t k = 0; k < kBioTagCount; ++k) {
    auto& pool = by_tag[k];
    sample.available[k] = pool.size();
    if (pool.size() < 2) {
      if (!pool.empty()) {
        log(LogLevel::debug, "entity sampling: tag " + std::string(to_string(static_cast<BioTag>(k))) +
                                 " has a single token in the batch; skipped");
      } else {
        log(LogLevel::debug, "entity sampling: tag " + std::string(to_string(static_cast<BioTag>(k))) +
                                 " absent from the batch; skipped");
      }
      continue;
    }
    const std::size_t take = std::min(quota, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(pool[i], pool[i + rng.uniform_index(pool.size() - i)]);
      sample.items.push_back(pool[i]);
    }
  }
  std::sort(sample.items.begin(), sample.items.end(), [](const auto& a, const auto& b) {
    return std::tie(a.batch_index, a.token) < std::tie(b.batch_index, b.token);
  });
  return sample;
}

Var clner_loss(Tape& tape, ClnerModel& model, const std::vector<const SentenceRecord*>& batch,
               const EntitySample& sample) {
  if (sample.items.size() < 2) throw ValidationError("entity loss needs at least two sampled tokens");
  std::vector<Var> rows;
  std::size_t current = batch.size();
  Var encoded;
  for (const auto& item : sample.items) {
    if (item.batch_index >= batch.size()) throw Error("entity sample refers outside the batch");
    if (item.batch_index != current) {
      current = item.batch_index;
      encoded = model.encoder.forward(tape, *batch[current]);
    }
    rows.push_back(select_rows(encoded, {static_cast<Index>(item.token)}));
  }
  const Var unit = normalize_rows(vconcat(rows));
  const Var similarity = matmul(unit, transpose(unit));

  const auto n = static_cast<Index>(sample.items.size());
  std::vector<Var> losses;
  losses.reserve(sample.items.size());
  for (Index a = 0; a < n; ++a) {
    std::vector<Index> others;
    std::vector<Index> positives;
    for (Index c = 0; c < n; ++c) {
      if (c == a) continue;
      if (sample.items[static_cast<std::size_t>(c)].tag == sample.items[static_cast<std::size_t>(a)].tag) {
        positives.push_back(static_cast<Index>(others.size()));
      }
      others.push_back(c);
    }
    if (positives.empty()) {
      throw ValidationError("entity loss: tag " + std::string(to_string(sample.items[static_cast<std::size_t>(a)].tag)) +
                            " has no positive candidate");
    }
    const Var sims = select_cols(select_rows(similarity, {a}), others);
    losses.push_back(contrastive_nll_from_similarities(sims, positives, model.config.tau));
  }
  return sum(hconcat(losses));
}

}  // namespace relcl
