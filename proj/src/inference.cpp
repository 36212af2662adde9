#include "relcl/inference.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace relcl {

std::string_view to_string(SpaceKind kind) { return kind == SpaceKind::relation ? "relation" : "entity"; }

SpaceKind parse_space_kind(std::string_view text) {
  if (text == "relation") return SpaceKind::relation;
  if (text == "entity") return SpaceKind::entity;
  throw ParseError("unknown space kind '" + std::string(text) + "'");
}

void validate(const TrainedSpace& space, bool allow_unknown) {
  if (static_cast<Index>(space.labels.size()) != space.vectors.rows()) {
    throw ValidationError("space has " + std::to_string(space.labels.size()) + " labels for " +
                          std::to_string(space.vectors.rows()) + " vectors");
  }
  for (const auto& label : space.labels) {
    if (allow_unknown && label == "?") continue;
    const bool ok = space.kind == SpaceKind::relation
                        ? (label == kRelationLabel || label == kNoRelationLabel)
                        : [&] {
                            try {
                              parse_bio_tag(label);
                              return true;
                            } catch (const Error&) {
                              return false;
                            }
                          }();
    if (!ok) throw ValidationError("label '" + label + "' does not belong to a " + std::string(to_string(space.kind)) + " space");
  }
}

void write_space(const TrainedSpace& space, const fs::path& path) {
  validate(space, true);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "# relcl space kind=" << to_string(space.kind) << " produced_by=" << space.produced_by << '\n';
  out << space.dimension() << ' ' << space.size() << '\n';
  for (std::size_t i = 0; i < space.size(); ++i) {
    out << space.labels[i];
    for (Index c = 0; c < space.vectors.cols(); ++c) out << ' ' << format_double(space.vectors(static_cast<Index>(i), c));
    out << '\n';
  }
}

TrainedSpace read_space(const fs::path& path, bool allow_unknown) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open space file " + path.string());
  TrainedSpace space;
  std::string line;
  bool have_kind = false;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    std::istringstream words(line.substr(1));
    std::string word;
    while (words >> word) {
      const auto eq = word.find('=');
      if (eq == std::string::npos) continue;
      const auto key = word.substr(0, eq);
      if (key == "kind") {
        space.kind = parse_space_kind(word.substr(eq + 1));
        have_kind = true;
      } else if (key == "produced_by") {
        space.produced_by = word.substr(eq + 1);
      }
    }
  }
  long long dim = -1;
  long long count = -1;
  if (!(std::istringstream(line) >> dim >> count) || dim < 1 || count < 0) {
    throw ParseError(path.string() + ": expected '<dimension> <count>' header");
  }
  space.vectors.resize(count, dim);
  for (long long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ParseError(path.string() + ": expected " + std::to_string(count) + " rows");
    std::istringstream row(line);
    std::string label;
    row >> label;
    for (long long c = 0; c < dim; ++c) {
      if (!(row >> space.vectors(i, c))) {
        throw ParseError(path.string() + ": row " + std::to_string(i + 1) + " has fewer than " + std::to_string(dim) +
                         " values");
      }
    }
    std::string extra;
    if (row >> extra) throw ParseError(path.string() + ": row " + std::to_string(i + 1) + " has extra values");
    space.labels.push_back(label);
  }
  if (!have_kind && !space.labels.empty()) {
    const auto& l = space.labels.front();
    space.kind = (l == kRelationLabel || l == kNoRelationLabel) ? SpaceKind::relation : SpaceKind::entity;
  }
  validate(space, allow_unknown);
  return space;
}

RelationReps extract_relation_reps(const EncoderStack& encoder, const std::vector<SentenceRecord>& records,
                                   PairMode mode, std::size_t negatives, std::uint64_t seed) {
  std::vector<RowVector> rows;
  RelationReps out;
  out.space.kind = SpaceKind::relation;
  out.space.produced_by = hex64(encoder.base().fingerprint());
  const auto emit = [&](const Matrix& reps, std::size_t r, const RelationPair& pair, bool related) {
    rows.push_back(text_relation_rep(reps, pair));
    out.space.labels.emplace_back(related ? kRelationLabel : kNoRelationLabel);
    out.origins.push_back({r, pair});
  };
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& record = records[r];
    if (mode == PairMode::gold && record.relations.empty()) continue;
    const Matrix reps = encoder.embed(record);
    if (mode == PairMode::gold) {
      for (const auto& rel : record.relations) emit(reps, r, rel, true);
      if (negatives == 0) continue;
      const auto pool = CorruptionPool::of(record);
      Rng rng(mix_seed(seed, r));
      for (const auto& rel : record.relations) {
        for (std::size_t k = 0; k < negatives; ++k) {
          try {
            emit(reps, r, corrupt_pair(record, pool, rel, rng), false);
          } catch (const ValidationError& e) {
            log(LogLevel::debug, e.what());
            break;
          }
        }
      }
    } else {
      const std::set<RelationPair> gold(record.relations.begin(), record.relations.end());
      for (std::size_t i = 0; i < record.size(); ++i) {
        for (std::size_t j = 0; j < record.size(); ++j) {
          if (i != j) emit(reps, r, RelationPair{i, j}, gold.count(RelationPair{i, j}) != 0);
        }
      }
    }
  }
  out.space.vectors.resize(static_cast<Index>(rows.size()), 2 * encoder.output_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) out.space.vectors.row(static_cast<Index>(i)) = rows[i];
  return out;
}

EntityReps extract_entity_reps(const EncoderStack& encoder, const std::vector<SentenceRecord>& records) {
  EntityReps out;
  out.space.kind = SpaceKind::entity;
  out.space.produced_by = hex64(encoder.base().fingerprint());
  std::size_t total = 0;
  for (const auto& r : records) total += r.size();
  out.space.vectors.resize(static_cast<Index>(total), encoder.output_dim());
  Index row = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Matrix reps = encoder.embed(records[r]);
    for (std::size_t t = 0; t < records[r].size(); ++t) {
      out.space.vectors.row(row++) = reps.row(static_cast<Index>(t));
      out.space.labels.emplace_back(to_string(records[r].tags[t]));
      out.origins.push_back({r, t});
    }
  }
  return out;
}

std::string_view to_string(Metric metric) { return metric == Metric::cosine ? "cosine" : "euclidean"; }

Metric parse_metric(std::string_view text) {
  if (text == "cosine") return Metric::cosine;
  if (text == "euclidean") return Metric::euclidean;
  throw ParseError("unknown metric '" + std::string(text) + "'");
}

namespace {

Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> nearest_neighbors(const Matrix& stored, const Matrix& queries, std::size_t k,
                                                        Metric metric) {
  const auto n = static_cast<std::size_t>(stored.rows());
  if (n == 0) throw ValidationError("knn: empty space");
  if (k < 1 || k > n) {
    throw ValidationError("knn: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
  if (queries.cols() != stored.cols()) {
    throw ShapeError("knn: query dimension " + std::to_string(queries.cols()) + " differs from space dimension " +
                     std::to_string(stored.cols()));
  }
  const Matrix s = metric == Metric::cosine ? unit_rows(stored) : stored;
  const Eigen::VectorXd stored_sq = s.rowwise().squaredNorm();
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(queries.rows()));
  std::vector<std::size_t> order(n);
  constexpr Index chunk = 256;
  for (Index start = 0; start < queries.rows(); start += chunk) {
    const Index rows = std::min(chunk, queries.rows() - start);
    Matrix q = queries.middleRows(start, rows);
    if (metric == Metric::cosine) q = unit_rows(q);
    Matrix score = q * s.transpose();
    if (metric == Metric::euclidean) {
      // Larger is nearer: -(|v|^2 - 2 q.v); |q|^2 is constant per query.
      score = 2.0 * score;
      score.rowwise() -= stored_sq.transpose();
    }
    for (Index i = 0; i < rows; ++i) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      const auto row = score.row(i);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          const double sa = row(static_cast<Index>(a));
                          const double sb = row(static_cast<Index>(b));
                          return sa != sb ? sa > sb : a < b;
                        });
      out[static_cast<std::size_t>(start + i)].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }
  return out;
}

std::string vote(const std::vector<std::string>& labels, const std::vector<std::size_t>& neighbors, std::size_t k) {
  if (k < 1 || k > neighbors.size()) throw ValidationError("vote: k exceeds the neighbor list");
  std::map<std::string_view, std::size_t> counts;
  std::size_t best = 0;
  for (std::size_t i = 0; i < k; ++i) best = std::max(best, ++counts[labels[neighbors[i]]]);
  for (std::size_t i = 0; i < k; ++i) {
    if (counts[labels[neighbors[i]]] == best) return labels[neighbors[i]];
  }
  return labels[neighbors.front()];
}

std::vector<std::string> knn_classify(const TrainedSpace& space, const Matrix& queries, const KnnConfig& config) {
  const auto neighbors = nearest_neighbors(space.vectors, queries, config.k, config.metric);
  std::vector<std::string> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(vote(space.labels, n, config.k));
  return out;
}

Counts label_counts(const std::vector<std::string>& predicted, const std::vector<std::string>& gold,
                    std::string_view positive) {
  if (predicted.size() != gold.size()) throw ShapeError("label_counts: length mismatch");
  Counts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == positive;
    const bool g = gold[i] == positive;
    if (p && g) ++c.tp;
    if (p && !g) ++c.fp;
    if (!p && g) ++c.fn;
  }
  return c;
}

double selection_f1(SpaceKind kind, const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  if (kind == SpaceKind::relation) return prf(label_counts(predicted, gold, kRelationLabel)).f1;
  std::vector<Prf> per_tag;
  for (auto tag : {BioTag::B_DRUG, BioTag::I_DRUG, BioTag::B_AE, BioTag::I_AE}) {
    const auto name = to_string(tag);
    const bool present = std::find(gold.begin(), gold.end(), name) != gold.end() ||
                         std::find(predicted.begin(), predicted.end(), name) != predicted.end();
    if (present) per_tag.push_back(prf(label_counts(predicted, gold, name)));
  }
  return per_tag.empty() ? 0.0 : macro_average(per_tag).f1;
}

std::size_t select_k(const TrainedSpace& space, const Matrix& queries, const std::vector<std::string>& labels,
                     const std::vector<std::size_t>& grid, Metric metric) {
  if (grid.empty()) throw ValidationError("select_k: empty k grid");
  if (queries.rows() == 0) throw ValidationError("select_k: empty validation set");
  if (static_cast<Index>(labels.size()) != queries.rows()) throw ShapeError("select_k: label count differs from queries");
  const auto neighbors = nearest_neighbors(space.vectors, queries, *std::max_element(grid.begin(), grid.end()), metric);
  std::size_t best_k = 0;
  double best_f1 = -1.0;
  std::vector<std::size_t> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  for (auto k : sorted) {
    std::vector<std::string> predicted;
    predicted.reserve(neighbors.size());
    for (const auto& n : neighbors) predicted.push_back(vote(space.labels, n, k));
    const double f1 = selection_f1(space.kind, predicted, labels);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_k = k;
    }
  }
  return best_k;
}

SimilarityCheck similarity_check(const ClgsModel& model, const std::vector<SentenceRecord>& records,
                                 std::size_t negatives, std::uint64_t seed) {
  SimilarityCheck out;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& record = records[r];
    if (record.relations.empty()) continue;
    const Matrix& rows = model.encoder.base().rows(record);
    ClgsSamples samples;
    try {
      samples = sample_negatives_clgs(record, rows, build_subgraph(record, rows), negatives, mix_seed(seed, r));
    } catch (const ValidationError& e) {
      log(LogLevel::debug, e.what());
      continue;
    }
    const RowVector s = model.sentence_rep(record);
    const auto similarity = [&](const RelationGraph& g) {
      const RowVector v = model.graph_rep(g);
      const double denom = s.norm() * v.norm();
      return denom > 0.0 ? s.dot(v) / denom : 0.0;
    };
    const double positive = similarity(samples.positive);
    bool wins = true;
    for (const auto& g : samples.negatives) wins = wins && positive > similarity(g);
    correct += wins ? 1 : 0;
    ++out.evaluated;
  }
  if (out.evaluated == 0) throw ValidationError("similarity check: no sentence with a corruptible relation");
  out.accuracy = static_cast<double>(correct) / static_cast<double>(out.evaluated);
  return out;
}

ProbeResult linear_probe(const EncoderStack& encoder, const std::vector<SentenceRecord>& train,
                         const std::vector<SentenceRecord>& test, std::uint64_t seed, const ProbeConfig& config) {
  // Training rows: gold positives and hard negatives, then random non-gold pairs.
  auto gold = extract_relation_reps(encoder, train, PairMode::gold, config.negatives, seed);
  std::vector<RowVector> extra;
  Rng rng(mix_seed(seed, 0x9e0b));
  const std::size_t wanted = static_cast<std::size_t>(
      std::count(gold.space.labels.begin(), gold.space.labels.end(), std::string(kNoRelationLabel)));
  std::vector<std::size_t> usable;
  for (std::size_t r = 0; r < train.size(); ++r) {
    if (train[r].size() >= 2) usable.push_back(r);
  }
  for (std::size_t added = 0; added < wanted && !usable.empty();) {
    const auto& record = train[usable[rng.uniform_index(usable.size())]];
    const RelationPair pair{rng.uniform_index(record.size()), rng.uniform_index(record.size())};
    if (pair.drug == pair.ae ||
        std::find(record.relations.begin(), record.relations.end(), pair) != record.relations.end()) {
      continue;
    }
    extra.push_back(text_relation_rep(encoder.embed(record), pair));
    ++added;
  }
  const Index n = gold.space.vectors.rows() + static_cast<Index>(extra.size());
  if (n == 0) throw ValidationError("linear probe: no training pairs");
  Matrix x(n, gold.space.vectors.cols());
  x.topRows(gold.space.vectors.rows()) = gold.space.vectors;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < gold.space.vectors.rows(); ++i) y(i) = gold.space.labels[static_cast<std::size_t>(i)] == kRelationLabel;
  for (std::size_t i = 0; i < extra.size(); ++i) x.row(gold.space.vectors.rows() + static_cast<Index>(i)) = extra[i];

  const RowVector mean = x.colwise().mean();
  RowVector stddev = ((x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  stddev = stddev.cwiseMax(1e-8);
  const auto standardize = [&](const Matrix& m) -> Matrix {
    return (m.rowwise() - mean).array().rowwise() / stddev.array();
  };
  const Matrix xs = standardize(x);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(xs.cols());
  double b = 0.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const Eigen::VectorXd z = (xs * w).array() + b;
    const Eigen::VectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    const Eigen::VectorXd err = p - y;
    w -= config.learning_rate * (xs.transpose() * err / static_cast<double>(n) + config.l2 * w);
    b -= config.learning_rate * err.mean();
  }

  const auto candidates = extract_relation_reps(encoder, test, PairMode::all_candidates);
  ProbeResult out;
  if (candidates.space.size() > 0) {
    const Eigen::VectorXd z = (standardize(candidates.space.vectors) * w).array() + b;
    std::vector<std::string> predicted;
    for (Index i = 0; i < z.size(); ++i) predicted.emplace_back(z(i) > 0.0 ? kRelationLabel : kNoRelationLabel);
    out.counts = label_counts(predicted, candidates.space.labels, kRelationLabel);
  }
  out.score = prf(out.counts);
  return out;
}

}  // namespace relcl
