#pragma once

#include "relcl/evaluation.hpp"
#include "relcl/models.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace relcl {

enum class SpaceKind { relation, entity };

std::string_view to_string(SpaceKind kind);
SpaceKind parse_space_kind(std::string_view text);

inline constexpr std::string_view kRelationLabel = "relation";
inline constexpr std::string_view kNoRelationLabel = "no-relation";

/// Labeled vectors for KNN. Entity spaces carry BIO tag labels.
struct TrainedSpace {
  SpaceKind kind = SpaceKind::relation;
  std::vector<std::string> labels;
  Matrix vectors;
  /// Fingerprint of the model manifest (or embedding source) behind the vectors.
  std::string produced_by;

  std::size_t size() const { return labels.size(); }
  Index dimension() const { return vectors.cols(); }
};

/// Checks equal dimensions and that every label belongs to the kind's set.
/// Query files may also use "?" for unknown labels when `allow_unknown`.
void validate(const TrainedSpace& space, bool allow_unknown = false);

/// Text layout:
///   # relcl space kind=<relation|entity> produced_by=<hex>
///   <dimension> <count>
///   <label> <v_1> ... <v_dimension>      (count lines)
void write_space(const TrainedSpace& space, const std::filesystem::path& path);
TrainedSpace read_space(const std::filesystem::path& path, bool allow_unknown = false);

enum class PairMode { gold, all_candidates };

/// Where a vector came from.
struct PairOrigin {
  std::size_t record = 0;
  RelationPair pair;
};

struct RelationReps {
  TrainedSpace space;
  std::vector<PairOrigin> origins;
};

/// Gold mode: one vector per relation plus `negatives` hard negatives per
/// relation from corrupt_pair, seeded per record. Candidate mode: every ordered
/// pair (i, j), i != j, of real tokens, labeled against the gold relations.
RelationReps extract_relation_reps(const EncoderStack& encoder, const std::vector<SentenceRecord>& records,
                                   PairMode mode, std::size_t negatives = 7, std::uint64_t seed = 1);

struct TokenOrigin {
  std::size_t record = 0;
  std::size_t token = 0;
};

struct EntityReps {
  TrainedSpace space;
  std::vector<TokenOrigin> origins;
};

/// One vector per real token, labeled with its BIO tag.
EntityReps extract_entity_reps(const EncoderStack& encoder, const std::vector<SentenceRecord>& records);

enum class Metric { cosine, euclidean };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);

struct KnnConfig {
  std::size_t k = 1;
  Metric metric = Metric::cosine;
};

/// Indices of the `k` nearest stored vectors for each query, nearest first.
/// Equal scores keep the lower stored index first. Under cosine a zero vector
/// has similarity 0 to everything.
std::vector<std::vector<std::size_t>> nearest_neighbors(const Matrix& stored, const Matrix& queries, std::size_t k,
                                                        Metric metric);

/// Majority label of the first `k` neighbors; a tie goes to the tied label
/// that appears first in the neighbor order.
std::string vote(const std::vector<std::string>& labels, const std::vector<std::size_t>& neighbors, std::size_t k);

std::vector<std::string> knn_classify(const TrainedSpace& space, const Matrix& queries, const KnnConfig& config);

/// F1 used to pick k: the relation label for relation spaces, the macro
/// average over B-/I- tags for entity spaces.
double selection_f1(SpaceKind kind, const std::vector<std::string>& predicted, const std::vector<std::string>& gold);

inline const std::vector<std::size_t> kDefaultKGrid{1, 3, 5, 7, 9, 11};

/// Grid value with the best validation F1; ties go to the smaller k.
std::size_t select_k(const TrainedSpace& space, const Matrix& queries, const std::vector<std::string>& labels,
                     const std::vector<std::size_t>& grid = kDefaultKGrid, Metric metric = Metric::cosine);

/// Binary counts for `positive` over parallel label lists.
Counts label_counts(const std::vector<std::string>& predicted, const std::vector<std::string>& gold,
                    std::string_view positive);

struct SimilarityCheck {
  double accuracy = 0.0;
  std::size_t evaluated = 0;
};

/// Fraction of sentences whose positive graph is strictly more similar to the
/// sentence than every one of `negatives` corrupted graphs. Sentences without
/// relations or without corruptible relations are skipped.
SimilarityCheck similarity_check(const ClgsModel& model, const std::vector<SentenceRecord>& records,
                                 std::size_t negatives, std::uint64_t seed);

struct ProbeConfig {
  std::size_t epochs = 400;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  /// Hard negatives per gold relation; the same number of random non-gold
  /// candidate pairs is added on top.
  std::size_t negatives = 3;
};

struct ProbeResult {
  Counts counts;
  Prf score;
};

/// Logistic regression on standardized relation vectors of the frozen
/// encoder; scored on every candidate pair of `test`.
ProbeResult linear_probe(const EncoderStack& encoder, const std::vector<SentenceRecord>& train,
                         const std::vector<SentenceRecord>& test, std::uint64_t seed, const ProbeConfig& config = {});

}  // namespace relcl
