#pragma once

#include "relcl/corpus.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace relcl {

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& other);
  bool operator==(const Counts&) const = default;
};

/// `degenerate` marks a zero denominator somewhere; the affected value is 0.
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;
};

Prf prf(const Counts& counts);

/// A relation between two full entity spans.
struct EntityRelation {
  Span drug;
  Span ae;

  auto operator<=>(const EntityRelation&) const = default;
};

/// Exact boundary and type match. Duplicates on either side count once.
Counts strict_entity_match(std::vector<Span> predicted, std::vector<Span> gold);

/// Both entities must match strictly.
Counts strict_relation_match(std::vector<EntityRelation> predicted, std::vector<EntityRelation> gold);

/// Relaxed relation match on head tokens only.
Counts re_minus(std::vector<RelationPair> predicted, std::vector<RelationPair> gold);

std::vector<RelationPair> heads_of(const std::vector<EntityRelation>& relations);

/// Per-class P/R/F1 averaged with equal weight.
Prf macro_average(const std::vector<Prf>& per_class);

struct FoldAggregate {
  std::vector<Prf> per_fold;
  /// Arithmetic means of the per-fold P, R and F1. The mean F1 is not
  /// recomputed from the mean P and R.
  Prf mean;
};

FoldAggregate cross_fold_aggregate(const std::vector<Prf>& per_fold);

/// Entities and relations of one sentence, gold or predicted.
struct Annotation {
  std::string id;
  std::vector<Span> entities;
  std::vector<EntityRelation> relations;
};

/// Gold annotation of a record; relations are lifted from head pairs to the
/// spans that end on those heads.
Annotation annotation_of(const SentenceRecord& record);

/// One JSON object per line:
/// {"id": "...", "entities": [[start, end, "DRUG"], ...], "relations": [[i, j], ...]}
/// where i and j index the entities array (drug first).
std::vector<Annotation> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::vector<Annotation>& annotations, const std::filesystem::path& path);
std::string format_annotation(const Annotation& annotation);

enum class ScoreMode { ner, re, re_minus };

std::string_view to_string(ScoreMode mode);
ScoreMode parse_score_mode(std::string_view text);

struct ScoreReport {
  ScoreMode mode = ScoreMode::re;
  Counts counts;
  Prf score;
  /// NER only: DRUG and AE separately; `score` is then their macro average.
  std::map<std::string, std::pair<Counts, Prf>> per_class;
};

/// Micro-counts over sentences matched by id. A predicted id with no gold
/// sentence is an error; a gold sentence with no prediction counts as empty.
ScoreReport score(const std::vector<Annotation>& gold, const std::vector<Annotation>& predicted, ScoreMode mode);

std::string report_json(const ScoreReport& report);

}  // namespace relcl
