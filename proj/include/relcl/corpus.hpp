#pragma once

#include "relcl/common.hpp"

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relcl {

enum class EntityType { drug, ae };

enum class BioTag { O, B_DRUG, I_DRUG, B_AE, I_AE };

inline constexpr std::size_t kBioTagCount = 5;

std::string_view to_string(BioTag tag);
std::string_view to_string(EntityType type);
BioTag parse_bio_tag(std::string_view text);
EntityType parse_entity_type(std::string_view text);

std::optional<EntityType> entity_type_of(BioTag tag);
bool is_begin(BioTag tag);

/// Inclusive token span [start, end] of one entity.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityType type = EntityType::drug;

  auto operator<=>(const Span&) const = default;
};

/// A relation expressed through entity heads (last token of each entity).
struct RelationPair {
  std::size_t drug = 0;
  std::size_t ae = 0;

  auto operator<=>(const RelationPair&) const = default;
};

struct SentenceRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<BioTag> tags;
  std::vector<RelationPair> relations;
  std::vector<int> encoded;
  std::vector<int> attention_mask;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const SentenceRecord&) const = default;
};

/// Throws ValidationError naming the first offending index.
void validate_bio(const std::vector<BioTag>& tags);

/// Checks every SentenceRecord invariant; throws ValidationError.
void validate_record(const SentenceRecord& record);

/// Tags for non-overlapping spans over `token_count` tokens.
std::vector<BioTag> encode_bio(const std::vector<Span>& spans, std::size_t token_count);

/// Standard BIO decoding. An I-X that does not continue an X entity is
/// repaired to B-X.
std::vector<Span> decode_bio(const std::vector<BioTag>& tags);

/// Head pair of a (drug, adverse effect) relation: the last token of each span.
RelationPair relation_heads(const Span& drug, const Span& ae);

/// Token-id vocabulary: 0 is padding, 1 unknown, the rest sorted surface forms.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;

  static Vocabulary build(const std::vector<SentenceRecord>& records);

  int id(std::string_view token) const;
  std::size_t size() const { return tokens_.size() + 2; }

 private:
  std::vector<std::string> tokens_;
};

/// Fills `encoded` and `attention_mask`. A pad length of 0 means the
/// longest sentence in the corpus.
void encode_records(std::vector<SentenceRecord>& records, std::size_t pad_length = 0);

SentenceRecord load_record(const std::filesystem::path& path);
void write_record(const SentenceRecord& record, const std::filesystem::path& path);

/// Loads every `*.json` record in a directory, validated and sorted by id.
/// Records without an encoding are encoded against the corpus vocabulary.
std::vector<SentenceRecord> load_corpus(const std::filesystem::path& dir);
void write_corpus(const std::vector<SentenceRecord>& records, const std::filesystem::path& dir);

struct FoldSplit {
  int fold_index = 1;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

std::vector<FoldSplit> make_folds(const std::vector<SentenceRecord>& corpus, int n, std::uint64_t seed);

/// Split files are `fold<K>_train.txt` / `fold<K>_test.txt`, one id per line.
std::vector<FoldSplit> load_splits(const std::filesystem::path& dir);
void write_splits(const std::vector<FoldSplit>& folds, const std::filesystem::path& dir);

/// Records whose id appears in `ids`, in corpus order. Unknown ids throw.
std::vector<SentenceRecord> select_records(const std::vector<SentenceRecord>& corpus,
                                           const std::vector<std::string>& ids);

struct CorpusStats {
  std::size_t sentence_count = 0;
  std::size_t relation_count = 0;
  std::size_t entity_count = 0;
  std::size_t drug_count = 0;
  std::size_t ae_count = 0;
  std::size_t unique_drug_count = 0;
  std::size_t unique_ae_count = 0;

  bool operator==(const CorpusStats&) const = default;
};

/// Unique counts are case-insensitive over entity surface strings.
CorpusStats corpus_stats(const std::vector<SentenceRecord>& records);
std::string stats_json(const CorpusStats& stats);

struct SynthConfig {
  std::size_t sentences = 100;
  std::size_t drug_vocab = 30;
  std::size_t ae_vocab = 30;
  std::size_t modifier_vocab = 8;
  std::size_t filler_vocab = 120;
  std::size_t min_fillers = 4;
  std::size_t max_fillers = 10;
  std::size_t max_drugs = 2;
  std::size_t max_aes = 2;
  double multiword_fraction = 0.15;
  double relation_density = 1.0;
  std::uint64_t seed = 1;
};

inline constexpr std::string_view kStartToken = "[CLS]";

/// Deterministic corpus with planted drug/AE vocabularies. Every sentence
/// starts with kStartToken; each (drug, AE) pair of a sentence is related
/// with probability `relation_density`.
std::vector<SentenceRecord> synth_corpus(const SynthConfig& config);

}  // namespace relcl
