#include "relcl/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace relcl {

std::string_view to_string(BioTag tag) {
  switch (tag) {
    case BioTag::O: return "O";
    case BioTag::B_DRUG: return "B-DRUG";
    case BioTag::I_DRUG: return "I-DRUG";
    case BioTag::B_AE: return "B-AE";
    case BioTag::I_AE: return "I-AE";
  }
  return "O";
}

std::string_view to_string(EntityType type) { return type == EntityType::drug ? "DRUG" : "AE"; }

BioTag parse_bio_tag(std::string_view text) {
  if (text == "O") return BioTag::O;
  if (text == "B-DRUG") return BioTag::B_DRUG;
  if (text == "I-DRUG") return BioTag::I_DRUG;
  if (text == "B-AE") return BioTag::B_AE;
  if (text == "I-AE") return BioTag::I_AE;
  throw ParseError("unknown BIO tag '" + std::string(text) + "'");
}

EntityType parse_entity_type(std::string_view text) {
  if (text == "DRUG") return EntityType::drug;
  if (text == "AE") return EntityType::ae;
  throw ParseError("unknown entity type '" + std::string(text) + "'");
}

std::optional<EntityType> entity_type_of(BioTag tag) {
  switch (tag) {
    case BioTag::B_DRUG:
    case BioTag::I_DRUG: return EntityType::drug;
    case BioTag::B_AE:
    case BioTag::I_AE: return EntityType::ae;
    case BioTag::O: break;
  }
  return std::nullopt;
}

bool is_begin(BioTag tag) { return tag == BioTag::B_DRUG || tag == BioTag::B_AE; }

void validate_bio(const std::vector<BioTag>& tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto type = entity_type_of(tags[i]);
    if (!type || is_begin(tags[i])) continue;
    const auto prev = i == 0 ? std::nullopt : entity_type_of(tags[i - 1]);
    if (!prev || *prev != *type) {
      throw ValidationError("invalid BIO sequence: " + std::string(to_string(tags[i])) + " at token index " +
                            std::to_string(i) + " does not continue an entity of the same type");
    }
  }
}

std::vector<Span> decode_bio(const std::vector<BioTag>& tags) {
  std::vector<Span> spans;
  std::optional<Span> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto type = entity_type_of(tags[i]);
    const bool continues = type && !is_begin(tags[i]) && open && open->type == *type;
    if (continues) {
      open->end = i;
      continue;
    }
    if (open) spans.push_back(*open);
    open.reset();
    if (type) open = Span{i, i, *type};
  }
  if (open) spans.push_back(*open);
  return spans;
}

std::vector<BioTag> encode_bio(const std::vector<Span>& spans, std::size_t token_count) {
  std::vector<BioTag> tags(token_count, BioTag::O);
  std::vector<bool> used(token_count, false);
  for (const auto& span : spans) {
    if (span.start > span.end || span.end >= token_count) {
      throw ValidationError("span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                            "] outside a sentence of " + std::to_string(token_count) + " tokens");
    }
    for (std::size_t i = span.start; i <= span.end; ++i) {
      if (used[i]) throw ValidationError("overlapping spans at token index " + std::to_string(i));
      used[i] = true;
      const bool drug = span.type == EntityType::drug;
      if (i == span.start) {
        tags[i] = drug ? BioTag::B_DRUG : BioTag::B_AE;
      } else {
        tags[i] = drug ? BioTag::I_DRUG : BioTag::I_AE;
      }
    }
  }
  return tags;
}

RelationPair relation_heads(const Span& drug, const Span& ae) {
  if (drug.type != EntityType::drug || ae.type != EntityType::ae) {
    throw ValidationError("relation endpoints must be a drug span and an AE span");
  }
  return {drug.end, ae.end};
}

void validate_record(const SentenceRecord& record) {
  const std::string where = "record '" + record.id + "': ";
  if (record.tags.size() != record.tokens.size()) {
    throw ValidationError(where + "tags length " + std::to_string(record.tags.size()) + " != tokens length " +
                          std::to_string(record.tokens.size()));
  }
  try {
    validate_bio(record.tags);
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  }
  const auto spans = decode_bio(record.tags);
  auto is_head_of = [&](std::size_t index, EntityType type) {
    return std::any_of(spans.begin(), spans.end(),
                       [&](const Span& s) { return s.end == index && s.type == type; });
  };
  std::set<RelationPair> seen;
  for (const auto& rel : record.relations) {
    const std::string pair = "(" + std::to_string(rel.drug) + ", " + std::to_string(rel.ae) + ")";
    if (rel.drug >= record.size() || rel.ae >= record.size()) {
      throw ValidationError(where + "relation " + pair + " out of range");
    }
    if (!is_head_of(rel.drug, EntityType::drug)) {
      throw ValidationError(where + "relation " + pair + ": drug index is not the last token of a DRUG entity");
    }
    if (!is_head_of(rel.ae, EntityType::ae)) {
      throw ValidationError(where + "relation " + pair + ": AE index is not the last token of an AE entity");
    }
    if (!seen.insert(rel).second) throw ValidationError(where + "duplicate relation " + pair);
  }
  if (record.attention_mask.size() != record.encoded.size()) {
    throw ValidationError(where + "attention_mask length differs from encoded length");
  }
  if (!record.encoded.empty()) {
    if (record.encoded.size() < record.size()) throw ValidationError(where + "encoded shorter than tokens");
    for (std::size_t i = 0; i < record.attention_mask.size(); ++i) {
      const int expected = i < record.size() ? 1 : 0;
      if (record.attention_mask[i] != expected) {
        throw ValidationError(where + "attention_mask must be a prefix of ones covering the tokens (index " +
                              std::to_string(i) + ")");
      }
    }
  }
}

Vocabulary Vocabulary::build(const std::vector<SentenceRecord>& records) {
  std::set<std::string> unique;
  for (const auto& r : records) unique.insert(r.tokens.begin(), r.tokens.end());
  Vocabulary v;
  v.tokens_.assign(unique.begin(), unique.end());
  return v;
}

int Vocabulary::id(std::string_view token) const {
  const auto it = std::lower_bound(tokens_.begin(), tokens_.end(), token);
  if (it == tokens_.end() || *it != token) return kUnknown;
  return static_cast<int>(it - tokens_.begin()) + 2;
}

void encode_records(std::vector<SentenceRecord>& records, std::size_t pad_length) {
  std::size_t longest = 0;
  for (const auto& r : records) longest = std::max(longest, r.size());
  if (pad_length == 0) pad_length = longest;
  if (pad_length < longest) {
    throw ValidationError("pad length " + std::to_string(pad_length) + " shorter than longest sentence (" +
                          std::to_string(longest) + ")");
  }
  const auto vocab = Vocabulary::build(records);
  for (auto& r : records) {
    r.encoded.assign(pad_length, Vocabulary::kPad);
    r.attention_mask.assign(pad_length, 0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      r.encoded[i] = vocab.id(r.tokens[i]);
      r.attention_mask[i] = 1;
    }
  }
}

namespace {

SentenceRecord record_from_json(const json& j) {
  SentenceRecord r;
  r.id = j.at("id").get<std::string>();
  r.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& t : j.at("tags")) r.tags.push_back(parse_bio_tag(t.get<std::string>()));
  for (const auto& p : j.at("relations")) {
    if (!p.is_array() || p.size() != 2) throw ParseError("relation must be a [drug, ae] index pair");
    r.relations.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>()});
  }
  if (j.contains("encoded")) r.encoded = j.at("encoded").get<std::vector<int>>();
  if (j.contains("attention_mask")) r.attention_mask = j.at("attention_mask").get<std::vector<int>>();
  return r;
}

json record_to_json(const SentenceRecord& r) {
  json j;
  j["id"] = r.id;
  j["tokens"] = r.tokens;
  json tags = json::array();
  for (auto t : r.tags) tags.push_back(std::string(to_string(t)));
  j["tags"] = std::move(tags);
  json rels = json::array();
  for (const auto& p : r.relations) rels.push_back({p.drug, p.ae});
  j["relations"] = std::move(rels);
  j["encoded"] = r.encoded;
  j["attention_mask"] = r.attention_mask;
  return j;
}

std::string file_safe(const std::string& id) {
  std::string out = id;
  for (auto& c : out) {
    if (c == '/' || c == '\\' || c == ':') c = '_';
  }
  return out;
}

}  // namespace

SentenceRecord load_record(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open record file " + path.string());
  try {
    return record_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError("malformed record file " + path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError("malformed record file " + path.string() + ": " + e.what());
  }
}

void write_record(const SentenceRecord& record, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write record file " + path.string());
  out << record_to_json(record).dump() << '\n';
}

std::vector<SentenceRecord> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("corpus directory does not exist: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SentenceRecord> records;
  records.reserve(files.size());
  bool missing_encoding = false;
  for (const auto& f : files) {
    records.push_back(load_record(f));
    missing_encoding = missing_encoding || records.back().encoded.empty();
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].id == records[i - 1].id) throw ValidationError("duplicate record id '" + records[i].id + "'");
  }
  if (missing_encoding) encode_records(records);
  for (const auto& r : records) validate_record(r);
  return records;
}

void write_corpus(const std::vector<SentenceRecord>& records, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& r : records) write_record(r, dir / (file_safe(r.id) + ".json"));
}

std::vector<FoldSplit> make_folds(const std::vector<SentenceRecord>& corpus, int n, std::uint64_t seed) {
  if (n < 2) throw Error("make_folds: need at least 2 folds");
  if (corpus.empty()) throw Error("make_folds: empty corpus");
  if (static_cast<std::size_t>(n) > corpus.size()) {
    throw Error("make_folds: " + std::to_string(n) + " folds exceed corpus size " + std::to_string(corpus.size()));
  }
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& r : corpus) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(ids);

  std::vector<std::vector<std::string>> buckets(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < ids.size(); ++i) buckets[i % buckets.size()].push_back(ids[i]);
  std::vector<FoldSplit> folds;
  for (int k = 0; k < n; ++k) {
    FoldSplit split;
    split.fold_index = k + 1;
    for (int other = 0; other < n; ++other) {
      auto& side = other == k ? split.test_ids : split.train_ids;
      const auto& bucket = buckets[static_cast<std::size_t>(other)];
      side.insert(side.end(), bucket.begin(), bucket.end());
    }
    std::sort(split.train_ids.begin(), split.train_ids.end());
    std::sort(split.test_ids.begin(), split.test_ids.end());
    folds.push_back(std::move(split));
  }
  return folds;
}

namespace {

std::vector<std::string> read_id_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open split file " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

}  // namespace

std::vector<FoldSplit> load_splits(const fs::path& dir) {
  std::vector<FoldSplit> folds;
  for (int k = 1;; ++k) {
    const auto train = dir / ("fold" + std::to_string(k) + "_train.txt");
    const auto test = dir / ("fold" + std::to_string(k) + "_test.txt");
    if (!fs::exists(train) && !fs::exists(test)) break;
    if (!fs::exists(train) || !fs::exists(test)) {
      throw ParseError("fold " + std::to_string(k) + " is missing its train or test file in " + dir.string());
    }
    folds.push_back({k, read_id_list(train), read_id_list(test)});
  }
  if (folds.empty()) throw ParseError("no split files (fold<K>_train.txt / fold<K>_test.txt) in " + dir.string());
  return folds;
}

void write_splits(const std::vector<FoldSplit>& folds, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& f : folds) {
    const auto k = std::to_string(f.fold_index);
    std::ofstream train(dir / ("fold" + k + "_train.txt"));
    for (const auto& id : f.train_ids) train << id << '\n';
    std::ofstream test(dir / ("fold" + k + "_test.txt"));
    for (const auto& id : f.test_ids) test << id << '\n';
  }
}

std::vector<SentenceRecord> select_records(const std::vector<SentenceRecord>& corpus,
                                           const std::vector<std::string>& ids) {
  std::map<std::string_view, std::size_t> position;
  for (std::size_t i = 0; i < corpus.size(); ++i) position.emplace(corpus[i].id, i);
  std::vector<std::size_t> picked;
  picked.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = position.find(id);
    if (it == position.end()) throw ValidationError("split references unknown record id '" + id + "'");
    picked.push_back(it->second);
  }
  std::sort(picked.begin(), picked.end());
  picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
  std::vector<SentenceRecord> out;
  out.reserve(picked.size());
  for (auto i : picked) out.push_back(corpus[i]);
  return out;
}

CorpusStats corpus_stats(const std::vector<SentenceRecord>& records) {
  CorpusStats s;
  std::set<std::string> drugs;
  std::set<std::string> aes;
  for (const auto& r : records) {
    ++s.sentence_count;
    s.relation_count += r.relations.size();
    for (const auto& span : decode_bio(r.tags)) {
      ++s.entity_count;
      std::string surface;
      for (std::size_t i = span.start; i <= span.end; ++i) {
        if (i > span.start) surface += ' ';
        surface += r.tokens[i];
      }
      std::transform(surface.begin(), surface.end(), surface.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (span.type == EntityType::drug) {
        ++s.drug_count;
        drugs.insert(std::move(surface));
      } else {
        ++s.ae_count;
        aes.insert(std::move(surface));
      }
    }
  }
  s.unique_drug_count = drugs.size();
  s.unique_ae_count = aes.size();
  return s;
}

namespace {

std::string numbered(std::string_view prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return std::string(prefix) + buf;
}

}  // namespace

std::vector<SentenceRecord> synth_corpus(const SynthConfig& config) {
  if (config.sentences == 0 || config.drug_vocab == 0 || config.ae_vocab == 0 || config.filler_vocab == 0 ||
      config.max_drugs == 0 || config.max_aes == 0) {
    throw Error("synth_corpus: sizes must be positive");
  }
  if (config.min_fillers > config.max_fillers) throw Error("synth_corpus: min_fillers > max_fillers");

  Rng rng(config.seed);
  std::vector<SentenceRecord> records;
  records.reserve(config.sentences);

  // One segment is one entity or one filler token.
  struct Segment {
    std::vector<std::string> words;
    std::optional<EntityType> type;
  };

  const std::size_t id_width = std::to_string(config.sentences).size();
  for (std::size_t s = 0; s < config.sentences; ++s) {
    const std::size_t n_drugs = 1 + rng.uniform_index(config.max_drugs);
    const std::size_t n_aes = 1 + rng.uniform_index(config.max_aes);
    const std::size_t n_fill = config.min_fillers + rng.uniform_index(config.max_fillers - config.min_fillers + 1);

    std::vector<Segment> segments;
    auto entity = [&](EntityType type) {
      const bool drug = type == EntityType::drug;
      Segment seg{{}, type};
      if (config.modifier_vocab > 0 && rng.uniform() < config.multiword_fraction) {
        seg.words.push_back(numbered(drug ? "dmod" : "aemod", rng.uniform_index(config.modifier_vocab)));
      }
      seg.words.push_back(numbered(drug ? "drug" : "ae", rng.uniform_index(drug ? config.drug_vocab : config.ae_vocab)));
      return seg;
    };
    for (std::size_t i = 0; i < n_drugs; ++i) segments.push_back(entity(EntityType::drug));
    for (std::size_t i = 0; i < n_aes; ++i) segments.push_back(entity(EntityType::ae));
    for (std::size_t i = 0; i < n_fill; ++i) {
      segments.push_back({{numbered("w", rng.uniform_index(config.filler_vocab))}, std::nullopt});
    }
    rng.shuffle(segments);

    SentenceRecord r;
    std::string id = std::to_string(s);
    r.id = "synth-" + std::string(id_width - id.size(), '0') + id;
    r.tokens.emplace_back(kStartToken);
    std::vector<Span> spans;
    for (const auto& seg : segments) {
      const std::size_t start = r.tokens.size();
      r.tokens.insert(r.tokens.end(), seg.words.begin(), seg.words.end());
      if (seg.type) spans.push_back({start, r.tokens.size() - 1, *seg.type});
    }
    r.tags = encode_bio(spans, r.tokens.size());
    for (const auto& d : spans) {
      if (d.type != EntityType::drug) continue;
      for (const auto& a : spans) {
        if (a.type != EntityType::ae) continue;
        if (rng.uniform() < config.relation_density) r.relations.push_back(relation_heads(d, a));
      }
    }
    std::sort(r.relations.begin(), r.relations.end());
    records.push_back(std::move(r));
  }
  encode_records(records);
  return records;
}

std::string stats_json(const CorpusStats& s) {
  nlohmann::ordered_json j;
  j["sentences"] = s.sentence_count;
  j["relations"] = s.relation_count;
  j["entities"] = s.entity_count;
  j["drugs"] = s.drug_count;
  j["adverse_effects"] = s.ae_count;
  j["unique_drugs"] = s.unique_drug_count;
  j["unique_adverse_effects"] = s.unique_ae_count;
  return j.dump(2);
}

}  // namespace relcl
