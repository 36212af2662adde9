#include "support.hpp"

#include <fstream>
#include <set>

using namespace relcl;
using relcl::testing::make_record;

TEST_CASE("BIO encoding of spans") {
  const auto tags = encode_bio({{1, 2, EntityType::drug}, {4, 4, EntityType::ae}}, 6);
  const std::vector<BioTag> want{BioTag::O, BioTag::B_DRUG, BioTag::I_DRUG, BioTag::O, BioTag::B_AE, BioTag::O};
  CHECK(tags == want);
  CHECK(decode_bio(tags) == std::vector<Span>{{1, 2, EntityType::drug}, {4, 4, EntityType::ae}});
  CHECK_THROWS_AS(encode_bio({{1, 2, EntityType::drug}, {2, 3, EntityType::ae}}, 5), ValidationError);
  CHECK_THROWS_AS(encode_bio({{3, 5, EntityType::drug}}, 5), ValidationError);
}

TEST_CASE("BIO validation reports the offending token") {
  try {
    validate_bio({BioTag::O, BioTag::I_AE});
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  CHECK_THROWS(validate_bio({BioTag::B_DRUG, BioTag::I_AE}));
  CHECK_NOTHROW(validate_bio({BioTag::B_DRUG, BioTag::I_DRUG, BioTag::B_DRUG}));
}

TEST_CASE("decoding repairs an orphan inside tag") {
  const auto spans = decode_bio({BioTag::O, BioTag::I_AE, BioTag::I_AE, BioTag::B_DRUG});
  CHECK(spans == std::vector<Span>{{1, 2, EntityType::ae}, {3, 3, EntityType::drug}});
}

TEST_CASE("relation heads are the last tokens of the entities") {
  const RelationPair p = relation_heads({0, 0, EntityType::drug}, {2, 3, EntityType::ae});
  CHECK(p.drug == 0);
  CHECK(p.ae == 3);
  CHECK_THROWS(relation_heads({0, 0, EntityType::ae}, {2, 3, EntityType::ae}));
}

TEST_CASE("record validation") {
  auto r = make_record("r", 5, {{0, 0, EntityType::drug}, {2, 3, EntityType::ae}}, {{0, 3}});
  CHECK_NOTHROW(validate_record(r));
  auto bad = r;
  bad.relations = {{0, 2}};
  CHECK_THROWS_AS(validate_record(bad), ValidationError);
  bad.relations = {{3, 0}};
  CHECK_THROWS_AS(validate_record(bad), ValidationError);
  bad.relations = {{0, 3}, {0, 3}};
  CHECK_THROWS_AS(validate_record(bad), ValidationError);
  bad = r;
  bad.tags.pop_back();
  CHECK_THROWS_AS(validate_record(bad), ValidationError);
}

TEST_CASE("vocabulary encoding pads to the longest record") {
  std::vector<SentenceRecord> records{make_record("a", 3, {}, {}), make_record("b", 5, {}, {})};
  encode_records(records);
  CHECK(records[0].encoded.size() == 5);
  CHECK(records[0].attention_mask == std::vector<int>{1, 1, 1, 0, 0});
  CHECK(records[0].encoded[3] == 0);
  CHECK(records[0].encoded[0] >= 2);
  const auto vocab = Vocabulary::build(records);
  CHECK(vocab.id("never-seen") == 1);
}

TEST_CASE("records survive a JSON round trip") {
  const auto dir = relcl::testing::scratch_dir("corpus_io");
  auto records = synth_corpus(SynthConfig{.sentences = 12, .seed = 4});
  write_corpus(records, dir);
  const auto loaded = load_corpus(dir);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) CHECK(loaded[i] == records[i]);
}

TEST_CASE("loading rejects malformed and duplicate records") {
  const auto dir = relcl::testing::scratch_dir("corpus_bad");
  {
    std::ofstream out(dir / "x.json");
    out << R"({"id": "x", "tokens": ["a", "b"], "tags": ["O", "I-AE"], "relations": []})";
  }
  CHECK_THROWS_AS(load_corpus(dir), ValidationError);
  std::filesystem::remove(dir / "x.json");
  {
    std::ofstream out(dir / "y.json");
    out << "{not json";
  }
  CHECK_THROWS_AS(load_corpus(dir), ParseError);
}

TEST_CASE("folds partition the corpus") {
  const auto corpus = synth_corpus(SynthConfig{.sentences = 53, .seed = 2});
  for (int n : {2, 5, 10}) {
    const auto folds = make_folds(corpus, n, 11);
    REQUIRE(folds.size() == static_cast<std::size_t>(n));
    std::multiset<std::string> tested;
    for (const auto& f : folds) {
      tested.insert(f.test_ids.begin(), f.test_ids.end());
      CHECK(f.train_ids.size() + f.test_ids.size() == corpus.size());
      std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
      for (const auto& id : f.test_ids) CHECK(train.count(id) == 0);
      CHECK(f.test_ids.size() >= corpus.size() / n);
      CHECK(f.test_ids.size() <= corpus.size() / n + 1);
    }
    CHECK(tested.size() == corpus.size());
    for (const auto& r : corpus) CHECK(tested.count(r.id) == 1);
  }
  CHECK_THROWS(make_folds(corpus, 1, 1));
  CHECK_THROWS(make_folds(corpus, 54, 1));
}

TEST_CASE("split files round trip") {
  const auto dir = relcl::testing::scratch_dir("splits");
  const auto corpus = synth_corpus(SynthConfig{.sentences = 20, .seed = 2});
  const auto folds = make_folds(corpus, 4, 3);
  write_splits(folds, dir);
  const auto loaded = load_splits(dir);
  REQUIRE(loaded.size() == folds.size());
  for (std::size_t i = 0; i < folds.size(); ++i) {
    CHECK(loaded[i].fold_index == folds[i].fold_index);
    CHECK(loaded[i].test_ids == folds[i].test_ids);
    CHECK(loaded[i].train_ids == folds[i].train_ids);
  }
  CHECK_THROWS(select_records(corpus, {"missing"}));
}

TEST_CASE("corpus statistics on a hand-built corpus") {
  auto a = make_record("a", 6, {{0, 0, EntityType::drug}, {2, 3, EntityType::ae}, {5, 5, EntityType::ae}},
                       {{0, 3}, {0, 5}});
  a.tokens = {"Aspirin", "x", "skin", "rash", "y", "Rash"};
  auto b = make_record("b", 3, {{0, 0, EntityType::drug}}, {});
  b.tokens = {"aspirin", "y", "z"};
  const auto s = corpus_stats({a, b});
  CHECK(s.sentence_count == 2);
  CHECK(s.relation_count == 2);
  CHECK(s.entity_count == 4);
  CHECK(s.drug_count == 2);
  CHECK(s.ae_count == 2);
  CHECK(s.unique_drug_count == 1);
  CHECK(s.unique_ae_count == 2);
}

TEST_CASE("synthetic corpora are valid and seeded") {
  const SynthConfig config{.sentences = 40, .seed = 8};
  const auto a = synth_corpus(config);
  const auto b = synth_corpus(config);
  CHECK(a == b);
  for (const auto& r : a) {
    CHECK_NOTHROW(validate_record(r));
    CHECK(r.tokens.front() == kStartToken);
  }
}
