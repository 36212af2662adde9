#include "support.hpp"

#include <algorithm>
#include <set>
#include <sstream>

using namespace relcl;
using relcl::testing::make_record;
using relcl::testing::random_source;

namespace {

TrainConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_train_config(in);
}

std::vector<SentenceRecord> small_corpus(std::size_t n) {
  return synth_corpus(SynthConfig{.sentences = n, .seed = 11});
}

std::vector<Matrix> values_of(AnyModel& model) {
  std::vector<Matrix> out;
  for (auto* p : parameters_of(model)) out.push_back(p->value);
  return out;
}

}  // namespace

TEST_CASE("config files") {
  const auto c = parse("# comment\nlearning_rate = 0.01\nepochs=3\n\nactivation = tanh # trailing\n");
  CHECK(c.learning_rate == 0.01);
  CHECK(c.epochs == 3);
  CHECK(c.activation == Activation::tanh);
  CHECK(c.batch_size == 8);

  const auto ner = parse("model = clner\n");
  CHECK(ner.batch_size == 16);
  CHECK(ner.head_layers == 1);
  CHECK(ner.activation == Activation::identity);

  CHECK_THROWS_AS(parse("learnign_rate = 0.1\n"), ParseError);
  CHECK_THROWS_AS(parse("epochs = many\n"), ParseError);
  CHECK_THROWS_AS(parse("just words\n"), ParseError);
  CHECK_THROWS(parse("tau = 0\n"));
  CHECK_THROWS(parse("model = clner\nhead_layers = 2\n"));
  CHECK_THROWS(parse("lambda = 1.5\n"));

  const auto round = parse(format_train_config(c));
  CHECK(format_train_config(round) == format_train_config(c));
}

TEST_CASE("validation split sizes") {
  const auto corpus = small_corpus(25);
  auto [train, val] = split_validation(corpus, 0.10, 3);
  CHECK(val.size() == 3);  // 2.5 rounds away from zero
  CHECK(train.size() + val.size() == corpus.size());
  std::set<std::string> ids;
  for (const auto& r : train) ids.insert(r.id);
  for (const auto& r : val) CHECK(ids.insert(r.id).second);
  CHECK_THROWS(split_validation(small_corpus(2), 0.10, 3));
}

TEST_CASE("eligible records") {
  const auto with = make_record("a", 4, {{0, 0, EntityType::drug}, {2, 2, EntityType::ae}}, {{0, 2}});
  const auto without = make_record("b", 3, {}, {});
  // No token can replace either endpoint.
  const auto stuck = make_record("c", 2, {{0, 0, EntityType::drug}, {1, 1, EntityType::ae}}, {{0, 1}});
  CHECK(eligible_records({with, without, stuck}, ModelKind::cldr).size() == 1);
  CHECK(eligible_records({with, without, stuck}, ModelKind::clner).size() == 3);
}

TEST_CASE("a single candidate per relation gives zero loss") {
  const auto r = make_record("solo", 5, {{1, 1, EntityType::drug}, {3, 3, EntityType::ae}}, {{1, 3}});
  TrainConfig c;
  c.z = 1;
  c.epochs = 2;
  c.learning_rate = 1e-3;
  const auto result = train(c, {r}, random_source({r}, 6, 2));
  for (double loss : result.history.epoch_loss) CHECK(loss == doctest::Approx(0.0));
  CHECK(result.history.best_epoch == 2);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto corpus = small_corpus(30);
  auto base = std::make_shared<EmbeddingSource>(synth_embeddings(corpus, 16, 4));
  for (auto kind : {ModelKind::clgs, ModelKind::cldr, ModelKind::clner}) {
    CAPTURE(to_string(kind));
    auto c = TrainConfig::defaults(kind);
    c.epochs = 4;
    c.learning_rate = 1e-2;
    auto a = train(c, corpus, base);
    auto b = train(c, corpus, base);
    CHECK(a.history.epoch_loss == b.history.epoch_loss);
    CHECK(values_of(a.model) == values_of(b.model));
    CHECK(a.history.epoch_loss.back() < a.history.epoch_loss.front());
    c.seed = 2;
    auto other = train(c, corpus, base);
    CHECK(other.history.epoch_loss != a.history.epoch_loss);
  }
}

TEST_CASE("the best validation epoch is kept") {
  const auto corpus = small_corpus(30);
  auto base = std::make_shared<EmbeddingSource>(synth_embeddings(corpus, 16, 4));
  TrainConfig c;
  c.epochs = 3;
  c.learning_rate = 1e-2;
  auto r = train(c, corpus, base);
  REQUIRE(r.history.validation_loss.size() == 3);
  const auto best = std::min_element(r.history.validation_loss.begin(), r.history.validation_loss.end());
  CHECK(r.history.best_epoch == static_cast<std::size_t>(best - r.history.validation_loss.begin()) + 1);
}

TEST_CASE("models save and load") {
  const auto dir = relcl::testing::scratch_dir("train_io");
  const auto corpus = small_corpus(20);
  auto base = std::make_shared<EmbeddingSource>(synth_embeddings(corpus, 8, 4));
  TrainConfig c;
  c.epochs = 2;
  c.learning_rate = 1e-2;
  auto r = train(c, corpus, base, dir);
  CHECK(std::filesystem::exists(dir / "epoch_001.ckpt"));
  CHECK(std::filesystem::exists(dir / "epoch_002.ckpt"));
  CHECK(std::filesystem::exists(dir / "history.tsv"));
  auto loaded = load_model(dir, base);
  CHECK(format_train_config(loaded.config) == format_train_config(c));
  CHECK(values_of(loaded.model) == values_of(r.model));
  CHECK(encoder_of(loaded.model).embed(corpus[0]) == encoder_of(r.model).embed(corpus[0]));

  auto other = std::make_shared<EmbeddingSource>(synth_embeddings(corpus, 8, 5));
  CHECK_THROWS(load_model(dir, other));
  CHECK_THROWS(load_model(dir / "missing", base));
}
